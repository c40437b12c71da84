"""Command line front end.

Subcommands: ``spectrum``, ``audit``, ``phase-scan``, ``frame save|load|check``
and ``parse-check``. Exit codes: 0 success, 1 numerical or domain failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import JobConfig, load_config
from .errors import ConfigError, FrameError, MetricNotPositive, PotentialSyntaxError, PTQMError, UsageError
from .metric import ModelSolution, solve_model
from .models import EpsilonFamily, Matrix2x2, build_operators, format_potential, parse_potential
from .observables import DEF1, DEF2, classify_operator, classify_without_frame, generate_observable
from .serialization import csv_text, dumps, encode_complex, load_frame, save_frame, write_text

REPORT_SCHEMA = 1
SPECTRUM_COLUMNS = ("index", "re", "im", "residual", "kept")
SCAN_COLUMNS = ("index", "parameter", "value", "kept", "max_imag", "phase", "flag")


def _spectrum_block(sol: ModelSolution) -> dict:
    es, cls = sol.eigensystem, sol.classification
    scale = max(es.scale, np.finfo(float).tiny)
    return {
        "phase": cls.phase,
        "near_exceptional": cls.near_exceptional,
        "max_imag_relative": cls.max_imag,
        "modes_requested": sol.modes,
        "candidates": list(cls.candidates),
        "kept": list(cls.kept),
        "kept_values": [encode_complex(z) for z in cls.kept_values],
        "values": [encode_complex(z) for z in es.values],
        "real": [bool(r) for r in cls.real],
        "certified": [bool(c) for c in es.certified],
        "residual": [float(r) for r in _residuals(es, scale)],
    }


def _residuals(es, scale) -> np.ndarray:
    return np.maximum(es.residual_right, es.residual_left) / scale


def _solve(cfg: JobConfig, model=None) -> ModelSolution:
    return solve_model(model or cfg.model, cfg.grid, cfg.modes_kept, cfg.tolerances)


def run_spectrum(cfg: JobConfig):
    """Spectrum and classification. Returns ``(report, csv)``; broken phases are not errors."""
    sol = _solve(cfg)
    es, cls = sol.eigensystem, sol.classification
    res = _residuals(es, max(es.scale, np.finfo(float).tiny))
    kept = set(cls.kept)
    rows = [(k, float(z.real), float(z.imag), float(res[k]), int(k in kept))
            for k, z in enumerate(es.values)]
    report = {
        "schema_version": REPORT_SCHEMA,
        "command": "spectrum",
        "config": cfg.to_dict(),
        "spectrum": _spectrum_block(sol),
    }
    return report, csv_text(SPECTRUM_COLUMNS, rows)


def _operator_matrix(op, index: int, cfg: JobConfig, sol: ModelSolution, frame):
    if op.matrix is not None:
        return op.matrix
    if op.builtin == "h":
        return sol.hamiltonian.matrix
    if op.builtin in ("x", "p"):
        if sol.grid is None:
            raise ConfigError(f"operators[{index}]: builtin {op.builtin!r} needs a lattice model")
        ops = build_operators(sol.grid)
        return ops.X.matrix if op.builtin == "x" else ops.Mom.matrix
    if frame is None:
        return None
    kind = DEF1 if op.builtin == "random_def1" else DEF2
    # the report carries the residuals; a lattice rounding floor is data, not an error
    return generate_observable(kind, frame, [cfg.seed, index], verify=False)


def run_audit(cfg: JobConfig):
    """Build the frame and classify every operator. Returns ``(report, frame, exit_code)``.

    When no frame can be built the report still records the spectrum, the
    failure diagnostics and the frame-independent operator flags; the exit
    code is then 1.
    """
    sol = _solve(cfg)
    frame, failure = None, None
    try:
        frame = sol.frame(cfg.tolerances)
    except FrameError as exc:
        failure = exc

    ops = cfg.operators
    for k, op in enumerate(ops):
        if op.matrix is not None and op.matrix.shape != sol.hamiltonian.matrix.shape:
            raise ConfigError(f"operators[{k}].matrix: shape {op.matrix.shape} does not match "
                              f"the model dimension {sol.hamiltonian.matrix.shape[0]}")
    reports = []
    for k, op in enumerate(ops):
        a = _operator_matrix(op, k, cfg, sol, frame)
        if frame is not None:
            reports.append(classify_operator(a, frame, op.label, cfg.tolerances).to_dict())
        else:
            reports.append(classify_without_frame(
                a, sol.par.matrix, sol.hamiltonian.matrix, op.label,
                f"{type(failure).__name__}: {failure}", cfg.tolerances,
            ).to_dict())

    if frame is not None:
        frame_block = {
            "ok": True,
            "order_convention": frame.order_convention,
            "modes_kept": frame.modes_kept,
            "signs": [int(s) for s in frame.signs],
            "values": [encode_complex(z) for z in frame.values],
            "threshold": frame.threshold,
            "invariants": dict(frame.residuals),
        }
    else:
        frame_block = {"ok": False, "error": type(failure).__name__, "message": str(failure)}
        if isinstance(failure, MetricNotPositive):
            frame_block["min_gram_eigenvalue"] = failure.min_eigenvalue
            frame_block["hermiticity"] = dict(failure.hermiticity)
    report = {
        "schema_version": REPORT_SCHEMA,
        "command": "audit",
        "config": cfg.to_dict(),
        "spectrum": _spectrum_block(sol),
        "frame": frame_block,
        "operators": reports,
    }
    return report, frame, 0 if frame is not None else 1


def _scan_model(cfg: JobConfig, value: float):
    if cfg.sweep.parameter == "epsilon":
        return EpsilonFamily(float(value))
    return replace(cfg.model, theta=float(value))


def _scan_point(cfg: JobConfig, index: int, value: float):
    sol = _solve(cfg, _scan_model(cfg, value))
    cls = sol.classification
    cand = sol.eigensystem.values[list(cls.candidates)]
    max_imag = float(np.max(np.abs(cand.imag))) if len(cand) else 0.0
    flag = "exceptional_point" if cls.near_exceptional else ""
    return (index, cfg.sweep.parameter, float(value), len(cls.kept), max_imag, cls.phase, flag)


def run_phase_scan(cfg: JobConfig, jobs: int = 1) -> str:
    sweep = cfg.sweep
    if sweep is None:
        raise ConfigError("sweep: phase-scan needs a 'sweep' block")
    if sweep.parameter == "epsilon" and not isinstance(cfg.model, EpsilonFamily):
        raise ConfigError("sweep.parameter: 'epsilon' needs an epsilon_family model")
    if sweep.parameter == "theta" and not isinstance(cfg.model, Matrix2x2):
        raise ConfigError("sweep.parameter: 'theta' needs a matrix2x2 model")
    points = sweep.points
    for v in points:  # domain errors are configuration errors, raise before any work
        _scan_model(cfg, v)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda kv: _scan_point(cfg, *kv), enumerate(points)))
    else:
        rows = [_scan_point(cfg, k, v) for k, v in enumerate(points)]
    return csv_text(SCAN_COLUMNS, rows)


# ------------------------------------------------------------------ plumbing


def _color(text: str, code: str, stream) -> str:
    if os.environ.get("PTQM_NO_COLOR") or not getattr(stream, "isatty", lambda: False)():
        return text
    return f"\033[{code}m{text}\033[0m"


def _diagnose(exc: BaseException, stream=None):
    stream = stream or sys.stderr
    label = _color("error", "31;1", stream)
    print(f"ptqm: {label}: {type(exc).__name__}: {exc}", file=stream)
    if isinstance(exc, PotentialSyntaxError) and exc.source:
        print("  " + exc.source, file=stream)
        print("  " + " " * exc.position + "^", file=stream)


def _destination(explicit: Optional[str], out: Optional[str], default_name: str) -> Optional[Path]:
    if explicit is not None:
        path = Path(explicit)
        return path if path.is_absolute() or out is None else Path(out) / path
    if out is not None:
        return Path(out) / default_name
    return None


def _emit(text: str, dest: Optional[Path]):
    if dest is None:
        sys.stdout.write(text)
    else:
        write_text(dest, text)


def _config(args) -> JobConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(modes=args.modes, seed=args.seed,
                              tol_real=args.tol_real, tol_disc=args.tol_disc)


def _timed(report: dict, args, started: float):
    if args.timings:
        report["wall_times"] = {"total_seconds": time.perf_counter() - started}


def cmd_spectrum(args) -> int:
    started = time.perf_counter()
    cfg = _config(args)
    report, table = run_spectrum(cfg)
    _timed(report, args, started)
    _emit(table, _destination(cfg.outputs.csv_path, args.out, "spectrum.csv"))
    dest = _destination(cfg.outputs.report_path, args.out, "spectrum.json")
    if dest is not None:
        write_text(dest, dumps(report))
    return 0


def cmd_audit(args) -> int:
    started = time.perf_counter()
    cfg = _config(args)
    report, frame, code = run_audit(cfg)
    _timed(report, args, started)
    _emit(dumps(report), _destination(cfg.outputs.report_path, args.out, "report.json"))
    frame_dest = _destination(cfg.outputs.frame_path, args.out, "frame.json") if cfg.outputs.frame_path else None
    if frame is not None and frame_dest is not None:
        save_frame(frame, frame_dest)
    if code:
        _diagnose(FrameError(f"no CPT frame: {report['frame']['error']}: {report['frame']['message']}"))
    return code


def cmd_phase_scan(args) -> int:
    cfg = _config(args)
    table = run_phase_scan(cfg, jobs=args.jobs)
    _emit(table, _destination(cfg.outputs.csv_path, args.out, "phase_scan.csv"))
    return 0


def cmd_frame(args) -> int:
    if args.action == "save":
        if args.config is None:
            raise UsageError("frame save needs --config")
        cfg = _config(args)
        dest = _destination(cfg.outputs.frame_path, args.out, "frame.json")
        if dest is None:
            raise UsageError("frame save needs outputs.frame_path or --out")
        frame = _solve(cfg).frame(cfg.tolerances)
        save_frame(frame, dest)
        print(f"saved frame ({frame.dim}x{frame.dim}, {frame.modes_kept} modes) to {dest}")
        return 0
    if args.path is None:
        raise UsageError(f"frame {args.action} needs a frame file")
    frame = load_frame(args.path)
    if args.action == "check":
        print(f"ok: {args.path} ({frame.dim}x{frame.dim}, {frame.modes_kept} modes, "
              f"order {frame.order_convention})")
        return 0
    summary = {
        "dim": frame.dim,
        "modes_kept": frame.modes_kept,
        "order_convention": frame.order_convention,
        "lattice": frame.lattice,
        "weight": frame.weight,
        "signs": [int(s) for s in frame.signs],
        "values": [encode_complex(z) for z in frame.values],
        "invariants": dict(frame.residuals),
    }
    sys.stdout.write(dumps(summary))
    return 0


def cmd_parse_check(args) -> int:
    poly = parse_potential(args.expression)
    sys.stdout.write(dumps({
        "coefficients": [encode_complex(c) for c in poly.coeffs],
        "degree": len(poly.coeffs) - 1,
        "canonical": format_potential(poly),
    }))
    return 0


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not (np.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError("must be positive and finite")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="job configuration (JSON)")
    common.add_argument("--seed", type=_seed, help="override the configured seed")
    common.add_argument("--out", help="output directory for default file names")
    common.add_argument("--modes", type=_positive_int, help="number of kept modes")
    common.add_argument("--tol-real", type=_positive_float, help="reality tolerance")
    common.add_argument("--tol-disc", type=_positive_float, help="discretization tolerance")
    common.add_argument("--timings", action="store_true",
                        help="add wall times to reports (output is then not reproducible)")

    parser = argparse.ArgumentParser(prog="ptqm", description="PT-symmetric observable toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], help="spectrum and PT phase")
    p.set_defaults(func=cmd_spectrum, needs_config=True)
    p = sub.add_parser("audit", parents=[common], help="build the CPT frame and classify operators")
    p.set_defaults(func=cmd_audit, needs_config=True)
    p = sub.add_parser("phase-scan", parents=[common], help="sweep epsilon or theta")
    p.add_argument("--jobs", type=_positive_int, default=1, help="evaluate sweep points in parallel")
    p.set_defaults(func=cmd_phase_scan, needs_config=True)
    p = sub.add_parser("frame", parents=[common], help="persist or verify CPT frames")
    p.add_argument("action", choices=("save", "load", "check"))
    p.add_argument("path", nargs="?", help="frame file for load/check")
    p.set_defaults(func=cmd_frame, needs_config=False)
    p = sub.add_parser("parse-check", help="validate a polynomial potential expression")
    p.add_argument("expression")
    p.set_defaults(func=cmd_parse_check, needs_config=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.needs_config and not args.config:
            raise UsageError(f"{args.command} needs --config")
        return args.func(args)
    except PTQMError as exc:
        _diagnose(exc)
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        _diagnose(exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
