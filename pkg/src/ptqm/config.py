"""Job configuration: a strict JSON schema for batch runs.

Example::

    {
      "model": {"type": "epsilon_family", "eps": 1.0},
      "grid": {"n": 201, "half_width": 8.0},
      "modes_kept": 10,
      "seed": 7,
      "operators": [{"builtin": "h"}, {"builtin": "x"}, {"builtin": "random_def2"}],
      "outputs": {"report_path": "report.json"}
    }

Unknown keys are rejected at every level. Complex numbers are ``[re, im]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, IoError
from .linalg import DEFAULT_TOLERANCES, Tolerances
from .models import (
    EpsilonFamily,
    Grid,
    Matrix2x2,
    PolyPotential,
    PotentialExpr,
    ShiftedSquare,
    make_grid,
    parse_potential,
)
from .serialization import decode_cmatrix, decode_complex, encode_cmatrix, encode_complex

__all__ = [
    "BUILTINS",
    "SWEEP_PARAMETERS",
    "OperatorSpec",
    "Outputs",
    "Sweep",
    "JobConfig",
    "parse_config",
    "load_config",
    "model_from_dict",
    "model_to_dict",
]

BUILTINS = ("x", "p", "h", "random_def1", "random_def2")
SWEEP_PARAMETERS = ("epsilon", "theta")
MAX_SEED = 2**64 - 1


def _where(path, key=None) -> str:
    return f"{path}.{key}" if key is not None else path


def _keys(obj, path: str, required=(), optional=()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object, got {type(obj).__name__}")
    allowed = set(required) | set(optional)
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{_where(path, key)}: unknown key (allowed: {', '.join(sorted(allowed))})")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{_where(path, key)}: missing required key")


def _number(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {v!r}")
    if not np.isfinite(v):
        raise ConfigError(f"{path}: must be finite")
    return float(v)


def _integer(v, path: str, lo: int = 0, hi: Optional[int] = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}: expected an integer, got {v!r}")
    if v < lo or (hi is not None and v > hi):
        raise ConfigError(f"{path}: {v} out of range")
    return v


def _string(v, path: str) -> str:
    if not isinstance(v, str):
        raise ConfigError(f"{path}: expected a string, got {v!r}")
    return v


_MODEL_KEYS = {
    "epsilon_family": ("eps",),
    "ix_cubed": (),
    "hermitian_oscillator": (),
    "matrix2x2": ("r", "s", "theta"),
    "shifted_square": (),
    "poly": ("coeffs",),
    "expr": ("source",),
}


def model_from_dict(d, path: str = "model"):
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError(f"{path}.type: missing required key")
    kind = d["type"]
    if kind not in _MODEL_KEYS:
        raise ConfigError(f"{path}.type: unknown model {kind!r} (known: {', '.join(_MODEL_KEYS)})")
    _keys(d, path, required=("type",) + _MODEL_KEYS[kind])
    if kind == "epsilon_family":
        return EpsilonFamily(_number(d["eps"], f"{path}.eps"))
    if kind == "ix_cubed":
        return EpsilonFamily(1.0)
    if kind == "hermitian_oscillator":
        return EpsilonFamily(0.0)
    if kind == "matrix2x2":
        vals = {k: _number(d[k], f"{path}.{k}") for k in ("r", "s", "theta")}
        if vals["s"] == 0:
            raise ConfigError(f"{path}.s: must be non-zero")
        return Matrix2x2(**vals)
    if kind == "shifted_square":
        return ShiftedSquare()
    if kind == "poly":
        coeffs = d["coeffs"]
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigError(f"{path}.coeffs: expected a non-empty list")
        try:
            return PolyPotential(tuple(decode_complex(c, f"{path}.coeffs[{k}]") for k, c in enumerate(coeffs)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    source = _string(d["source"], f"{path}.source")
    parse_potential(source)  # syntax errors surface at load time
    return PotentialExpr(source)


def model_to_dict(spec) -> dict:
    if isinstance(spec, Matrix2x2):
        return {"type": "matrix2x2", "r": spec.r, "s": spec.s, "theta": spec.theta}
    if isinstance(spec, EpsilonFamily):
        return {"type": "epsilon_family", "eps": spec.eps}
    if isinstance(spec, ShiftedSquare):
        return {"type": "shifted_square"}
    if isinstance(spec, PolyPotential):
        return {"type": "poly", "coeffs": [encode_complex(c) for c in spec.coeffs]}
    if isinstance(spec, PotentialExpr):
        return {"type": "expr", "source": spec.source}
    raise TypeError(f"unknown model {spec!r}")


@dataclass(frozen=True)
class OperatorSpec:
    label: str
    builtin: Optional[str] = None
    matrix: Optional[np.ndarray] = field(default=None, compare=False)

    def to_dict(self) -> dict:
        if self.builtin is not None:
            return {"builtin": self.builtin, "label": self.label}
        return {"matrix": encode_cmatrix(self.matrix), "label": self.label}


@dataclass(frozen=True)
class Outputs:
    report_path: Optional[str] = None
    csv_path: Optional[str] = None
    frame_path: Optional[str] = None

    def to_dict(self) -> dict:
        return {k: v for k, v in (("report_path", self.report_path), ("csv_path", self.csv_path),
                                  ("frame_path", self.frame_path)) if v is not None}


@dataclass(frozen=True)
class Sweep:
    parameter: str
    start: float
    stop: float
    steps: int

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)

    def to_dict(self) -> dict:
        return {"parameter": self.parameter, "from": self.start, "to": self.stop, "steps": self.steps}


@dataclass(frozen=True)
class JobConfig:
    model: object
    grid: Optional[Grid] = None
    modes_kept: Optional[int] = None
    tolerances: Tolerances = DEFAULT_TOLERANCES
    seed: int = 0
    operators: tuple = ()
    outputs: Outputs = Outputs()
    sweep: Optional[Sweep] = None

    def with_overrides(self, modes=None, seed=None, tol_real=None, tol_disc=None) -> "JobConfig":
        cfg = self
        if modes is not None:
            cfg = replace(cfg, modes_kept=_integer(modes, "--modes", lo=1))
        if seed is not None:
            cfg = replace(cfg, seed=_integer(seed, "--seed", hi=MAX_SEED))
        if tol_real is not None or tol_disc is not None:
            tol = cfg.tolerances
            try:
                tol = replace(
                    tol,
                    real=tol.real if tol_real is None else float(tol_real),
                    disc=tol.disc if tol_disc is None else float(tol_disc),
                )
            except ValueError as exc:
                raise ConfigError(f"tolerance override: {exc}") from exc
            cfg = replace(cfg, tolerances=tol)
        return cfg

    def to_dict(self) -> dict:
        """Normalized echo of the configuration, as recorded in reports."""
        d = {
            "model": model_to_dict(self.model),
            "seed": self.seed,
            "tolerances": {k: getattr(self.tolerances, k) for k in ("res", "alg", "real", "disc")},
        }
        if self.grid is not None:
            d["grid"] = {"n": self.grid.n_points, "half_width": self.grid.half_width}
        if self.modes_kept is not None:
            d["modes_kept"] = self.modes_kept
        if self.operators:
            d["operators"] = [op.to_dict() for op in self.operators]
        if self.sweep is not None:
            d["sweep"] = self.sweep.to_dict()
        return d


def _operator(d, path: str) -> OperatorSpec:
    _keys(d, path, optional=("builtin", "matrix", "label"))
    if ("builtin" in d) == ("matrix" in d):
        raise ConfigError(f"{path}: exactly one of 'builtin' or 'matrix' is required")
    label = _string(d["label"], f"{path}.label") if "label" in d else None
    if "builtin" in d:
        name = _string(d["builtin"], f"{path}.builtin")
        if name not in BUILTINS:
            raise ConfigError(f"{path}.builtin: unknown operator {name!r} (known: {', '.join(BUILTINS)})")
        return OperatorSpec(label or name, builtin=name)
    try:
        m = decode_cmatrix(d["matrix"], f"{path}.matrix")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if m.shape[0] != m.shape[1]:
        raise ConfigError(f"{path}.matrix: not square {m.shape}")
    return OperatorSpec(label or "matrix", matrix=m)


def parse_config(d) -> JobConfig:
    _keys(d, "config", required=("model",),
          optional=("grid", "modes_kept", "tolerances", "seed", "operators", "outputs", "sweep"))
    model = model_from_dict(d["model"])
    grid = None
    if "grid" in d:
        g = d["grid"]
        _keys(g, "grid", required=("n", "half_width"))
        if isinstance(model, Matrix2x2):
            raise ConfigError("grid: matrix2x2 models have no lattice")
        grid = make_grid(_integer(g["n"], "grid.n", lo=3), _number(g["half_width"], "grid.half_width"))
    modes = _integer(d["modes_kept"], "modes_kept", lo=1) if "modes_kept" in d else None
    tol = DEFAULT_TOLERANCES
    if "tolerances" in d:
        t = d["tolerances"]
        _keys(t, "tolerances", optional=("res", "alg", "real", "disc"))
        try:
            tol = Tolerances(**{k: _number(v, f"tolerances.{k}") for k, v in t.items()})
        except ValueError as exc:
            raise ConfigError(f"tolerances: {exc}") from exc
    seed = _integer(d["seed"], "seed", hi=MAX_SEED) if "seed" in d else 0
    ops = ()
    if "operators" in d:
        if not isinstance(d["operators"], list):
            raise ConfigError("operators: expected a list")
        ops = tuple(_operator(o, f"operators[{k}]") for k, o in enumerate(d["operators"]))
    outputs = Outputs()
    if "outputs" in d:
        o = d["outputs"]
        _keys(o, "outputs", optional=("report_path", "csv_path", "frame_path"))
        outputs = Outputs(**{k: _string(v, f"outputs.{k}") for k, v in o.items()})
    sweep = None
    if "sweep" in d:
        s = d["sweep"]
        _keys(s, "sweep", required=("parameter", "from", "to", "steps"))
        param = _string(s["parameter"], "sweep.parameter")
        if param not in SWEEP_PARAMETERS:
            raise ConfigError(f"sweep.parameter: unknown parameter {param!r} (known: epsilon, theta)")
        steps = _integer(s["steps"], "sweep.steps")
        if steps < 2:
            raise ConfigError(f"sweep.steps: need at least 2 points, got {steps}")
        sweep = Sweep(param, _number(s["from"], "sweep.from"), _number(s["to"], "sweep.to"), steps)
    return JobConfig(model, grid, modes, tol, seed, ops, outputs, sweep)


def load_config(path) -> JobConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})") from exc
    return parse_config(d)
