"""Acceptance gate: one test per criterion, each at its stated tolerance.

Every test records a single ``criterion N: PASS|FAIL`` line, collected in the
terminal summary. Nothing here is tuned to pass; a red line is a measured
result.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from ptqm import EpsilonFamily, FrameError, Matrix2x2, ShiftedSquare, inner_cpt, inner_eta, solve_model
from ptqm.cli import main
from ptqm.models import build_operators, make_grid
from ptqm.observables import (
    DEF1,
    DEF2,
    INAPPLICABLE,
    classify_without_frame,
    def1_residual,
    def2_residual,
    eq2_residual,
    generate_observable,
    matrix_element_audit,
    requirement_audit,
    symmetry_flags,
)

TAU_ALG = 1e-9
TAU_REAL = 1e-8
TAU_DISC = 1e-6
GOLDEN = Path(__file__).parent / "golden"


def fro(a):
    return float(np.linalg.norm(a))


@pytest.fixture(scope="module")
def cubic_frame():
    return solve_model(EpsilonFamily(1.0), grid=make_grid(201, 8.0), modes=10).frame()


def test_criterion_1_two_by_two_closed_form(frame_2x2, criterion_line):
    f = frame_2x2
    s3 = math.sqrt(3.0)
    closed = np.array([[1j / s3, 2 / s3], [2 / s3, -1j / s3]])
    h = f.hamiltonian
    eta_eigs = np.linalg.eigvalsh(0.5 * (f.eta + f.eta.conj().T))
    checks = {
        "eigenvalues": float(np.max(np.abs(np.sort(f.values.real) - [0.0, s3])) + np.max(np.abs(f.values.imag))),
        "C": float(np.max(np.abs(f.c - closed))),
        "C^2-I": fro(f.c @ f.c - np.eye(2)),
        "[C,H]": fro(f.c @ h - h @ f.c),
        "eta-eta^H": fro(f.eta - f.eta.conj().T),
        "eta eigenvalues": float(np.max(np.abs(eta_eigs - [1 / s3, s3]))),
    }
    limits = {"eigenvalues": 1e-12}
    ok = all(v <= limits.get(k, 1e-10) for k, v in checks.items()) and eta_eigs[0] > 0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in checks.items())
    assert criterion_line(1, ok, detail)


def test_criterion_2_transpose_condition_implies_pseudo_hermiticity(frame_2x2, cubic_frame, criterion_line):
    parts, ok = [], True
    for name, f in (("2x2", frame_2x2), ("eps=1", cubic_frame)):
        good, worst_d1, worst_e2 = 0, 0.0, 0.0
        for seed in range(100):
            a = generate_observable(DEF1, f, seed, verify=False)
            d1 = def1_residual(a, f)
            e2 = eq2_residual(a, f).best
            worst_d1, worst_e2 = max(worst_d1, d1), max(worst_e2, e2)
            good += d1 <= TAU_ALG and e2 <= 10 * TAU_ALG
        ok &= good == 100
        parts.append(f"{name} {good}/100 (max def1 {worst_d1:.1e}, max eq2 {worst_e2:.1e})")
    assert criterion_line(2, ok, "; ".join(parts))


def _meets_requirements(audit, gram_limit):
    req_i = audit.max_imag <= TAU_REAL
    req_ii = (not audit.defective) and audit.completeness_deviation < 1 - TAU_DISC and audit.gram_deviation <= gram_limit
    return req_i, req_ii


def test_criterion_3_cpt_hermiticity_equals_requirements(frame_2x2, frame_eps0, frame_eps05, cubic_frame,
                                                          criterion_line):
    parts, ok = [], True
    frames = (("2x2", frame_2x2, 1e-8), ("eps=0", frame_eps0, 1e-6), ("eps=0.5", frame_eps05, 1e-6),
              ("eps=1", cubic_frame, 1e-6))
    for name, f, gram_limit in frames:
        rng = np.random.default_rng(2024)
        accepted, worst_gram = 0, 0.0
        for seed in range(100):
            audit = requirement_audit(generate_observable(DEF2, f, seed, verify=False), f)
            worst_gram = max(worst_gram, audit.gram_deviation)
            accepted += all(_meets_requirements(audit, gram_limit))
        rejected = drawn = 0
        while drawn < 100:
            a = rng.standard_normal((f.dim, f.dim)) + 1j * rng.standard_normal((f.dim, f.dim))
            if def2_residual(a, f) <= 1e-3:
                continue
            drawn += 1
            rejected += not all(_meets_requirements(requirement_audit(a, f), gram_limit))
        ok &= accepted == 100 and rejected == 100
        parts.append(f"{name} Def2 pass {accepted}/100 (max gram dev {worst_gram:.1e}), non-Def2 fail {rejected}/100")
    assert criterion_line(3, ok, "; ".join(parts))


def test_criterion_4_inner_products_coincide(frame_eps0, frame_eps05, cubic_frame, criterion_line):
    parts, ok = [], True
    for name, f in (("eps=0", frame_eps0), ("eps=0.5", frame_eps05), ("eps=1", cubic_frame)):
        rng = np.random.default_rng(4)
        worst = 0.0
        for _ in range(100):
            cu, cv = rng.standard_normal((2, f.modes_kept)) + 1j * rng.standard_normal((2, f.modes_kept))
            u, v = f.right @ cu, f.right @ cv
            dev = abs(inner_cpt(f, u, v) - inner_eta(f, u, v)) / (np.linalg.norm(u) * np.linalg.norm(v))
            worst = max(worst, dev)
        ok &= worst <= 1e-6
        parts.append(f"{name} max {worst:.1e}")
    assert criterion_line(4, ok, "; ".join(parts))


def test_criterion_5_shifted_square(criterion_line):
    outcomes = []
    for _ in range(2):
        sol = solve_model(ShiftedSquare())
        h, par = sol.hamiltonian.matrix, sol.par.matrix
        flags = symmetry_flags(h, par)
        try:
            frame = sol.frame()
            outcome = ("frame", frame.order_convention, frame.modes_kept)
            def1_status = INAPPLICABLE if not flags.symmetric else "applicable"
        except FrameError as exc:
            outcome = (type(exc).__name__, str(exc))
            report = classify_without_frame(h, par, h, "H", f"{type(exc).__name__}: {exc}")
            def1_status = report.def1_status
        outcomes.append((flags.pt_residual, flags.symmetric_residual, def1_status, outcome))
    pt_res, sym_res, def1_status, outcome = outcomes[0]
    deterministic = outcomes[0] == outcomes[1]
    accepted_outcome = outcome[0] in ("frame", "BrokenPhase")
    ok = pt_res <= 1e-9 and sym_res > 0.1 and def1_status == INAPPLICABLE and deterministic and accepted_outcome
    detail = (f"pt {pt_res:.1e}, symmetric {sym_res:.3f}, Def1 {def1_status}, deterministic {deterministic}, "
              f"frame outcome {outcome[0]}")
    if not accepted_outcome:
        detail += " (neither a positive frame nor BrokenPhase: neither P*C nor C*P is Hermitian for a non-symmetric H)"
    assert criterion_line(5, ok, detail)


def _corpus(f):
    grid = make_grid(f.dim, f.weight * (f.dim + 1) / 2)
    ops = build_operators(grid)
    x, p, kin, par, h = ops.X.matrix, ops.Mom.matrix, ops.Kin.matrix, ops.Par.matrix, f.hamiltonian
    rng = np.random.default_rng(5)
    corpus = [h, x, p, kin, par, x @ x, h @ h, h + x, 1j * h, x @ p,
              rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)]
    corpus += [generate_observable(DEF2, f, s, verify=False) for s in range(5)]
    corpus += [generate_observable(DEF1, f, s, verify=False) for s in range(4)]
    return corpus


def test_criterion_6_matrix_element_procedure(cubic_frame, criterion_line):
    f = cubic_frame
    audit = matrix_element_audit(f.hamiltonian, f)
    table = audit.table
    diag = np.diag(table)
    off = np.max(np.abs(table - np.diag(diag))) / np.max(np.abs(table))
    diag_err = float(np.max(np.abs(diag - f.values) / np.abs(f.values)))
    agree = sum(matrix_element_audit(a, f).passed == (def2_residual(a, f) <= TAU_DISC) for a in _corpus(f))
    ok = off <= 1e-6 and diag_err <= 1e-6 and agree == 20
    detail = f"off-diagonal {off:.1e}, diagonal vs eigenvalues {diag_err:.1e}, corpus agreement {agree}/20"
    assert criterion_line(6, ok, detail)


def test_criterion_7_hermitian_control(frame_eps0, oracles, criterion_line):
    f = frame_eps0
    pi = f.projector
    c_err = fro(f.c @ pi - f.par @ pi) / fro(f.par @ pi)
    eta_err = fro(f.eta @ pi - pi)
    levels = np.sort(f.values.real)[:5]
    target = np.array([1.0, 3.0, 5.0, 7.0, 9.0])
    rel = float(np.max(np.abs(levels - target) / target))
    fine = np.sort(np.array(oracles["lattice_eps0.0_n401_L8"])[:5, 0])
    rel_fine = float(np.max(np.abs(fine - target) / target))
    converging = rel_fine < rel / 3
    ok = c_err <= 1e-6 and eta_err <= 1e-6 and rel <= 1e-3
    detail = (f"|C-Par| {c_err:.1e}, |eta-I| {eta_err:.1e}, level error {rel:.2e} at N=201 "
              f"({rel_fine:.2e} at N=401, second-order convergence {converging})")
    assert criterion_line(7, ok, detail)


def test_criterion_8_determinism_and_formats(tmp_path, capsys, criterion_line):
    golden = [("spectrum", "spectrum_config.json", "spectrum.csv", "expected_spectrum.csv"),
              ("audit", "audit_config.json", "report.json", "expected_report.json"),
              ("phase-scan", "scan_config.json", "phase_scan.csv", "expected_phase_scan.csv")]
    matches = identical = 0
    for command, config, produced, expected in golden:
        runs = []
        for k in range(2):
            out = tmp_path / f"{command}{k}"
            assert main([command, "--config", str(GOLDEN / config), "--out", str(out)]) == 0
            runs.append((out / produced).read_bytes())
        identical += runs[0] == runs[1]
        matches += runs[0] == (GOLDEN / expected).read_bytes()

    bad_json = tmp_path / "bad.json"
    bad_json.write_text('{"model": {"type": "epsilon_family", "eps": 1.0}, "colour": 1}')
    shifted = tmp_path / "shifted.json"
    shifted.write_text(json.dumps({"model": {"type": "shifted_square"}, "operators": [{"builtin": "h"}]}))
    codes = (
        main(["spectrum", "--config", str(GOLDEN / "spectrum_config.json"), "--out", str(tmp_path / "c")]),
        main(["audit", "--config", str(shifted), "--out", str(tmp_path / "c")]),
        main(["spectrum", "--config", str(bad_json)]),
    )
    capsys.readouterr()
    ok = matches == 3 and identical == 3 and codes == (0, 1, 2)
    detail = f"golden {matches}/3, repeat byte-identical {identical}/3, exit codes {list(codes)} (expected [0, 1, 2])"
    assert criterion_line(8, ok, detail)
