"""Observable criteria, the measurement-theory audit and test-operator generators.

Three criteria are compared on a :class:`~ptqm.metric.CPTFrame`:

* transpose condition: ``A^T = CPT A CPT`` with the antilinear map
  ``u -> K conj(u)``, ``K = C Par``;
* pseudo-Hermiticity ``A^dagger = eta^-1 A eta`` (both orderings of eta);
* Hermiticity with respect to the CPT / eta inner product.

All residuals are relative and invariant under ``A -> cA``. Identities that
end in the kept-span projector are evaluated as ``(R @ phi) @ chi^H`` so the
ill-conditioned projector is never formed inside a product chain.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    AmbiguousPairing,
    DefectiveSpectrum,
    DimensionMismatch,
    EigFailure,
    FrameInconsistent,
)
from .linalg import DEFAULT_TOLERANCES, Tolerances, as_cmatrix, biorthonormalize, eig, fro
from .metric import CPTFrame, inner_cpt

__all__ = [
    "DEF1",
    "DEF2",
    "DEF1_AND_DEF2",
    "DEF2_ONLY",
    "NOT_OBSERVABLE",
    "INAPPLICABLE",
    "SymmetryFlags",
    "Eq2Residuals",
    "RequirementAudit",
    "MatrixElementAudit",
    "ObservableReport",
    "symmetry_flags",
    "def1_residual",
    "eq2_residual",
    "def2_residual",
    "def2_residual_sampled",
    "compress",
    "restrict",
    "requirement_audit",
    "matrix_element_audit",
    "generate_observable",
    "random_hermitian",
    "classify_operator",
    "classify_without_frame",
]

DEF1 = "Def1"
DEF2 = "Def2"

DEF1_AND_DEF2 = "Def1AndDef2"
DEF2_ONLY = "Def2Only"
NOT_OBSERVABLE = "NotObservable"
INAPPLICABLE = "Inapplicable"

_TINY = np.finfo(float).tiny


def _operand(a, frame: CPTFrame) -> np.ndarray:
    a = as_cmatrix(a)
    if a.shape != (frame.dim, frame.dim):
        raise DimensionMismatch(f"operator {a.shape} vs frame dimension {frame.dim}")
    return a


def _on_span(r: np.ndarray, frame: CPTFrame) -> float:
    """Frobenius norm of ``R Pi`` given ``r = R @ phi``."""
    return fro(r @ frame.left.conj().T)


@dataclass(frozen=True)
class SymmetryFlags:
    symmetric: bool
    symmetric_residual: float
    pt_symmetric: bool
    pt_residual: float


def symmetry_flags(a, par, tol: Tolerances = DEFAULT_TOLERANCES) -> SymmetryFlags:
    a = as_cmatrix(a)
    par = as_cmatrix(par)
    if a.shape != par.shape:
        raise DimensionMismatch(f"{a.shape} vs {par.shape}")
    scale = max(fro(a), _TINY)
    sym = fro(a.T - a) / scale
    pt = fro(par @ a.conj() @ par - a) / scale
    return SymmetryFlags(sym <= tol.alg, sym, pt <= tol.alg, pt)


def _theta_gate(frame: CPTFrame) -> np.ndarray:
    k = frame.theta_matrix
    # Theta^2 u = K conj(K) u must reproduce the kept-span projector
    dev = fro(k @ k.conj() - frame.projector) / max(fro(frame.projector), _TINY)
    if dev > frame.tol.disc:
        raise FrameInconsistent(f"CPT map is not an involution on the kept span ({dev:.3e})")
    return k


def compress(a, frame: CPTFrame) -> np.ndarray:
    """Coordinates ``chi^H A phi`` of ``Pi A Pi`` in the kept eigenbasis."""
    a = _operand(a, frame)
    return frame.left.conj().T @ (a @ frame.right)


def restrict(a, frame: CPTFrame) -> np.ndarray:
    """The compression ``Pi A Pi``; the identity on full-rank frames."""
    return frame.right @ compress(a, frame) @ frame.left.conj().T


class _Restricted:
    """``Pi A Pi = phi a chi^H`` applied factor by factor."""

    def __init__(self, a, frame: CPTFrame):
        self.phi, self.chi = frame.right, frame.left
        self.a = compress(a, frame)
        self.norm = fro(self.phi @ self.a @ self.chi.conj().T)

    def __matmul__(self, y):
        return self.phi @ (self.a @ (self.chi.conj().T @ y))

    def t(self, y):
        return self.chi.conj() @ (self.a.T @ (self.phi.T @ y))

    def h(self, y):
        return self.chi @ (self.a.conj().T @ (self.phi.conj().T @ y))

    def conj(self, y):
        return self.phi.conj() @ (self.a.conj() @ (self.chi.T @ y))


def def1_residual(a, frame: CPTFrame) -> float:
    """``|A^T Pi - K conj(A) conj(K) Pi|_F / |A|_F`` for ``A`` restricted to the kept span."""
    _theta_gate(frame)
    av = _Restricted(a, frame)
    phi = frame.right
    # conj(K) y = conj(K conj(y))
    rhs = frame.apply_theta(av.conj(frame.apply_theta(phi.conj()).conj()))
    return _on_span(av.t(phi) - rhs, frame) / max(av.norm, _TINY)


@dataclass(frozen=True)
class Eq2Residuals:
    pc: float
    cp: float

    @property
    def best(self) -> float:
        return min(self.pc, self.cp)


def eq2_residual(a, frame: CPTFrame) -> Eq2Residuals:
    """Pseudo-Hermiticity residuals for eta = P C (``pc``) and eta = C P (``cp``).

    ``A`` is restricted to the kept span first; only there do the trailing
    projectors make the identity exact on a lattice frame.
    """
    av = _Restricted(a, frame)
    par, phi = frame.par, frame.right

    def pc_eta(y):
        return par @ frame.apply_c(y)

    def cp_eta(y):
        return frame.apply_c(par @ y)

    lhs = av.h(phi)
    scale = max(av.norm, _TINY)
    pc = _on_span(lhs - cp_eta(av @ pc_eta(phi)), frame) / scale
    cp = _on_span(lhs - pc_eta(av @ cp_eta(phi)), frame) / scale
    return Eq2Residuals(pc, cp)


def _eta_basis(frame: CPTFrame) -> np.ndarray:
    """Basis of the kept span that is orthonormal in the eta inner product."""
    phi = frame.right
    gram = phi.conj().T @ frame.apply_eta(phi)
    gram = 0.5 * (gram + gram.conj().T)
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise FrameInconsistent("eta is not positive on the kept span") from exc
    return phi @ np.linalg.inv(chol).conj().T


def def2_residual(a, frame: CPTFrame) -> float:
    """Hermiticity of the form ``(u, v) -> <u, A v>_eta`` on the kept span.

    With an eta-orthonormal basis ``V`` of the span and ``F = V^H eta A V``,
    returns ``|F - F^H|_F / |F|_F``: the relative anti-Hermitian part of
    ``A`` measured in the physical inner product. On a full-rank frame this
    vanishes exactly when ``eta A = (eta A)^H``.
    """
    a = _operand(a, frame)
    v = _eta_basis(frame)
    form = v.conj().T @ frame.apply_eta(a @ v)
    den = fro(form)
    if den <= _TINY:
        return 0.0
    return fro(form - form.conj().T) / den


def def2_residual_sampled(a, frame: CPTFrame) -> float:
    """Cross-check of :func:`def2_residual` through CPT products of kept eigenvectors."""
    a = _operand(a, frame)
    m = frame.modes_kept
    phi = [frame.right[:, k] for k in range(m)]
    aphi = [a @ v for v in phi]
    lhs = np.array([[inner_cpt(frame, phi[i], aphi[j]) for j in range(m)] for i in range(m)])
    rhs = np.array([[inner_cpt(frame, aphi[i], phi[j]) for j in range(m)] for i in range(m)])
    scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), _TINY)
    return float(np.max(np.abs(lhs - rhs)) / scale)


@dataclass(frozen=True)
class RequirementAudit:
    requirement_i: bool
    max_imag: float
    requirement_ii: bool
    gram_deviation: float
    completeness_deviation: float
    defective: bool
    eigenvalues: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def passed(self) -> bool:
        return self.requirement_i and self.requirement_ii


def _eta_orthonormalize(vecs: np.ndarray, gram: np.ndarray, values: np.ndarray, radius: float):
    # inside a degenerate eigenspace any basis is an eigenbasis; pick an eta-orthogonal one
    n = len(values)
    done = np.zeros(n, dtype=bool)
    out = vecs.copy()
    for i in range(n):
        if done[i]:
            continue
        group = [j for j in range(n) if not done[j] and abs(values[j] - values[i]) <= 1e-8 * max(radius, 1.0)]
        done[group] = True
        if len(group) < 2:
            continue
        g = gram[np.ix_(group, group)]
        g = 0.5 * (g + g.conj().T)
        try:
            chol = np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            continue
        out[:, group] = out[:, group] @ np.linalg.inv(chol).conj().T
    return out


def requirement_audit(a, frame: CPTFrame, tol: Optional[Tolerances] = None) -> RequirementAudit:
    """Check (i) real spectrum and (ii) a complete eta-orthogonal eigenbasis on the kept span.

    The restricted operator is represented in an eta-orthonormal basis ``V``
    of the span, where its matrix is ``V^H eta A V``; eigenvectors ``w`` lift
    to ``V w`` and their eta Gram matrix is ``w^H (V^H eta V) w``.
    """
    tol = tol or frame.tol
    a = _operand(a, frame)
    v = _eta_basis(frame)
    restricted = v.conj().T @ frame.apply_eta(a @ v)
    try:
        es = eig(restricted, tol, strict=False)
    except EigFailure:
        return RequirementAudit(False, float("inf"), False, float("inf"), float("inf"), True)

    values = es.values
    radius = es.spectral_radius
    max_imag = float(np.max(np.abs(values.imag)) / radius) if radius > 0 else 0.0
    req_i = bool(np.max(np.abs(values.imag)) <= tol.real * radius)

    try:
        es = biorthonormalize(es, tol)
    except (DefectiveSpectrum, AmbiguousPairing, EigFailure):
        return RequirementAudit(req_i, max_imag, False, float("inf"), float("inf"), True, values)

    w = es.right
    completeness = float(np.linalg.svd(w, compute_uv=False)[-1])
    metric = frame.weight * (v.conj().T @ frame.apply_eta(v))
    gram = w.conj().T @ metric @ w
    w = _eta_orthonormalize(w, gram, values, radius)
    gram = w.conj().T @ metric @ w
    diag = np.real(np.diag(gram))
    if np.any(diag <= 0):
        dev = float("inf")
    else:
        off = np.abs(gram) / np.sqrt(np.outer(diag, diag))
        np.fill_diagonal(off, 0.0)
        dev = float(off.max()) if off.size else 0.0
    thr = tol.disc if frame.lattice else tol.alg
    req_ii = bool(completeness > tol.disc and dev <= thr)
    return RequirementAudit(req_i, max_imag, req_ii, dev, 1.0 - completeness, False, values)


@dataclass(frozen=True)
class MatrixElementAudit:
    passed: bool
    max_violation: float
    table: np.ndarray = field(repr=False, compare=False)

    @property
    def relative_violation(self) -> float:
        scale = float(np.max(np.abs(self.table))) if self.table.size else 0.0
        return self.max_violation / scale if scale > 0 else 0.0


def matrix_element_audit(a, frame: CPTFrame, tol: Optional[Tolerances] = None) -> MatrixElementAudit:
    """Matrix elements ``A_mn = <phi_m | A phi_n>_CPT`` and the test ``conj(A_mn) = A_nm``."""
    tol = tol or frame.tol
    a = _operand(a, frame)
    m = frame.modes_kept
    if m < 2:
        raise ValueError("the matrix-element test needs at least two kept modes")
    phi = frame.right.copy()
    for k in range(m):
        norm = inner_cpt(frame, phi[:, k], phi[:, k])
        phi[:, k] /= np.sqrt(norm)
    images = frame.apply_theta(phi.conj())
    table = frame.weight * (images.T @ (a @ phi))
    violation = float(np.max(np.abs(table.conj() - table.T)))
    passed = violation <= tol.disc * float(np.max(np.abs(table)))
    return MatrixElementAudit(bool(passed), violation, table)


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (g + g.conj().T)


def _def1_factors(frame: CPTFrame):
    # F(M) = (K conj(M) conj(K))^T = K^H M^H K^T; for M = phi m chi^H this is
    # (K^H chi) m^H (phi^H K^T), which never forms products of two large operators
    # K^H y = Par C^H y with C^H = chi s phi^H
    signs = frame.signs[:, None]
    c_h_chi = frame.left @ (signs * (frame.right.conj().T @ frame.left))
    return frame.par @ c_h_chi, frame.apply_theta(frame.right.conj()).T


def generate_observable(kind: str, frame: CPTFrame, seed, verify: bool = True) -> np.ndarray:
    """Seeded random operator satisfying one of the two observable definitions.

    ``Def2``: ``eta^-1 B`` for a Gaussian Hermitian ``B``. ``Def1``: the average
    ``(M + F(M)) / 2`` of a Gaussian complex ``M`` compressed to the kept span,
    where ``F(M) = (K conj(M) conj(K))^T`` is the conjugate-linear involution
    whose fixed points solve the transpose condition.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts; equal
    seeds give bit-identical matrices. With ``verify`` the result is checked
    against the frame's verdict threshold (algebraic on exact frames,
    discretization-level on lattices) and :class:`FrameInconsistent` is raised
    on failure.
    """
    rng = np.random.default_rng(seed)
    n = frame.dim
    if kind == DEF2:
        a = frame.apply_eta_inv(random_hermitian(n, rng))
        if verify:
            res = def2_residual(a, frame)
            if res > frame.threshold:
                raise FrameInconsistent(f"generated Def2 operator has residual {res:.3e}")
        return a
    if kind != DEF1:
        raise ValueError(f"unknown observable kind {kind!r}")
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    coords = frame.left.conj().T @ m @ frame.right
    lf, rf = _def1_factors(frame)
    image = lf @ coords.conj().T @ rf
    a = 0.5 * (frame.right @ coords @ frame.left.conj().T + image)
    if verify:
        # F restricted to kept-span coordinates: m -> (chi^H lf) m^H (rf phi)
        lc, rc = frame.left.conj().T @ lf, rf @ frame.right
        twice = lc @ (lc @ coords.conj().T @ rc).conj().T @ rc
        dev = fro(twice - coords) / max(fro(coords), _TINY)
        if dev > frame.threshold:
            raise FrameInconsistent(f"CPT transpose map is not an involution ({dev:.3e})")
        res = def1_residual(a, frame)
        if res > frame.threshold:
            raise FrameInconsistent(f"generated Def1 operator has residual {res:.3e}")
    return a


@dataclass(frozen=True)
class ObservableReport:
    label: str
    dim: int
    symmetric: bool
    symmetric_residual: float
    pt_symmetric: bool
    pt_residual: float
    hamiltonian_symmetric: bool
    def1_status: str
    def1_residual: Optional[float]
    eq2_residual_pc: Optional[float]
    eq2_residual_cp: Optional[float]
    def2_residual: Optional[float]
    requirement_i: Optional[dict]
    requirement_ii: Optional[dict]
    matrix_element: Optional[dict]
    verdict: str
    threshold: Optional[float]
    order_convention: Optional[str]
    notes: tuple = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["notes"] = list(self.notes)
        return d


def classify_operator(a, frame: CPTFrame, label: str = "A",
                      tol: Optional[Tolerances] = None) -> ObservableReport:
    tol = tol or frame.tol
    a = _operand(a, frame)
    flags = symmetry_flags(a, frame.par, tol)
    h_symmetric = symmetry_flags(frame.hamiltonian, frame.par, tol).symmetric
    thr = frame.threshold

    d1 = def1_residual(a, frame)
    e2 = eq2_residual(a, frame)
    d2 = def2_residual(a, frame)
    req = requirement_audit(a, frame, tol)
    notes = []
    mel = None
    if frame.modes_kept >= 2:
        audit = matrix_element_audit(a, frame, tol)
        mel = {"pass": audit.passed, "max_violation": audit.max_violation,
               "relative_violation": audit.relative_violation}

    def2_ok = d2 <= thr
    if not h_symmetric:
        def1_status = INAPPLICABLE
        notes.append("Hamiltonian is not symmetric; the transpose condition is outside its scope")
    else:
        def1_status = "pass" if d1 <= thr else "fail"

    if def2_ok and def1_status == "pass":
        verdict = DEF1_AND_DEF2
    elif def2_ok:
        verdict = DEF2_ONLY
    else:
        verdict = NOT_OBSERVABLE

    return ObservableReport(
        label=label, dim=frame.dim,
        symmetric=flags.symmetric, symmetric_residual=flags.symmetric_residual,
        pt_symmetric=flags.pt_symmetric, pt_residual=flags.pt_residual,
        hamiltonian_symmetric=h_symmetric,
        def1_status=def1_status, def1_residual=d1,
        eq2_residual_pc=e2.pc, eq2_residual_cp=e2.cp, def2_residual=d2,
        requirement_i={"pass": req.requirement_i, "max_imag": req.max_imag},
        requirement_ii={"pass": req.requirement_ii, "gram_deviation": req.gram_deviation,
                        "completeness_deviation": req.completeness_deviation,
                        "defective": req.defective},
        matrix_element=mel, verdict=verdict, threshold=thr,
        order_convention=frame.order_convention, notes=tuple(notes),
    )


def classify_without_frame(a, par, hamiltonian, label: str, reason: str,
                           tol: Tolerances = DEFAULT_TOLERANCES) -> ObservableReport:
    """Partial report when no CPT frame exists (broken phase or no positive metric).

    ``a`` may be ``None`` for operators that can only be generated from a frame.
    """
    h_symmetric = symmetry_flags(hamiltonian, par, tol).symmetric
    notes = [f"no CPT frame: {reason}"]
    if a is None:
        flags = SymmetryFlags(False, float("nan"), False, float("nan"))
        notes.append("operator is generated from a frame and could not be built")
        dim = as_cmatrix(par).shape[0]
    else:
        flags = symmetry_flags(a, par, tol)
        dim = as_cmatrix(a).shape[0]
    return ObservableReport(
        label=label, dim=dim,
        symmetric=flags.symmetric, symmetric_residual=flags.symmetric_residual,
        pt_symmetric=flags.pt_symmetric, pt_residual=flags.pt_residual,
        hamiltonian_symmetric=h_symmetric,
        def1_status=INAPPLICABLE if not h_symmetric else "unavailable",
        def1_residual=None, eq2_residual_pc=None, eq2_residual_cp=None, def2_residual=None,
        requirement_i=None, requirement_ii=None, matrix_element=None,
        verdict=INAPPLICABLE if not h_symmetric else NOT_OBSERVABLE,
        threshold=None, order_convention=None,
        notes=tuple(notes),
    )
