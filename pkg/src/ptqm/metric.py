"""Construction of the C operator, the metric eta = P C and the two inner products.

On lattices only a handful of low, verified-real modes enter the frame; every
identity is then asserted against the oblique projector ``Pi = sum phi chi^H``
onto that kept span rather than against the full identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    BrokenPhase,
    DimensionMismatch,
    FrameInconsistent,
    MetricNotPositive,
    PhaseFixFailure,
)
from .linalg import (
    DEFAULT_TOLERANCES,
    DEFECT_THRESHOLD,
    EigenSystem,
    Tolerances,
    biorthonormalize,
    eig,
    fro,
)
from .models import DiscretizedOperator, Grid, build_hamiltonian, default_grid, is_lattice_model

__all__ = [
    "UNBROKEN",
    "BROKEN",
    "PARTIALLY_KEPT",
    "SpectrumClassification",
    "CPTFrame",
    "classify_spectrum",
    "construct_frame",
    "frame_residuals",
    "verify_frame",
    "inner_eta",
    "inner_cpt",
    "ModelSolution",
    "solve_model",
    "default_modes",
]

UNBROKEN = "Unbroken"
BROKEN = "Broken"
PARTIALLY_KEPT = "PartiallyKept"

LATTICE_MODES = 10
# two candidate eigenvalues closer than this (relative to |H|_F) flag an exceptional point
COALESCENCE = 1e-5


def default_modes(dim: int, lattice: bool) -> int:
    return min(LATTICE_MODES, dim) if lattice else dim


def _matrix(op) -> np.ndarray:
    return np.asarray(op.matrix if isinstance(op, DiscretizedOperator) else op, dtype=np.complex128)


@dataclass(frozen=True)
class SpectrumClassification:
    values: np.ndarray
    real: np.ndarray
    candidates: tuple
    kept: tuple
    phase: str
    near_exceptional: bool
    max_imag: float

    @property
    def kept_values(self) -> np.ndarray:
        return self.values[list(self.kept)]


def classify_spectrum(
    es: EigenSystem, tol: Tolerances = DEFAULT_TOLERANCES, m: Optional[int] = None
) -> SpectrumClassification:
    """Reality flags and kept-mode selection.

    The ``m`` modes of smallest ``|lambda|`` are the candidates (on a real
    spectrum this is the smallest ``|Re lambda|``; the modulus also keeps
    boundary artifacts with huge imaginary parts out of the low modes). The phase is
    Broken when any candidate is non-real; otherwise the candidates that carry
    residual and overlap certificates are kept (PartiallyKept if some do not).
    """
    values = es.values
    n = len(values)
    m = n if m is None else int(m)
    if m < 1:
        raise ValueError("at least one mode must be requested")
    rho = es.spectral_radius
    real = np.abs(values.imag) <= tol.real * rho
    order = np.lexsort((values.imag, values.real, np.abs(values)))
    candidates = tuple(int(k) for k in order[: min(m, n)])

    overlaps = es.overlaps()
    certified = es.certified & (overlaps >= DEFECT_THRESHOLD)
    cand = np.array(candidates)
    near_ep = bool(np.any(overlaps[cand] < DEFECT_THRESHOLD))
    if len(cand) > 1:
        sep = np.abs(values[cand][:, None] - values[cand][None, :])
        sep[np.diag_indices(len(cand))] = np.inf
        near_ep = near_ep or bool(sep.min() <= COALESCENCE * es.scale)

    if not np.all(real[cand]):
        phase = BROKEN
    elif np.all(certified[cand]):
        phase = UNBROKEN
    else:
        phase = PARTIALLY_KEPT
    kept = tuple(sorted(k for k in candidates if real[k] and certified[k]))
    max_imag = float(np.max(np.abs(values[cand].imag)) / rho) if rho > 0 else 0.0
    return SpectrumClassification(
        values=values,
        real=real,
        candidates=candidates,
        kept=kept,
        phase=phase,
        near_exceptional=near_ep,
        max_imag=max_imag,
    )


def _frozen(a) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CPTFrame:
    """The constructed triple (P, C, eta) on the kept span.

    ``right``/``left`` hold the kept eigenvectors after phase fixing and
    PT-norm scaling, so ``Par @ conj(right) == right`` and
    ``left^H @ right == I``.
    """

    hamiltonian: np.ndarray
    par: np.ndarray
    c: np.ndarray
    eta: np.ndarray
    eta_inv: np.ndarray
    signs: np.ndarray
    projector: np.ndarray
    right: np.ndarray
    left: np.ndarray
    values: np.ndarray
    weight: float = 1.0
    order_convention: str = "PC"
    lattice: bool = False
    tol: Tolerances = DEFAULT_TOLERANCES
    residuals: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in (
            "hamiltonian", "par", "c", "eta", "eta_inv", "signs",
            "projector", "right", "left", "values",
        ):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    @property
    def modes_kept(self) -> int:
        return self.right.shape[1]

    @property
    def threshold(self) -> float:
        """Verdict tolerance: algebraic for exact matrix frames, discretization on lattices."""
        return self.tol.disc if self.lattice else self.tol.alg

    def apply_c(self, v) -> np.ndarray:
        """``C v`` evaluated as ``phi (s * (chi^H v))``.

        Same operator as the dense ``c``, but rounding stays inside the kept
        span; on strongly non-normal lattices the dense product loses
        roughly ``log10 |C|`` digits in subsequent PT pairings.
        """
        coords = self.left.conj().T @ v
        signs = self.signs.reshape((-1,) + (1,) * (coords.ndim - 1))
        return self.right @ (signs * coords)

    def apply_eta(self, v) -> np.ndarray:
        if self.order_convention == "PC":
            return self.par @ self.apply_c(v)
        return self.apply_c(self.par @ v)

    def apply_eta_inv(self, v) -> np.ndarray:
        if self.order_convention == "PC":
            return self.apply_c(self.par @ v)
        return self.par @ self.apply_c(v)

    def apply_theta(self, v) -> np.ndarray:
        """Linear part of the CPT map: ``K v = C Par v``."""
        return self.apply_c(self.par @ v)

    @property
    def theta_matrix(self) -> np.ndarray:
        """Linear part ``K = C Par`` of the antilinear CPT map ``u -> K conj(u)``."""
        return self.c @ self.par

    @classmethod
    def trivial(cls, dim: int, tol: Tolerances = DEFAULT_TOLERANCES) -> "CPTFrame":
        """Frame with C = P = eta = I: the ordinary Hilbert space of a toy model."""
        eye = np.eye(dim, dtype=np.complex128)
        return cls(
            hamiltonian=np.zeros((dim, dim), dtype=np.complex128),
            par=eye, c=eye, eta=eye, eta_inv=eye,
            signs=np.ones(dim, dtype=int), projector=eye, right=eye, left=eye,
            values=np.zeros(dim, dtype=np.complex128), tol=tol,
        )


def _phase_fix(v: np.ndarray, par: np.ndarray, tol: Tolerances, what: str) -> np.ndarray:
    j = int(np.argmax(np.abs(v)))
    ratio = (par @ v.conj())[j] / v[j]
    v = v * np.exp(0.5j * np.angle(ratio))
    mismatch = np.linalg.norm(par @ v.conj() - v) / np.linalg.norm(v)
    if mismatch > tol.disc:
        raise PhaseFixFailure(
            f"{what}: no phase makes the vector PT-invariant (mismatch {mismatch:.3e})"
        )
    # project onto the PT-invariant set; removes the rounding left by the phase fit
    return 0.5 * (v + par @ v.conj())


def _metric_check(eta: np.ndarray, phi: np.ndarray):
    herm = fro(eta - eta.conj().T) / fro(eta)
    gram = phi.conj().T @ (0.5 * (eta + eta.conj().T)) @ phi
    lowest = float(np.linalg.eigvalsh(0.5 * (gram + gram.conj().T))[0])
    return herm, lowest


def _invariants(h, par, c, eta, phi, chi) -> dict:
    proj = phi @ chi.conj().T
    hphi = h @ phi
    comm = (c @ hphi - h @ (c @ phi)) @ chi.conj().T
    herm, lowest = _metric_check(eta, phi)
    return {
        "c_squared": fro(c @ c - proj) / fro(proj),
        "commutes_h": fro(comm) / max(fro(c) * fro(h), np.finfo(float).tiny),
        "pt_commutes": fro(par @ c.conj() @ par - c) / fro(c),
        "eta_hermitian": herm,
        "eta_min_eigenvalue": lowest,
        "pseudo_hermitian": fro(h.conj().T @ eta - eta @ h)
        / max(fro(h) * fro(eta), np.finfo(float).tiny),
    }


def _failed(res: dict, tol: Tolerances) -> list:
    bad = [k for k in ("c_squared", "commutes_h", "pt_commutes", "eta_hermitian",
                       "pseudo_hermitian") if not res[k] <= tol.disc]
    if not res["eta_min_eigenvalue"] > 0:
        bad.append("eta_min_eigenvalue")
    return bad


def construct_frame(
    h,
    par,
    es: EigenSystem,
    cls: SpectrumClassification,
    tol: Tolerances = DEFAULT_TOLERANCES,
    weight: float = 1.0,
    lattice: Optional[bool] = None,
) -> CPTFrame:
    """Build C, eta and eta^-1 from the kept modes of ``es``.

    ``es`` is the eigensystem that ``cls`` classified; kept indices refer to it.
    """
    h = _matrix(h)
    par = _matrix(par)
    if cls.phase == BROKEN:
        bad = [complex(cls.values[k]) for k in cls.candidates if not cls.real[k]]
        raise BrokenPhase(
            f"PT symmetry is broken: {len(bad)} candidate eigenvalues are complex, "
            f"e.g. {bad[0]:.6g}"
        )
    if not cls.kept:
        raise BrokenPhase("no certified real modes to build a frame from")
    if lattice is None:
        lattice = weight != 1.0 or h.shape[0] > 2

    kept = biorthonormalize(es.restrict(cls.kept), tol)
    phis, chis, signs = [], [], []
    for k in range(len(kept)):
        phi = _phase_fix(kept.right[:, k], par, tol, f"mode {k} right")
        chi = _phase_fix(kept.left[:, k], par, tol, f"mode {k} left")
        chi = chi / np.conj(np.vdot(chi, phi))
        pt_norm = weight * ((par @ phi.conj()) @ phi)
        if abs(pt_norm) < DEFECT_THRESHOLD * weight * np.vdot(phi, phi).real:
            raise PhaseFixFailure(
                f"mode {k} (lambda={kept.values[k]:.6g}) has vanishing PT norm; "
                "exceptional point"
            )
        scale = np.sqrt(abs(pt_norm))
        phis.append(phi / scale)
        chis.append(chi * scale)
        signs.append(1 if pt_norm.real > 0 else -1)

    phi = np.column_stack(phis)
    chi = np.column_stack(chis)
    s = np.array(signs, dtype=int)
    c = (phi * s) @ chi.conj().T
    proj = phi @ chi.conj().T

    pc, cp = par @ c, c @ par
    herm_pc, low_pc = _metric_check(pc, phi)
    herm_cp, low_cp = _metric_check(cp, phi)
    if herm_pc <= tol.disc and low_pc > 0:
        order, eta, eta_inv = "PC", pc, cp
    elif herm_cp <= tol.disc and low_cp > 0:
        order, eta, eta_inv = "CP", cp, pc
    else:
        raise MetricNotPositive(
            "neither P*C nor C*P is a Hermitian positive metric on the kept span "
            f"(hermiticity PC={herm_pc:.3e}, CP={herm_cp:.3e}; lowest eigenvalue of the "
            f"symmetrized metric PC={low_pc:.6g}, CP={low_cp:.6g})",
            min_eigenvalue=low_pc,
            hermiticity={"PC": herm_pc, "CP": herm_cp},
        )

    res = _invariants(h, par, c, eta, phi, chi)
    bad = _failed(res, tol)
    if bad:
        detail = ", ".join(f"{k}={res[k]:.3e}" for k in bad)
        raise FrameInconsistent(f"frame invariants violated: {detail}")
    return CPTFrame(
        hamiltonian=h, par=par, c=c, eta=eta, eta_inv=eta_inv, signs=s,
        projector=proj, right=phi, left=chi, values=kept.values, weight=float(weight),
        order_convention=order, lattice=bool(lattice), tol=tol, residuals=res,
    )


def frame_residuals(frame: CPTFrame) -> dict:
    return _invariants(frame.hamiltonian, frame.par, frame.c, frame.eta, frame.right, frame.left)


def verify_frame(frame: CPTFrame) -> dict:
    """Recompute every invariant; raise :class:`FrameInconsistent` on failure."""
    n, m = frame.dim, frame.modes_kept
    shapes = {
        "hamiltonian": (n, n), "par": (n, n), "c": (n, n), "eta": (n, n), "eta_inv": (n, n),
        "projector": (n, n), "right": (n, m), "left": (n, m), "signs": (m,), "values": (m,),
    }
    for name, shape in shapes.items():
        if getattr(frame, name).shape != shape:
            raise FrameInconsistent(f"{name} has shape {getattr(frame, name).shape}, expected {shape}")
    if not np.all(np.isin(frame.signs, (-1, 1))):
        raise FrameInconsistent("signs must be +1 or -1")
    c = (frame.right * frame.signs) @ frame.left.conj().T
    if fro(c - frame.c) > frame.tol.disc * fro(frame.c):
        raise FrameInconsistent("C does not match its spectral decomposition")
    first, second = (frame.par, frame.c) if frame.order_convention == "PC" else (frame.c, frame.par)
    if fro(first @ second - frame.eta) > frame.tol.alg * fro(frame.eta):
        raise FrameInconsistent(f"eta is not {frame.order_convention}")
    if fro(second @ first - frame.eta_inv) > frame.tol.alg * fro(frame.eta_inv):
        raise FrameInconsistent("eta_inv does not match the recorded ordering")
    res = frame_residuals(frame)
    bad = _failed(res, frame.tol)
    if bad:
        raise FrameInconsistent("frame invariants violated: " + ", ".join(
            f"{k}={res[k]:.3e}" for k in bad))
    return res


def _check_vectors(frame: CPTFrame, u, v):
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    if u.shape != (frame.dim,) or v.shape != (frame.dim,):
        raise DimensionMismatch(f"vectors {u.shape}, {v.shape} vs frame dimension {frame.dim}")
    return u, v


def inner_eta(frame: CPTFrame, u, v) -> complex:
    """``<u, v>_eta = dx * u^H eta v``."""
    u, v = _check_vectors(frame, u, v)
    return complex(frame.weight * np.vdot(u, frame.apply_eta(v)))


def inner_cpt(frame: CPTFrame, u, v) -> complex:
    """CPT product: the CPT image ``C Par conj(u)`` paired with ``v`` without conjugation."""
    u, v = _check_vectors(frame, u, v)
    image = frame.apply_theta(u.conj())
    return complex(frame.weight * (image @ v))


@dataclass(frozen=True)
class ModelSolution:
    hamiltonian: DiscretizedOperator
    par: DiscretizedOperator
    eigensystem: EigenSystem
    classification: SpectrumClassification
    modes: int

    @property
    def grid(self) -> Optional[Grid]:
        return self.hamiltonian.grid

    def frame(self, tol: Tolerances = DEFAULT_TOLERANCES) -> CPTFrame:
        return construct_frame(
            self.hamiltonian, self.par, self.eigensystem, self.classification, tol,
            weight=self.hamiltonian.weight, lattice=self.grid is not None,
        )


def solve_model(spec, grid: Optional[Grid] = None, modes: Optional[int] = None,
                tol: Tolerances = DEFAULT_TOLERANCES) -> ModelSolution:
    """Build the Hamiltonian of ``spec``, diagonalize it and classify the spectrum."""
    if grid is None and is_lattice_model(spec):
        grid = default_grid(spec)
    h, par = build_hamiltonian(spec, grid)
    es = eig(h.matrix, tol, strict=grid is None)
    m = default_modes(h.matrix.shape[0], grid is not None) if modes is None else int(modes)
    cls = classify_spectrum(es, tol, m)
    return ModelSolution(h, par, es, cls, m)
