"""Dense complex operator algebra and biorthogonal eigendecomposition.

Operators are plain ``numpy`` arrays of dtype ``complex128``; :func:`as_cmatrix`
is the single entry point that validates shape and finiteness.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import AmbiguousPairing, DefectiveSpectrum, DimensionMismatch, EigFailure

__all__ = [
    "Tolerances",
    "DEFAULT_TOLERANCES",
    "EigenSystem",
    "as_cmatrix",
    "fro",
    "transpose",
    "adjoint",
    "commutator_norm",
    "eig",
    "biorthonormalize",
    "is_positive_definite",
]

# |chi^H phi| below this fraction of |chi||phi| is treated as a Jordan block
DEFECT_THRESHOLD = 1e-12


@dataclass(frozen=True)
class Tolerances:
    res: float = 1e-10
    alg: float = 1e-9
    real: float = 1e-8
    disc: float = 1e-6

    def __post_init__(self):
        for name in ("res", "alg", "real", "disc"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"tolerance {name} must be positive, got {value!r}")
        if not self.alg < self.disc:
            raise ValueError("algebraic tolerance must be below the discretization tolerance")


DEFAULT_TOLERANCES = Tolerances()


def as_cmatrix(a) -> np.ndarray:
    """Return ``a`` as a square, finite complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def fro(a) -> float:
    return float(np.linalg.norm(a))


def transpose(a) -> np.ndarray:
    return as_cmatrix(a).T.copy()


def adjoint(a) -> np.ndarray:
    return as_cmatrix(a).conj().T.copy()


def commutator_norm(a, b) -> float:
    """Relative commutator size ``|AB - BA|_F / max(1, |A|_F |B|_F)``."""
    a, b = as_cmatrix(a), as_cmatrix(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return fro(a @ b - b @ a) / max(1.0, fro(a) * fro(b))


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues with paired right (``right[:, k]``) and left eigenvectors.

    Left vectors satisfy ``A^H chi_k = conj(lambda_k) chi_k``. Before
    :func:`biorthonormalize` both sets have unit 2-norm; afterwards the left
    vectors are rescaled so that ``chi_k^H phi_k = 1``.
    """

    values: np.ndarray
    right: np.ndarray
    left: np.ndarray
    residual_right: np.ndarray
    residual_left: np.ndarray
    scale: float
    paired: np.ndarray = None
    tol: "Tolerances" = None
    biortho: bool = False
    cond_estimate: float = float("nan")

    def __post_init__(self):
        if self.paired is None:
            object.__setattr__(self, "paired", np.ones(len(self.values), dtype=bool))
        if self.tol is None:
            object.__setattr__(self, "tol", DEFAULT_TOLERANCES)

    @property
    def dim(self) -> int:
        return self.right.shape[0]

    @property
    def certified(self) -> np.ndarray:
        """Modes with an unambiguous left partner and both residuals within bound."""
        bound = self.tol.res * max(self.scale, np.finfo(float).tiny)
        return self.paired & (self.residual_right <= bound) & (self.residual_left <= bound)

    def check_certified(self):
        bad = np.flatnonzero(~self.paired)
        if bad.size:
            k = int(bad[0])
            raise AmbiguousPairing(
                f"left and right spectra cannot be matched near lambda={self.values[k]:.6g}"
            )
        bad = np.flatnonzero(~self.certified)
        if bad.size:
            k = int(bad[0])
            worst = max(self.residual_right[k], self.residual_left[k])
            raise EigFailure(
                f"eigen residual {worst:.3e} at lambda={self.values[k]:.6g} exceeds "
                f"{self.tol.res * self.scale:.3e}"
            )

    def __len__(self) -> int:
        return len(self.values)

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0

    def overlaps(self) -> np.ndarray:
        """Per-mode ``|chi^H phi| / (|chi| |phi|)``; the inverse eigenvalue condition number."""
        num = np.abs(np.sum(self.left.conj() * self.right, axis=0))
        den = np.linalg.norm(self.left, axis=0) * np.linalg.norm(self.right, axis=0)
        return num / den

    def biortho_deviation(self) -> float:
        """``max |chi_m^H phi_n - delta_mn|`` over the modes held by this system."""
        gram = self.left.conj().T @ self.right
        return float(np.max(np.abs(gram - np.eye(len(self.values)))))

    def restrict(self, modes) -> "EigenSystem":
        """Sub-system holding only the listed modes, in the given order."""
        idx = np.asarray(list(modes), dtype=int)
        return replace(
            self,
            values=self.values[idx],
            right=self.right[:, idx],
            left=self.left[:, idx],
            residual_right=self.residual_right[idx],
            residual_left=self.residual_left[idx],
            paired=self.paired[idx],
            cond_estimate=float("nan"),
        )


def _clusters(values: np.ndarray, gap: float) -> list[list[int]]:
    # single linkage on |lambda_i - lambda_j| <= gap, sweep over real parts
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = np.argsort(values.real, kind="stable")
    for a, i in enumerate(order):
        for j in order[a + 1:]:
            if values[j].real - values[i].real > gap:
                break
            if abs(values[j] - values[i]) <= gap:
                parent[find(j)] = find(i)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def _pair_left(w, mu, gap):
    """Assign each right eigenvalue a left eigenvector index by proximity.

    Returns the assignment, the clusters of (near-)equal right eigenvalues and
    a per-mode flag that is False where the matching was ambiguous.
    """
    n = len(w)
    assignment = np.full(n, -1)
    paired = np.ones(n, dtype=bool)
    free = np.ones(n, dtype=bool)
    groups = _clusters(w, gap)
    for group in groups:
        k = len(group)
        dist = np.min(np.abs(mu[:, None] - w[None, group]), axis=1)
        dist[~free] = np.inf
        nearest = np.argsort(dist, kind="stable")
        chosen = nearest[:k]
        if k < n and np.isfinite(dist[nearest[k]]) and dist[nearest[k]] - dist[chosen[-1]] <= gap:
            paired[group] = False
        free[chosen] = False
        # within a cluster, order left vectors like their right partners
        chosen = sorted(chosen, key=lambda j: int(np.argmin(np.abs(w[group] - mu[j]))))
        assignment[group] = chosen
    return assignment, groups, paired


def eig(a, tol: Tolerances = DEFAULT_TOLERANCES, strict: bool = True) -> EigenSystem:
    """Full right/left eigendecomposition of a dense matrix.

    Right and left eigenvectors are computed independently (the latter from
    ``A^H``) and matched by eigenvalue proximity. Eigenvalues are sorted by
    real part, then imaginary part.

    With ``strict=False`` uncertifiable modes are flagged in the result
    (see :attr:`EigenSystem.certified`) instead of raising. Lattice
    discretizations of non-normal operators need this: their highest modes
    are too ill-conditioned to match reliably.

    Raises
    ------
    EigFailure
        LAPACK did not converge, or a residual certificate is violated.
    AmbiguousPairing
        Left and right spectra cannot be matched one-to-one.
    """
    a = as_cmatrix(a)
    scale = fro(a)
    try:
        w, vr = scipy.linalg.eig(a, right=True, check_finite=False)
        wl, vl = scipy.linalg.eig(a.conj().T, right=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigFailure(f"dense eigensolver failed: {exc}") from exc

    order = np.lexsort((w.imag, w.real))
    w = w[order]
    vr = vr[:, order]
    mu = wl.conj()

    rho = float(np.max(np.abs(w)))
    gap = 10.0 * tol.res * rho
    assignment, groups, paired = _pair_left(w, mu, gap)
    vl = vl[:, assignment]

    for group in groups:
        if len(group) < 2:
            continue
        vg = vl[:, group] / np.linalg.norm(vl[:, group], axis=0)
        rg = vr[:, group] / np.linalg.norm(vr[:, group], axis=0)
        g = vg.conj().T @ rg
        # unit columns, so the smallest singular value measures how far the block is from defective
        if np.linalg.svd(g, compute_uv=False)[-1] > DEFECT_THRESHOLD:
            vl[:, group] = vg @ np.linalg.inv(g).conj().T

    vr = vr / np.linalg.norm(vr, axis=0)
    vl = vl / np.linalg.norm(vl, axis=0)
    res_r = np.linalg.norm(a @ vr - vr * w, axis=0)
    res_l = np.linalg.norm(a.conj().T @ vl - vl * w.conj(), axis=0)
    es = EigenSystem(
        values=w,
        right=vr,
        left=vl,
        residual_right=res_r,
        residual_left=res_l,
        scale=scale,
        paired=paired,
        tol=tol,
        cond_estimate=float(np.linalg.cond(vr)),
    )
    if strict:
        es.check_certified()
    return es


def biorthonormalize(es: EigenSystem, tol: Tolerances = DEFAULT_TOLERANCES) -> EigenSystem:
    """Rescale left vectors so that ``chi_n^H phi_n = 1`` for every held mode.

    Lattice callers should first :meth:`EigenSystem.restrict` to the modes
    they intend to use: high finite-difference modes of strongly non-normal
    operators routinely look defective at double precision.
    """
    es.check_certified()
    dots = np.sum(es.left.conj() * es.right, axis=0)
    norms = np.linalg.norm(es.left, axis=0) * np.linalg.norm(es.right, axis=0)
    bad = np.flatnonzero(np.abs(dots) < DEFECT_THRESHOLD * norms)
    if bad.size:
        k = int(bad[0])
        raise DefectiveSpectrum(
            f"mode {k} (lambda={es.values[k]:.6g}) has vanishing left/right overlap "
            f"{abs(dots[k]) / norms[k]:.2e}; eigenvectors are incomplete"
        )
    left = es.left / dots.conj()
    return replace(es, left=left, biortho=True, cond_estimate=float(np.linalg.cond(es.right)))


def is_positive_definite(m, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    m = as_cmatrix(m)
    scale = fro(m)
    if fro(m - m.conj().T) > tol.alg * scale:
        return False
    lowest = np.linalg.eigvalsh((m + m.conj().T) / 2)[0]
    return bool(lowest > tol.alg * scale)
