"""Lattices, canonical operators and the catalog of PT-symmetric Hamiltonians.

Units are dimensionless with hbar = 1 and unit mass convention ``H = p^2 + V``.
Time reversal is never stored as a matrix: on the symmetric lattice it is
componentwise complex conjugation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import BadGrid, BranchDomain, ModelError
from .potential import format_coefficients, parse_coefficients

__all__ = [
    "Grid",
    "make_grid",
    "DiscretizedOperator",
    "Operators",
    "build_operators",
    "Matrix2x2",
    "EpsilonFamily",
    "IXCubed",
    "HermitianOscillator",
    "ShiftedSquare",
    "PolyPotential",
    "PotentialExpr",
    "ModelSpec",
    "parse_potential",
    "format_potential",
    "potential_values",
    "build_hamiltonian",
    "default_grid",
    "is_lattice_model",
]

EPSILON_WINDOW = (-1.0, 2.0)


@dataclass(frozen=True)
class Grid:
    n_points: int
    half_width: float

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.n_points + 1)

    @property
    def nodes(self) -> np.ndarray:
        # (j - (N-1)/2) is an exact half-integer, so negation symmetry is bit-exact
        return (np.arange(self.n_points) - (self.n_points - 1) / 2.0) * self.spacing

    def inner(self, u, v) -> complex:
        """Discrete L2 product ``dx * sum(conj(u) v)``."""
        return complex(self.spacing * np.vdot(u, v))


def make_grid(n: int, half_width: float) -> Grid:
    if isinstance(n, bool) or int(n) != n or n < 3:
        raise BadGrid(f"grid needs at least 3 interior points, got {n!r}")
    if not (math.isfinite(half_width) and half_width > 0):
        raise BadGrid(f"half width must be positive and finite, got {half_width!r}")
    return Grid(int(n), float(half_width))


@dataclass(frozen=True)
class DiscretizedOperator:
    matrix: np.ndarray
    grid: Optional[Grid]
    label: str

    @property
    def weight(self) -> float:
        """Quadrature weight of the underlying inner product (1 for matrix models)."""
        return self.grid.spacing if self.grid is not None else 1.0


@dataclass(frozen=True)
class Operators:
    X: DiscretizedOperator
    Mom: DiscretizedOperator
    Kin: DiscretizedOperator
    Par: DiscretizedOperator


def _parity(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.complex128)[::-1].copy()


def build_operators(grid: Grid) -> Operators:
    """Position, momentum, kinetic energy and parity on a Dirichlet lattice."""
    n, dx = grid.n_points, grid.spacing
    x = np.diag(grid.nodes.astype(np.complex128))
    off = np.ones(n - 1)
    diff = (np.diag(off, 1) - np.diag(off, -1)) / (2.0 * dx)
    mom = -1j * diff
    kin = (2.0 * np.eye(n) - np.diag(off, 1) - np.diag(off, -1)) / dx**2
    return Operators(
        X=DiscretizedOperator(x, grid, "x"),
        Mom=DiscretizedOperator(mom.astype(np.complex128), grid, "p"),
        Kin=DiscretizedOperator(kin.astype(np.complex128), grid, "p^2"),
        Par=DiscretizedOperator(_parity(n), grid, "P"),
    )


# ----------------------------------------------------------------- model specs


@dataclass(frozen=True)
class Matrix2x2:
    """``[[r e^{i theta}, s], [s, r e^{-i theta}]]``; unbroken iff ``s^2 >= r^2 sin^2 theta``."""

    r: float
    s: float
    theta: float

    def __post_init__(self):
        if self.s == 0:
            raise ModelError("Matrix2x2 requires s != 0")

    @property
    def label(self) -> str:
        return f"matrix2x2(r={self.r!r}, s={self.s!r}, theta={self.theta!r})"


@dataclass(frozen=True)
class EpsilonFamily:
    """``H = p^2 + x^2 (i x)^eps`` on the real line."""

    eps: float

    def __post_init__(self):
        lo, hi = EPSILON_WINDOW
        if not (lo < self.eps < hi):
            raise BranchDomain(
                f"epsilon={self.eps!r} outside the real-line window ({lo:g}, {hi:g})"
            )

    @property
    def label(self) -> str:
        return f"epsilon_family(eps={self.eps!r})"


def IXCubed() -> EpsilonFamily:
    return EpsilonFamily(1.0)


def HermitianOscillator() -> EpsilonFamily:
    return EpsilonFamily(0.0)


@dataclass(frozen=True)
class ShiftedSquare:
    """``H = (p + i x)^2 + x^2``, PT-symmetric but not symmetric."""

    label = "shifted_square"


@dataclass(frozen=True)
class PolyPotential:
    coeffs: tuple = field(default=(0j,))

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs) or (0j,))

    @property
    def label(self) -> str:
        return f"poly({format_coefficients(self.coeffs)})"

    def as_dict(self) -> dict:
        return {k: c for k, c in enumerate(self.coeffs) if c != 0}


@dataclass(frozen=True)
class PotentialExpr:
    source: str

    @property
    def label(self) -> str:
        return f"expr({self.source})"


ModelSpec = Union[Matrix2x2, EpsilonFamily, ShiftedSquare, PolyPotential, PotentialExpr]


def parse_potential(src: str) -> PolyPotential:
    """Parse a polynomial potential; see :mod:`ptqm.potential` for the grammar."""
    return PolyPotential(parse_coefficients(src))


def format_potential(poly: PolyPotential) -> str:
    return format_coefficients(poly.coeffs)


def is_lattice_model(spec) -> bool:
    return not isinstance(spec, Matrix2x2)


def default_grid(spec) -> Optional[Grid]:
    if isinstance(spec, Matrix2x2):
        return None
    if isinstance(spec, ShiftedSquare):
        return make_grid(301, 10.0)
    return make_grid(201, 8.0)


def _epsilon_potential(eps: float, x: np.ndarray) -> np.ndarray:
    # principal branch: |x|^(2+eps) exp(i eps pi/2 sign x); sign(0) = 0 and V(0) = 0
    return np.abs(x) ** (2.0 + eps) * np.exp(1j * eps * (np.pi / 2) * np.sign(x))


def _poly_values(coeffs, x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape, dtype=np.complex128)
    for c in reversed(coeffs):
        out = out * x + c
    return out


def potential_values(spec, grid: Grid) -> np.ndarray:
    """Diagonal matrix of the potential on the lattice nodes."""
    x = grid.nodes
    if isinstance(spec, EpsilonFamily):
        v = _epsilon_potential(spec.eps, x)
    elif isinstance(spec, PolyPotential):
        v = _poly_values(spec.coeffs, x)
    elif isinstance(spec, PotentialExpr):
        v = _poly_values(parse_potential(spec.source).coeffs, x)
    else:
        raise ModelError(f"{type(spec).__name__} does not carry a potential")
    return np.diag(v.astype(np.complex128))


def build_hamiltonian(spec, grid: Optional[Grid] = None):
    """Return ``(H, Par)`` as :class:`DiscretizedOperator` values."""
    if isinstance(spec, Matrix2x2):
        r, s, th = spec.r, spec.s, spec.theta
        h = np.array(
            [[r * np.exp(1j * th), s], [s, r * np.exp(-1j * th)]], dtype=np.complex128
        )
        par = np.array([[0, 1], [1, 0]], dtype=np.complex128)
        return DiscretizedOperator(h, None, spec.label), DiscretizedOperator(par, None, "P")
    if grid is None:
        raise BadGrid(f"{spec.label} needs a lattice")
    ops = build_operators(grid)
    if isinstance(spec, ShiftedSquare):
        x, p = ops.X.matrix, ops.Mom.matrix
        h = ops.Kin.matrix + 1j * (x @ p + p @ x)
    else:
        h = ops.Kin.matrix + potential_values(spec, grid)
    return DiscretizedOperator(h, grid, spec.label), ops.Par
