"""Numerical toolkit for PT-symmetric Hamiltonians and their observables.

Builds finite-dimensional PT-symmetric models, constructs the C operator and
the positive metric ``eta = P C`` on the real, well-conditioned part of the
spectrum, and compares the two competing observable criteria (the CPT
transpose condition and Hermiticity in the CPT inner product).
"""

__version__ = "0.1.0"

from .errors import (
    AmbiguousPairing,
    BadGrid,
    BranchDomain,
    BrokenPhase,
    ConfigError,
    DefectiveSpectrum,
    DimensionMismatch,
    EigFailure,
    FrameError,
    FrameInconsistent,
    IoError,
    MetricNotPositive,
    ModelError,
    NonPolynomial,
    NumericalError,
    PhaseFixFailure,
    PotentialSyntaxError,
    PTQMError,
    UsageError,
)
from .linalg import (
    DEFAULT_TOLERANCES,
    EigenSystem,
    Tolerances,
    adjoint,
    as_cmatrix,
    biorthonormalize,
    commutator_norm,
    eig,
    transpose,
)
from .metric import (
    BROKEN,
    PARTIALLY_KEPT,
    UNBROKEN,
    CPTFrame,
    ModelSolution,
    SpectrumClassification,
    classify_spectrum,
    construct_frame,
    frame_residuals,
    inner_cpt,
    inner_eta,
    solve_model,
    verify_frame,
)
from .models import (
    EpsilonFamily,
    Grid,
    HermitianOscillator,
    IXCubed,
    Matrix2x2,
    PolyPotential,
    PotentialExpr,
    ShiftedSquare,
    build_hamiltonian,
    build_operators,
    format_potential,
    make_grid,
    parse_potential,
)
from .observables import (
    DEF1,
    DEF2,
    ObservableReport,
    classify_operator,
    def1_residual,
    def2_residual,
    eq2_residual,
    generate_observable,
    matrix_element_audit,
    requirement_audit,
    symmetry_flags,
)
from .serialization import load_frame, save_frame
