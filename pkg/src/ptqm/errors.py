"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
``2`` for usage/configuration problems, ``1`` for numerical or domain failures.
"""

from __future__ import annotations


class PTQMError(Exception):
    exit_code = 1


class UsageError(PTQMError):
    exit_code = 2


class NumericalError(PTQMError):
    exit_code = 1


class DimensionMismatch(UsageError, ValueError):
    pass


class ConfigError(UsageError):
    pass


class IoError(UsageError, OSError):
    pass


class BadGrid(UsageError, ValueError):
    pass


class ModelError(UsageError, ValueError):
    pass


class BranchDomain(ModelError):
    """Exponent outside the real-line window (-1, 2)."""


class PotentialSyntaxError(UsageError, ValueError):
    """Malformed potential expression.

    ``position`` is the 0-based character offset where parsing stopped and
    ``expected`` names what the parser wanted to see there.
    """

    def __init__(self, position: int, expected: str, source: str = ""):
        self.position = position
        self.expected = expected
        self.source = source
        super().__init__(f"at offset {position}: expected {expected}")


class NonPolynomial(UsageError, ValueError):
    def __init__(self, position: int, reason: str):
        self.position = position
        self.reason = reason
        super().__init__(f"at offset {position}: {reason}")


class EigFailure(NumericalError):
    pass


class AmbiguousPairing(NumericalError):
    pass


class DefectiveSpectrum(NumericalError):
    pass


class FrameError(NumericalError):
    """Base class for failures while building a CPT frame."""


class BrokenPhase(FrameError):
    pass


class PhaseFixFailure(FrameError):
    pass


class MetricNotPositive(FrameError):
    def __init__(self, message: str, min_eigenvalue: float, hermiticity: dict):
        self.min_eigenvalue = min_eigenvalue
        self.hermiticity = hermiticity
        super().__init__(message)


class FrameInconsistent(FrameError):
    pass
