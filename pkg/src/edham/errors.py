"""Exception hierarchy.

Configuration problems derive from :class:`ConfigError`; everything raised by
a numerical stage derives from :class:`NumericalError`.  The CLI maps the two
families to distinct exit codes.
"""


class EDHamError(Exception):
    pass


class ConfigError(EDHamError, ValueError):
    pass


class DimensionError(ConfigError):
    pass


class NumericalError(EDHamError):
    pass


class DomainError(NumericalError, ValueError):
    """Evaluation requested outside the model's energy domain."""


class PoleError(DomainError):
    """Energy too close to an eigenvalue of the eliminated block."""


class EvaluationError(DomainError):
    """The model formula is invalid at the requested energy (e.g. m(z) <= 0)."""


class NonDiagonalizableError(NumericalError):
    pass


class UnsupportedSpectrumError(NumericalError):
    pass


class AmbiguityError(NumericalError):
    def __init__(self, message, z_left=None, z_right=None, quality=None):
        super().__init__(message)
        self.z_left = z_left
        self.z_right = z_right
        self.quality = quality


class ComplexBranchError(NumericalError):
    def __init__(self, message, branch=None):
        super().__init__(message)
        self.branch = branch


class RankDeficientError(NumericalError):
    def __init__(self, message, smallest_singular_value=None):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


class InputError(NumericalError, ValueError):
    """Inconsistent state/dual input passed to an assembly routine."""


class DivergenceError(ConfigError):
    """Requested moment integral does not converge."""
