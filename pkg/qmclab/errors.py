"""Exceptions raised by qmclab. All derive from ValueError."""


class QmclabError(ValueError):
    """Base class for every qmclab error."""


class DimensionError(QmclabError):
    """Shape, layout or arity mismatch, or a dimension above the configured cap."""

    def __init__(self, message: str, subsystem: int | None = None):
        super().__init__(message)
        self.subsystem = subsystem


class DensityValidationError(QmclabError):
    """A matrix failed density-operator validation."""

    kind = "invalid"

    def __init__(self, message: str, violation: float):
        super().__init__(f"{message} (violation {violation:.3e})")
        self.violation = violation


class NotHermitianError(DensityValidationError):
    kind = "not-hermitian"


class NotPSDError(DensityValidationError):
    kind = "not-psd"


class TraceError(DensityValidationError):
    kind = "trace"


class InvalidExponentError(QmclabError):
    """Schatten exponent below one."""


class DegenerateInputError(QmclabError):
    """An input that cannot be normalized, e.g. the zero matrix."""


class InfeasibleTargetError(QmclabError):
    """A perturbation target that no mixing path could reach."""


class ChannelError(QmclabError):
    """Malformed Kraus operators or a channel that is not trace preserving."""


class UnknownFormulaError(QmclabError):
    pass


class UnknownBoundError(QmclabError):
    pass


class ConfigError(QmclabError):
    """Invalid campaign configuration. The message names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class MatrixFormatError(QmclabError):
    """Malformed matrix, state or channel JSON."""
