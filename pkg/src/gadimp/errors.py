"""Exception types shared across the package."""


class GadimpError(Exception):
    """Base class for all package-specific errors."""


class RangeOverflow(GadimpError):
    """A value overflowed the target floating-point range in strict mode."""


class DimensionMismatch(GadimpError):
    """Operand shapes are incompatible."""


class NonSquare(GadimpError):
    """Operation requires a square matrix."""


class NonPositiveAlpha(GadimpError):
    """The regularization shift must be strictly positive."""


class DenseCapExceeded(GadimpError):
    """Problem too large for a dense oracle computation."""


class SingularMatrix(GadimpError):
    """Matrix is singular (or numerically so) for the requested operation."""


class ZeroReference(GadimpError):
    """Reference vector has zero norm."""


class ZeroError(GadimpError):
    """Error vector is identically zero; the requested ratio is undefined."""


class AllDiverged(GadimpError):
    """No candidate in a parameter search produced a converged solve."""


class EscalationExhausted(GadimpError):
    """Safety-gate escalation hit its iteration cap without succeeding."""


class IllConditionedGram(GadimpError):
    """GPR kernel Gram matrix could not be factorized."""
