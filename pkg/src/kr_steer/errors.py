"""Exception hierarchy shared by every module of the package."""


class KRSteerError(Exception):
    """Base class; ``kind`` is the short machine-readable tag used by the CLI."""

    kind = "error"


class DimensionMismatchError(KRSteerError, ValueError):
    kind = "dimension_mismatch"


class PoleError(KRSteerError, ArithmeticError):
    """Evaluation hit a division by zero, a trigonometric pole or a non-finite value."""

    kind = "pole"

    def __init__(self, message, component=None):
        if component is not None:
            message = f"component {component}: {message}"
        super().__init__(message)
        self.component = component


class AmbiguousRankError(KRSteerError):
    kind = "ambiguous_rank"


class ClosureBudgetError(KRSteerError):
    kind = "closure_budget"


class NotNilpotentError(KRSteerError):
    kind = "not_nilpotent"


class SizeBudgetError(KRSteerError):
    kind = "size_budget"


class ConversionError(KRSteerError):
    kind = "conversion"


class DomainError(KRSteerError, ValueError):
    kind = "domain"


class WindowMismatchError(DomainError):
    kind = "window_mismatch"


class AbnormalControlError(KRSteerError):
    kind = "abnormal"


class UnreachableError(KRSteerError):
    kind = "unreachable"


class ScenarioError(KRSteerError, ValueError):
    kind = "invalid_scenario"


class IntegrationError(KRSteerError):
    kind = "integration"
