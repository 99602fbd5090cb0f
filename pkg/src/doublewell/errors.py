"""Exception hierarchy shared by the library and the CLI."""


class DoubleWellError(Exception):
    """Base class for all library errors."""


class DomainError(DoubleWellError, ValueError):
    """An argument lies outside the domain of the requested quantity."""


class SeparatrixError(DomainError):
    """E equals the critical energy: no closed orbit, infinite period."""


class BranchOverflowError(DomainError):
    """A quantized action falls outside the action range of the requested branch."""


class NumericError(DoubleWellError, ArithmeticError):
    """A numerical procedure failed to converge or produced non-finite values."""


class AnalysisError(DoubleWellError):
    """Input data is unsuitable for the requested analysis."""


class DataIntegrityError(AnalysisError):
    """Input data violates a structural invariant (e.g. parity alternation)."""
