"""Exception hierarchy shared by all modules."""


class SdfError(Exception):
    """Base class for package errors."""


class ValidationError(SdfError, ValueError):
    """Input failed a precondition check."""


class ParseError(ValidationError):
    """Malformed panel file. ``line`` is the 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainError(ValidationError):
    """Value outside the mathematical domain of a metric."""


class InfeasibleError(SdfError):
    """The interpolation system has no solution."""


class DivergedError(SdfError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)
