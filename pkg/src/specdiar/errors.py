"""Exception hierarchy shared by all modules."""


class DiarizationError(Exception):
    """Base class for every error raised by this package."""


class ParseError(DiarizationError, ValueError):
    """Malformed on-disk artifact. Carries the 1-based line (and column when known)."""

    def __init__(self, message, line=None, column=None, source=None):
        self.line = line
        self.column = column
        self.source = source
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class InvalidInputError(DiarizationError, ValueError):
    """Argument violates an operation's precondition."""


class NumericalError(DiarizationError, ArithmeticError):
    """Eigensolver (or other numerical kernel) failed."""

    def __init__(self, message, size=None, iterations=None):
        self.size = size
        self.iterations = iterations
        super().__init__(f"{message} (matrix size={size}, iterations={iterations})")


class UndefinedDerError(DiarizationError, ValueError):
    """DER requested with no scored reference speech."""


class InfeasibleSpecError(DiarizationError, ValueError):
    """Synthetic spec cannot be realized within the sampling budget."""


class SweepError(DiarizationError):
    """A recording failed during an alpha sweep."""

    def __init__(self, recording_id, alpha, cause):
        self.recording_id = recording_id
        self.alpha = alpha
        self.cause = cause
        super().__init__(f"recording {recording_id!r} failed at alpha={alpha:.2f}: {cause}")
