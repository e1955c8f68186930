"""Exception types shared across the package."""


class DrastochError(Exception):
    """Base class for all package errors."""


class InsufficientRuns(DrastochError, ValueError):
    """Raised when a variance estimate is requested from fewer than two runs."""


class DimensionMismatch(DrastochError, ValueError):
    pass


class UnknownItem(DrastochError, KeyError):
    pass


class MalformedUrl(DrastochError, ValueError):
    pass


class OracleUnavailable(DrastochError, RuntimeError):
    """The equivalence/extraction judge could not be reached."""


class JudgeFormatError(DrastochError, ValueError):
    """A judge response could not be parsed into the expected structure.

    ``raw`` holds the untouched response text and ``offset`` the character
    offset of the first violation (``None`` when it cannot be located).
    """

    def __init__(self, message, raw="", offset=None):
        super().__init__(message if offset is None else f"{message} (offset {offset})")
        self.raw = raw
        self.offset = offset


class SchemaViolation(DrastochError, ValueError):
    """Structured payload does not match its closed schema."""

    def __init__(self, path, message=""):
        self.path = path
        super().__init__(f"{path}: {message}" if message else str(path))


class EmptyActionSet(DrastochError, ValueError):
    pass


class StateSpaceTooLarge(DrastochError, RuntimeError):
    def __init__(self, count, limit):
        self.count = count
        self.limit = limit
        super().__init__(f"exact enumeration needs {count} outcomes (limit {limit})")


class NoProposals(DrastochError, ValueError):
    pass


class ConfigError(DrastochError, ValueError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
