class CharlabError(Exception):
    """Base class for every error raised by charlab."""


class DimensionError(CharlabError, ValueError):
    pass


class PreconditionError(CharlabError):
    """An operator or input violates a stated precondition.

    ``where`` names the offending object (e.g. ``"A_1"`` or ``"(1, 2)"``)
    so that drivers and the CLI can report it verbatim.
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class UnsupportedFamilyError(CharlabError):
    pass


class OutOfDomainError(CharlabError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DegreeCapError(CharlabError):
    pass


class ConfigError(CharlabError):
    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
