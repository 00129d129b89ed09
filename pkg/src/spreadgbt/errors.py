"""Exception hierarchy shared by the library and the command line."""


class SpreadGBTError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class InputError(SpreadGBTError, ValueError):
    """Malformed model, dataset or attacker parameters."""

    exit_code = 2


class StructureError(InputError):
    """A tree references a feature outside the instance dimensionality."""


class NotLargeSpreadError(SpreadGBTError):
    """The ensemble is not large-spread for the requested attacker.

    ``report`` carries the :class:`~spreadgbt.geometry.SpreadReport` with the
    witnessing threshold pair.
    """

    exit_code = 3

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ResourceLimitError(SpreadGBTError):
    """A configured size cap was hit."""

    exit_code = 4


class OracleTimeout(SpreadGBTError):
    """Exhaustive enumeration exceeded its per-instance deadline."""

    exit_code = 4
