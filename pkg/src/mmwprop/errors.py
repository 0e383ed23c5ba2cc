"""Exception hierarchy shared by all modules."""


class MmwError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(MmwError, ValueError):
    """An input lies outside the domain of the model."""


class InvalidGeometryError(DomainError):
    """Antenna heights or separation are non-finite or non-positive."""


class InvalidSceneError(DomainError):
    """Canopy intervals overlap or fall outside the ground track."""


class NoSignalError(DomainError):
    """A power that must be positive is zero (nothing was received)."""


class ConfigurationError(MmwError, ValueError):
    """Sounder or scenario configuration is unusable."""


class InsufficientDataError(MmwError, ValueError):
    """Not enough samples to run the requested operation."""


class InvalidDataError(MmwError, ValueError):
    """Malformed measurement data (bad PDP, bad sweep file)."""

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class IntegrityError(MmwError):
    """Bundled reference data failed its checksum."""


class NotFoundError(MmwError, KeyError):
    """Requested item does not exist in the bundled data."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""
