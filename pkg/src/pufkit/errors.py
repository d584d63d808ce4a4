"""Exception hierarchy shared by every pufkit module."""


class PufkitError(Exception):
    """Base class for all pufkit errors."""


class ConfigurationError(PufkitError, ValueError):
    """A configuration value is invalid. ``field`` names the offending key."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class DimensionError(PufkitError, ValueError):
    """Bit vectors or code parameters have incompatible lengths."""


class BoundsError(PufkitError, IndexError):
    """An oscillator index lies outside the population's array."""


class ConflictError(PufkitError):
    """An entity id is already enrolled."""


class NotFoundError(PufkitError, KeyError):
    """An entity id or record is unknown."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ExhaustedError(PufkitError):
    """Every challenge-response pair of an entity has been issued."""


class ProtocolOrderError(PufkitError):
    """A protocol step was attempted out of order."""
