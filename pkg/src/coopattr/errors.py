"""Exception types shared across the package."""


class CoopAttrError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(CoopAttrError, ValueError):
    """Invalid arguments, configuration values, or malformed inputs."""


class StateError(CoopAttrError, RuntimeError):
    """An operation was applied to an object in the wrong state."""


class TrainingError(CoopAttrError, ValueError):
    """Classifier training cannot proceed (degenerate training data)."""


class ProtocolError(CoopAttrError, ValueError):
    """Inter-agent payloads are inconsistent (e.g. dimension mismatch)."""


class DecodeError(CoopAttrError, ValueError):
    """A wire message is structurally malformed."""


class FeasibilityError(CoopAttrError, ValueError):
    """The requested exact computation is too large to enumerate."""
