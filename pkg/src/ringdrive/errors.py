"""Exception types shared across the package."""


class RingdriveError(Exception):
    """Base class for all package-specific failures."""


class DimensionCapError(RingdriveError):
    """A requested basis would exceed the configured dimension cap."""


class BasisMismatchError(RingdriveError, ValueError):
    """Two objects that must live on the same basis do not."""


class ConvergenceError(RingdriveError, RuntimeError):
    """An iterative solver failed to reach its tolerance."""


class NonFiniteError(RingdriveError, FloatingPointError):
    """A NaN or infinity appeared where finite numbers are required."""


class ConfigError(RingdriveError, ValueError):
    """An experiment configuration failed validation.

    `field` holds the dotted path of the offending entry so CLI callers
    can point users at the exact key.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
