"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment configuration; message carries the field path."""


class SingularSystemError(ArithmeticError):
    """A linear system (mode-matching or multi-target) is numerically singular."""


class ZeroImageError(ArithmeticError):
    """An identically zero image cannot be normalized."""


class DegenerateSpectrumError(ArithmeticError):
    """Reflectivity spectrum admits no range-shift estimate (zero curvature)."""


class NoTargetsFoundError(RuntimeError):
    """Peak extraction found fewer targets than requested."""
