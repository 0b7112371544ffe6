"""Exception hierarchy shared by every layer of the package."""


class SRSError(Exception):
    """Base class for all errors raised by :mod:`srsweep`."""


class CapacityError(SRSError, ValueError):
    """Atom count exceeds what a basis bitmask (or an exact mode) can hold."""


class ShapeError(SRSError, ValueError):
    """Two objects disagree on the atom count."""


class UndefinedError(SRSError, ValueError):
    """A quantity is undefined for the given input (zero norm, empty medium, too few points)."""


class ResourceError(SRSError, RuntimeError):
    """An exact computation would exceed its configured budget."""


class ConfigError(SRSError, ValueError):
    """Missing or inconsistent run parameters."""


class FitError(UndefinedError):
    """A scaling fit cannot be formed from the supplied points."""
