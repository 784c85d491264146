"""Exception types shared across the package."""


class PolyInvError(Exception):
    """Base class for all package errors."""


class InvalidSpectra(PolyInvError, ValueError):
    """Spectral data violates one of its invariants."""


class DimensionMismatch(PolyInvError, ValueError):
    """Two spectral data sets have different state counts."""


class NegativeResidual(PolyInvError, ValueError):
    """The ground-state sum rule is already over-saturated."""


class InsufficientGrid(PolyInvError):
    """Too few interior grid points for the requested number of states."""


class UnresolvedStates(PolyInvError):
    """Requested states reach the artificial walls of the grid."""


class NoConfinement(PolyInvError):
    """The potential does not confine the requested states within the width cap."""


class ZeroMatrix(PolyInvError, ValueError):
    """SVD of an all-zero matrix."""


class NoMinimum(PolyInvError):
    """A reconstructed polynomial has no local minimum (barrier or monotone)."""
