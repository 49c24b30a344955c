"""Exception types shared across the package."""


class TrotterBoundError(Exception):
    """Base class for all package errors."""


class ValidationError(TrotterBoundError):
    """A configuration or argument failed validation."""


class InvalidLatticeError(ValidationError):
    """Lattice parameters do not describe a valid lattice."""


class InvalidGridError(ValidationError):
    """Grid parameters do not describe a valid dual plane wave grid."""


class CapacityError(TrotterBoundError):
    """A requested computation exceeds the supported problem size."""


class ExcitationError(TrotterBoundError):
    """An excitation was requested between incompatible orbitals."""


class SectorError(TrotterBoundError):
    """Two determinants do not belong to the same particle/spin sector."""


class RankError(TrotterBoundError):
    """An operator contains monomials of higher particle rank than supported."""


class ConvergenceError(TrotterBoundError):
    """An iterative eigensolver failed to converge.

    Carries the best available estimate in ``best_estimate``.
    """

    def __init__(self, message, best_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate


class ExtinctionError(TrotterBoundError):
    """The walker population died out completely."""


class PopulationOverflowError(TrotterBoundError):
    """The walker population exceeded the configured hard cap."""


class FitError(TrotterBoundError):
    """A least-squares fit could not be performed on the given data."""


class ApplicabilityError(TrotterBoundError):
    """A bound was requested for a Hamiltonian outside its applicability."""
