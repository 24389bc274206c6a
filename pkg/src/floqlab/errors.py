"""Exception types shared across the library."""


class FloqlabError(Exception):
    """Base class for all library errors."""


class ModelRangeError(FloqlabError):
    """An energy level was requested outside the model's defined range."""


class SmoothnessError(FloqlabError):
    """A commutator power exceeds the declared smoothness order."""


class ResonanceError(FloqlabError):
    """An exact resonance (vanishing denominator) was detected.

    The offending lattice index, when known, is stored in ``index``.
    """

    def __init__(self, message: str, index=None):
        super().__init__(message)
        self.index = index


class DomainError(FloqlabError):
    """A coupling/spectral-parameter pair lies outside the admissible region."""


class ConditioningError(FloqlabError):
    """A dense linear solve failed its residual check."""


class ContractionError(FloqlabError):
    """A contraction-based solve (Neumann series or fixed point) failed."""


class TrackingError(FloqlabError):
    """Eigenpair tracking is ambiguous (overlap with the reference vector too small)."""


class InequalityError(FloqlabError):
    """A declared spectral inequality fails on probed data."""


class WitnessError(FloqlabError):
    """A density witness cannot be produced for the requested translate."""


class HermiticityError(FloqlabError):
    """A quantity that must be real/Hermitian is not, beyond tolerance."""


class ConfigError(FloqlabError):
    """An experiment configuration is missing or inconsistent."""
