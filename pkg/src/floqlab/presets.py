"""Canonical desk-scale experiment used by the test suite and as CLI defaults.

The reference setup is the quadratic spectrum E_k = k^2 (alpha = 1,
C_E = 3/2), the golden-ratio drive frequency, the ground-row tracked index
eta = (0, 1), and a real band-one perturbation with power-law spatial decay.
The quadratic spectrum is a choice of convenience: it satisfies the additive
gap condition with unit exponent and keeps window assembly exact in floating
point.  Any badly approximable frequency works; the golden ratio is the
classical pick.
"""

from __future__ import annotations

import math

from .diophantine import DiophantineProfile, build_profile
from .perturbation import FourierPerturbation, band_perturbation
from .spectrum import FloquetGrid, LatticeIndex, SpectrumModel, TruncationWindow, power_spectrum

__all__ = [
    "GOLDEN_RATIO",
    "default_model",
    "default_grid",
    "default_perturbation",
    "default_profile",
]

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0

#: amplitude keeping the coupling box comfortably wider than the scanned betas
DEFAULT_AMPLITUDE = 0.12
#: smoothness order of the default profile (ell = 2 for alpha = 1)
DEFAULT_R = 20


def default_model() -> SpectrumModel:
    return power_spectrum(p=2.0, alpha=1.0, gap_constant=1.5,
                          mult_constant=1.0, mult_exponent=2.0)


def default_grid(
    omega: float = GOLDEN_RATIO,
    eta: tuple[int, int] = (0, 1),
    model: SpectrumModel | None = None,
) -> FloquetGrid:
    return FloquetGrid(
        model=model if model is not None else default_model(),
        omega=omega,
        eta=LatticeIndex(*eta),
    )


def default_perturbation(amplitude: float = DEFAULT_AMPLITUDE) -> FourierPerturbation:
    return band_perturbation(
        amplitude=amplitude, band_limit=1, spatial_decay=2.0, include_k0=True
    )


def default_profile(
    grid: FloquetGrid,
    window: TruncationWindow,
    r: int = DEFAULT_R,
    ell: int | None = 2,
) -> DiophantineProfile:
    return build_profile(grid, r=r, window=window, ell=ell)
