"""Frequency selection: non-resonance exponents, window estimates, density scans.

A drive frequency omega is numerically usable when the window quantity
gamma_hat = min_{n != eta} n2^sigma |F_n - F| stays positive and stable as the
window grows.  The profile object packages omega with the exponent pair
(sigma, tau), the asymptotic order ell, and the window estimate gamma_hat;
psi(k) = gamma_hat * k^-sigma and psi_tilde(k) = (gamma_hat/2) * k^-tau are
the small-denominator floors used downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, ResonanceError, WitnessError
from .spectrum import (
    FloquetGrid,
    LatticeIndex,
    SpectrumModel,
    TruncationWindow,
    detunings,
)

__all__ = [
    "ExponentChoice",
    "select_exponents",
    "DiophantineProfile",
    "build_profile",
    "gamma_estimate",
    "StabilityReport",
    "omega_stability_report",
    "WitnessInterval",
    "density_witness",
    "translate_density_scan",
]


@dataclass(frozen=True)
class ExponentChoice:
    """Deterministic exponent selection (sigma, tau, ell) for given (r, alpha)."""

    sigma: float
    tau: float
    ell: int


def select_exponents(r: int, alpha: float, ell: int | None = None) -> ExponentChoice:
    """Pick exponents tau = r*alpha/(ell+2), sigma = 1 + (tau-4)/4.

    Feasibility needs r >= 2 and r > 16/alpha; the largest admissible order
    is the greatest integer strictly below r*alpha/4 - 2.  The returned pair
    always satisfies tau > 4, sigma > 1 and 2*sigma + 2 < tau (asserted).
    """
    if r < 2 or r * alpha <= 16.0:
        raise DomainError(
            f"no admissible exponents for r={r}, alpha={alpha}: need r >= 2 and r > 16/alpha"
        )
    ell_cap = r * alpha / 4.0 - 2.0
    ell_max = math.ceil(ell_cap) - 1  # greatest integer strictly below the cap
    if ell is None:
        ell = ell_max
    if not 1 <= ell <= ell_max:
        raise DomainError(f"requested ell={ell} outside 1..{ell_max} for r={r}, alpha={alpha}")
    tau = r * alpha / (ell + 2.0)
    sigma = 1.0 + (tau - 4.0) / 4.0
    assert tau > 4.0 and sigma > 1.0 and 2.0 * sigma + 2.0 < tau
    return ExponentChoice(sigma=sigma, tau=tau, ell=int(ell))


@dataclass(frozen=True)
class DiophantineProfile:
    """Frequency omega with exponents, window gamma estimate, and tracked index."""

    omega: float
    sigma: float
    tau: float
    gamma: float
    eta: LatticeIndex
    ell: int
    r: int
    alpha: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ResonanceError("gamma estimate must be positive")
        if self.tau * (self.ell + 2) > self.r * self.alpha * (1 + 1e-12):
            raise ValueError("exponents violate tau*(ell+2) <= r*alpha")
        if not 2.0 * self.sigma + 2.0 < self.tau:
            raise ValueError("exponents violate 2*sigma + 2 < tau")
        if not self.ell < self.r * self.alpha / 4.0 - 2.0:
            raise ValueError("order violates ell < r*alpha/4 - 2")
        if self.tau < self.sigma:
            raise ValueError("tau >= sigma required so that psi >= 2*psi_tilde")

    def psi(self, k: int | np.ndarray) -> np.ndarray | float:
        return self.gamma * np.asarray(k, dtype=float) ** (-self.sigma)

    def psi_tilde(self, k: int | np.ndarray) -> np.ndarray | float:
        return 0.5 * self.gamma * np.asarray(k, dtype=float) ** (-self.tau)


def gamma_estimate(grid: FloquetGrid, sigma: float, window: TruncationWindow) -> float:
    """min over window points n != eta of n2^sigma |F_n - F|.

    A positive, window-stable value is finite-resolution evidence that omega
    is non-resonant for the tracked index.  An exact zero raises
    :class:`ResonanceError` with the offending index.
    """
    d = detunings(grid, window)
    eta_idx = window.index(grid.eta)
    weighted = window.n2.astype(float) ** sigma * np.abs(d)
    weighted[eta_idx] = np.inf
    idx = int(np.argmin(weighted))
    value = float(weighted[idx])
    if value == 0.0:
        raise ResonanceError(
            f"exact resonance at {window.point(idx)}", index=window.point(idx)
        )
    return value


def build_profile(
    grid: FloquetGrid,
    r: int,
    window: TruncationWindow,
    ell: int | None = None,
) -> DiophantineProfile:
    """Select exponents for (r, alpha) and estimate gamma on the window."""
    choice = select_exponents(r, grid.model.alpha, ell)
    gamma = gamma_estimate(grid, choice.sigma, window)
    return DiophantineProfile(
        omega=grid.omega,
        sigma=choice.sigma,
        tau=choice.tau,
        gamma=gamma,
        eta=grid.eta,
        ell=choice.ell,
        r=r,
        alpha=grid.model.alpha,
    )


@dataclass(frozen=True)
class StabilityReport:
    """gamma_hat per window of an increasing ladder, with drop flags."""

    windows: tuple[TruncationWindow, ...]
    gammas: tuple[float, ...]
    flagged: bool

    @property
    def flags(self) -> tuple[bool, ...]:
        out = [False]
        for prev, cur in zip(self.gammas, self.gammas[1:]):
            out.append(bool(cur < prev / 10.0))
        return tuple(out)


def omega_stability_report(
    grid: FloquetGrid, sigma: float, windows: Sequence[TruncationWindow]
) -> StabilityReport:
    """Track gamma_hat over a window ladder; flag suspect-resonant frequencies.

    A frequency is flagged when gamma_hat drops by more than a factor of ten
    between consecutive windows, or hits an exact resonance (gamma_hat = 0).
    """
    gammas: list[float] = []
    for w in windows:
        try:
            gammas.append(gamma_estimate(grid, sigma, w))
        except ResonanceError:
            gammas.append(0.0)
    flagged = any(g == 0.0 for g in gammas) or any(
        cur < prev / 10.0 for prev, cur in zip(gammas, gammas[1:])
    )
    return StabilityReport(windows=tuple(windows), gammas=tuple(gammas), flagged=flagged)


# ---------------------------------------------------------------------------
# Density of the translated lattice omega*Z + E
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WitnessInterval:
    """One closed frequency interval [lo, hi] hitting [u, v] at translate index k."""

    lo: float
    hi: float
    k: int


def density_witness(
    u: float,
    v: float,
    open_set: Sequence[tuple[float, float]],
    x: float,
    e_values: Sequence[float] | None = None,
) -> list[WitnessInterval]:
    """Frequencies omega inside ``open_set`` for which x - k*omega lands in [u, v].

    For each component ]a, b[ of the open set the construction collects the
    closed intervals [(x-v)/k, (x-u)/k] over the integers k strictly between
    (x-u)/b and (x-v)/a.  For admissible x (beyond each component's threshold
    max{0, v, (v*b - u*a)/(b - a)}) these intervals are pairwise disjoint and
    contained in the component; their total length is guaranteed to reach at
    least (1/4) (v-u) * integral of 1/s over the open set, and the call
    refuses (raises :class:`WitnessError`) when x is too small for that
    measure bound to hold.
    """
    if not v - u > 0:
        raise ValueError("need u < v")
    intervals: list[WitnessInterval] = []
    total = 0.0
    log_mass = 0.0
    for a, b in open_set:
        if not (v - u < a < b):
            raise ValueError(f"component ]{a}, {b}[ must lie inside ]v-u, inf[")
        log_mass += math.log(b / a)
        threshold = max(0.0, v, (v * b - u * a) / (b - a))
        if x <= threshold:
            raise WitnessError(
                f"x={x} below construction threshold {threshold} for component ]{a}, {b}["
            )
        k_lo = math.floor((x - u) / b) + 1
        k_hi = math.ceil((x - v) / a) - 1
        for k in range(k_lo, k_hi + 1):
            lo, hi = (x - v) / k, (x - u) / k
            intervals.append(WitnessInterval(lo=lo, hi=hi, k=k))
            total += hi - lo
    if e_values is not None and not any(math.isclose(x, e) for e in e_values):
        raise WitnessError(f"x={x} is not one of the supplied spectrum values")
    required = 0.25 * (v - u) * log_mass
    if total < required:
        raise WitnessError(
            f"witness measure {total:.6g} below the quarter bound {required:.6g}; "
            "increase x"
        )
    return intervals


def translate_density_scan(
    model: SpectrumModel,
    interval: tuple[float, float],
    omega_range: tuple[float, float],
    k_max: int,
    samples: int,
    seed: int,
) -> float:
    """Fraction of sampled frequencies whose translated spectrum meets [u, v].

    For each omega drawn uniformly from ``omega_range`` the scan asks whether
    some integer multiple of omega shifts one of E_1..E_{k_max} into [u, v];
    the integer is found in closed form, so the translate index is unbounded.
    """
    u, v = interval
    if not u < v:
        raise ValueError("interval must satisfy u < v")
    lo_w, hi_w = omega_range
    if not 0 < lo_w < hi_w:
        raise ValueError("omega_range must be positive and increasing")
    e = model.energies(np.arange(1, k_max + 1))
    if e.max() < v:
        raise DomainError(
            f"probed spectrum tops out at {e.max()}, below v={v}; "
            "density needs energies reaching past the target interval"
        )
    rng = np.random.Generator(np.random.Philox(seed))
    omegas = rng.uniform(lo_w, hi_w, samples)
    hits = 0
    for w in omegas:
        lo = (u - e) / w
        hi = (v - e) / w
        if np.any(np.floor(hi) >= np.ceil(lo)):
            hits += 1
    return hits / samples
