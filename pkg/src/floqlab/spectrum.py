"""Unperturbed spectra, the driven-lattice index set, and spectral growth checks.

The unperturbed operator has simple discrete levels E_1 < E_2 < ... and the
driven (Floquet) problem lives on the index lattice Z x N, where a point
n = (n1, n2) carries the quasi-energy F_n = omega*n1 + E_{n2}.  All infinite
objects are probed on finite truncation windows; nothing here extrapolates
beyond the data it was given.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ModelRangeError

__all__ = [
    "LatticeIndex",
    "SpectrumModel",
    "FloquetGrid",
    "TruncationWindow",
    "power_spectrum",
    "geometric_spectrum",
    "table_spectrum",
    "floquet_value",
    "detunings",
    "gap_check",
    "pairwise_gap_bound",
    "multiplicative_check",
    "decompose_spectrum",
]


@dataclass(frozen=True)
class LatticeIndex:
    """A point n = (n1, n2) of the index lattice Z x N (n2 >= 1)."""

    n1: int
    n2: int

    def __post_init__(self):
        if self.n2 < 1:
            raise ValueError(f"n2 must be >= 1, got {self.n2}")

    def as_tuple(self) -> tuple[int, int]:
        return (self.n1, self.n2)


@dataclass(frozen=True)
class SpectrumModel:
    """Energy levels E_k with their gap/multiplicative growth constants.

    ``energy_fn`` maps a numpy integer array of levels k >= 1 to E_k.  For
    table-backed models ``k_max`` bounds the defined range; requests beyond it
    raise :class:`ModelRangeError` instead of extrapolating.

    ``alpha``/``gap_constant`` are the claimed constants of the additive gap
    condition  (E_{k+1} - E_k) / (k+1)^alpha >= C_E;  ``mult_constant`` /
    ``mult_exponent`` are the optional constants of the multiplicative
    condition  E_k/E_j >= C_M (k/j)^mu  (or its exponential variant).
    """

    energy_fn: Callable[[np.ndarray], np.ndarray]
    alpha: float
    gap_constant: float
    mult_constant: float | None = None
    mult_exponent: float | None = None
    k_max: int | None = None
    label: str = ""

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.gap_constant <= 0:
            raise ValueError("gap_constant must be positive")

    def _check_range(self, ks: np.ndarray) -> None:
        if np.any(ks < 1):
            raise ModelRangeError(f"levels must be >= 1, got min {ks.min()}")
        if self.k_max is not None and np.any(ks > self.k_max):
            raise ModelRangeError(
                f"level {int(ks.max())} beyond model range k_max={self.k_max} "
                f"({self.label or 'unlabeled model'})"
            )

    def energy(self, k: int) -> float:
        """E_k for a single level k."""
        ks = np.asarray([int(k)])
        self._check_range(ks)
        return float(self.energy_fn(ks)[0])

    def energies(self, ks: Sequence[int] | np.ndarray) -> np.ndarray:
        """Vectorized E_k over an integer array of levels."""
        arr = np.asarray(ks, dtype=np.int64)
        self._check_range(arr)
        return np.asarray(self.energy_fn(arr), dtype=float)


def power_spectrum(
    p: float = 2.0,
    alpha: float = 1.0,
    gap_constant: float = 1.5,
    mult_constant: float | None = 1.0,
    mult_exponent: float | None = None,
) -> SpectrumModel:
    """E_k = k**p.  The default (p=2, alpha=1, C_E=1.5) is the reference model."""
    if mult_exponent is None:
        mult_exponent = p
    return SpectrumModel(
        energy_fn=lambda ks: ks.astype(float) ** p,
        alpha=alpha,
        gap_constant=gap_constant,
        mult_constant=mult_constant,
        mult_exponent=mult_exponent,
        label=f"power(p={p})",
    )


def geometric_spectrum(
    base: float = 2.0,
    alpha: float = 1.0,
    gap_constant: float = 1.0,
    mult_constant: float | None = 1.0,
    mult_exponent: float | None = None,
) -> SpectrumModel:
    """E_k = base**k, the canonical example for the exponential growth condition."""
    if mult_exponent is None:
        mult_exponent = float(np.log(base))
    return SpectrumModel(
        energy_fn=lambda ks: base ** ks.astype(float),
        alpha=alpha,
        gap_constant=gap_constant,
        mult_constant=mult_constant,
        mult_exponent=mult_exponent,
        label=f"geometric(base={base})",
    )


def table_spectrum(
    values: Sequence[float],
    alpha: float = 1.0,
    gap_constant: float = 1.0,
    mult_constant: float | None = None,
    mult_exponent: float | None = None,
) -> SpectrumModel:
    """Explicit finite table E_1..E_K; requests beyond the table raise."""
    table = np.asarray(values, dtype=float)
    if table.ndim != 1 or table.size == 0:
        raise ValueError("table must be a non-empty 1-d sequence")
    if not np.all(np.diff(table) > 0):
        raise ValueError("table energies must be strictly increasing")
    return SpectrumModel(
        energy_fn=lambda ks: table[ks - 1],
        alpha=alpha,
        gap_constant=gap_constant,
        mult_constant=mult_constant,
        mult_exponent=mult_exponent,
        k_max=table.size,
        label=f"table(K={table.size})",
    )


@dataclass(frozen=True)
class FloquetGrid:
    """A spectrum model together with the drive frequency and the tracked index.

    ``eta`` is the distinguished lattice index whose quasi-energy
    F = omega*eta.n1 + E_{eta.n2} is followed under perturbation.
    """

    model: SpectrumModel
    omega: float
    eta: LatticeIndex

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        self.model.energy(self.eta.n2)  # eta must be inside the model range

    @property
    def f_eta(self) -> float:
        return self.omega * self.eta.n1 + self.model.energy(self.eta.n2)


@dataclass(frozen=True)
class TruncationWindow:
    """Finite rectangle |n1| <= n1_max, 1 <= n2 <= n2_max of the lattice.

    Lattice points are enumerated n1-major / n2-minor; ``index`` maps a
    lattice point to its flat position in that order.
    """

    n1_max: int
    n2_max: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.n1_max < 1 or self.n2_max < 1:
            raise ValueError("window extents must be >= 1")

    @property
    def size(self) -> int:
        return (2 * self.n1_max + 1) * self.n2_max

    @property
    def n1(self) -> np.ndarray:
        """n1 coordinate of every window point, in flat order."""
        if "n1" not in self._cache:
            vals = np.repeat(np.arange(-self.n1_max, self.n1_max + 1), self.n2_max)
            self._cache["n1"] = vals
        return self._cache["n1"]

    @property
    def n2(self) -> np.ndarray:
        """n2 coordinate of every window point, in flat order."""
        if "n2" not in self._cache:
            vals = np.tile(np.arange(1, self.n2_max + 1), 2 * self.n1_max + 1)
            self._cache["n2"] = vals
        return self._cache["n2"]

    def contains(self, n: LatticeIndex) -> bool:
        return abs(n.n1) <= self.n1_max and 1 <= n.n2 <= self.n2_max

    def index(self, n: LatticeIndex) -> int:
        if not self.contains(n):
            raise ValueError(f"{n} outside window {self.n1_max}x{self.n2_max}")
        return (n.n1 + self.n1_max) * self.n2_max + (n.n2 - 1)

    def point(self, idx: int) -> LatticeIndex:
        n1, rem = divmod(int(idx), self.n2_max)
        return LatticeIndex(n1 - self.n1_max, rem + 1)

    def __str__(self) -> str:  # used in CLI output headers
        return f"{self.n1_max}x{self.n2_max}"


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def floquet_value(grid: FloquetGrid, n: LatticeIndex) -> float:
    """Quasi-energy F_n = omega*n1 + E_{n2}."""
    return grid.omega * n.n1 + grid.model.energy(n.n2)


def detunings(grid: FloquetGrid, window: TruncationWindow) -> np.ndarray:
    """F_n - F for every window point, computed cancellation-free.

    The difference is assembled as omega*(n1 - eta1) + (E_{n2} - E_{eta2}) so
    that the entry at eta is exactly 0.0 and small detunings keep full
    precision.
    """
    if not window.contains(grid.eta):
        raise ValueError("window must contain the tracked index eta")
    e_rows = grid.model.energies(np.arange(1, window.n2_max + 1))
    e_eta = e_rows[grid.eta.n2 - 1]
    return grid.omega * (window.n1 - grid.eta.n1) + (e_rows[window.n2 - 1] - e_eta)


def gap_check(model: SpectrumModel, k_max: int) -> float:
    """min over 1 <= k <= k_max of (E_{k+1}-E_k)/(k+1)^alpha.

    Probes energies up to level k_max + 1 (table models must cover it).  The
    model satisfies the additive gap condition on the probed range iff the
    returned value is >= ``model.gap_constant``.
    """
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    ks = np.arange(1, k_max + 2)
    e = model.energies(ks)
    ratios = np.diff(e) / (ks[1:].astype(float) ** model.alpha)
    return float(ratios.min())


def pairwise_gap_bound(model: SpectrumModel, j: int, k: int) -> bool:
    """Check |E_j - E_k| >= C_E/(1+alpha) * |j-k| * max(j,k)^alpha for one pair."""
    if j == k:
        raise ValueError("pair must have j != k")
    ej, ek = model.energy(j), model.energy(k)
    lhs = abs(ej - ek)
    rhs = (
        model.gap_constant
        / (1.0 + model.alpha)
        * abs(j - k)
        * max(j, k) ** model.alpha
    )
    return bool(lhs >= rhs)


def multiplicative_check(model: SpectrumModel, variant: str, k_max: int) -> bool:
    """Check the multiplicative growth condition for all pairs j < k <= k_max.

    ``variant='power'`` checks E_k/E_j >= C_M (k/j)^mu; ``variant='exponential'``
    checks E_k/E_j >= C_M exp(mu (k-j)).
    """
    if model.mult_constant is None or model.mult_exponent is None:
        raise ValueError("model has no multiplicative constants (C_M, mu)")
    if variant not in ("power", "exponential"):
        raise ValueError(f"unknown variant {variant!r}")
    ks = np.arange(1, k_max + 1)
    e = model.energies(ks)
    c_m, mu = model.mult_constant, model.mult_exponent
    # all pairs j < k via broadcasting; windows are desk-scale so O(k_max^2) is fine
    ratio = e[None, :] / e[:, None]            # ratio[j-1, k-1] = E_k / E_j
    if variant == "power":
        bound = c_m * (ks[None, :] / ks[:, None]).astype(float) ** mu
    else:
        bound = c_m * np.exp(mu * (ks[None, :] - ks[:, None]).astype(float))
    mask = ks[:, None] < ks[None, :]
    return bool(np.all(ratio[mask] >= bound[mask] * (1.0 - 1e-12)))


def _kappa(a: int) -> int:
    """Smallest non-negative kappa with a <= 2**kappa - 1."""
    kappa = 0
    while a > 2**kappa - 1:
        kappa += 1
    return kappa


def decompose_spectrum(model: SpectrumModel, k_max: int) -> dict[int, list[int]]:
    """Partition the levels 1..k_max into the dyadic subsequences N(a).

    N(a) = {a + 2**(kappa(a)+k-1); k >= 1} with kappa(a) the smallest
    non-negative integer satisfying a <= 2**kappa(a) - 1.  The returned sets
    are pairwise disjoint and cover {1, .., k_max}; along each of them a
    power-law growth condition on the parent spectrum upgrades to an
    exponential one (with constants C_M/(a+1)^mu and mu*log 2).

    The ``model`` argument fixes the range check only; the partition itself
    is pure index combinatorics.
    """
    if model.k_max is not None and k_max > model.k_max:
        raise ModelRangeError(f"k_max={k_max} beyond model range {model.k_max}")
    out: dict[int, list[int]] = {}
    for a in range(0, k_max):
        members = []
        step = 2 ** _kappa(a)
        while a + step <= k_max:
            members.append(a + step)
            step *= 2
        if members:
            out[a] = members
    return out


def resonance_scan(grid: FloquetGrid, window: TruncationWindow) -> LatticeIndex | None:
    """Return a window index n != eta with F_n = F exactly, or None.

    Used by frequency diagnostics: an exact hit at double precision flags a
    resonant drive frequency.
    """
    d = detunings(grid, window)
    eta_idx = window.index(grid.eta)
    hits = np.flatnonzero(d == 0.0)
    for idx in hits:
        if idx != eta_idx:
            return window.point(int(idx))
    return None
