"""Periodic perturbations as time-Fourier coefficient tables.

A perturbation is specified by its coefficient function V(k, p, q) where k is
the time-harmonic index and p, q are spatial levels; the lattice matrix entry
is V_{mn} = V(n1-m1, m2, n2).  Hermiticity means conj(V(k,p,q)) = V(-k,q,p).

Operator norms on truncation windows are always reported through the
Schur-Holmgren surrogate max(row sums, column sums) of absolute entries,
which dominates the true operator norm and is cheap and monotone in the
window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import HermiticityError, ResonanceError, SmoothnessError
from .spectrum import LatticeIndex, SpectrumModel, TruncationWindow

__all__ = [
    "FourierPerturbation",
    "MatrixSlice",
    "matrix_entry",
    "ad_power_entry",
    "build_slice",
    "ad_matrix",
    "schur_norm_matrix",
    "schur_norm",
    "DecayReport",
    "decay_check",
    "band_perturbation",
    "xi_weight",
    "counterexample_perturbation",
    "divergence_partial_sum",
    "CutoffStats",
    "cutoff_mean_estimate",
    "CovarianceStats",
    "cutoff_covariance",
]

_HERM_TOL = 1e-12


@dataclass
class FourierPerturbation:
    """Coefficient function V(k, p, q) with declared smoothness and band limit.

    ``smoothness`` is the largest commutator power the perturbation claims to
    support (time regularity order r); ``band_limit`` means the coefficients
    vanish for |k| beyond it (None: no a-priori cutoff).  ``block_fn``, when
    provided, builds the whole spatial block for one harmonic k in a single
    vectorized call and must agree with ``coeff`` pointwise.
    """

    coeff: Callable[[int, int, int], complex]
    smoothness: int
    band_limit: int | None = None
    label: str = ""
    block_fn: Callable[[int, int], np.ndarray] | None = None
    is_real: bool = True
    _blocks: dict = field(default_factory=dict, repr=False, compare=False)

    def block(self, k: int, n2_max: int) -> np.ndarray:
        """Spatial block C_k[p-1, q-1] = V(k, p, q) for levels 1..n2_max.

        Blocks are cached; the block for -k is the exact conjugate transpose
        of the block for k, so assembled slices are Hermitian to the last bit.
        """
        if self.band_limit is not None and abs(k) > self.band_limit:
            return np.zeros((n2_max, n2_max), dtype=complex)
        key = (abs(k), n2_max)
        if key not in self._blocks:
            self._blocks[key] = self._build_block(abs(k), n2_max)
        block = self._blocks[key]
        return block if k >= 0 else block.conj().T

    def _build_block(self, k: int, n2_max: int) -> np.ndarray:
        if self.block_fn is not None:
            raw = np.asarray(self.block_fn(k, n2_max), dtype=complex)
        else:
            raw = np.empty((n2_max, n2_max), dtype=complex)
            for p in range(1, n2_max + 1):
                for q in range(1, n2_max + 1):
                    raw[p - 1, q - 1] = self.coeff(k, p, q)
        if k == 0:
            # the k = 0 block must itself be Hermitian; enforce exactly after
            # validating the declared symmetry
            scale = max(1.0, float(np.abs(raw).max()))
            if not np.allclose(raw, raw.conj().T, atol=_HERM_TOL * scale, rtol=0):
                raise HermiticityError(
                    f"{self.label or 'perturbation'}: k=0 block violates "
                    "conj(V(0,p,q)) = V(0,q,p)"
                )
            upper = np.triu(raw)
            raw = upper + np.triu(raw, 1).conj().T
        return raw


@dataclass(frozen=True)
class MatrixSlice:
    """Dense window matrix of a perturbation, Hermitian as an array."""

    window: TruncationWindow
    entries: np.ndarray

    def __post_init__(self):
        n = self.window.size
        if self.entries.shape != (n, n):
            raise ValueError(f"entries shape {self.entries.shape} != window size {n}")

    def index(self, n: LatticeIndex) -> int:
        return self.window.index(n)

    def entry(self, m: LatticeIndex, n: LatticeIndex) -> complex:
        return complex(self.entries[self.index(m), self.index(n)])


def matrix_entry(v: FourierPerturbation, m: LatticeIndex, n: LatticeIndex) -> complex:
    """Single lattice entry V_{mn} = V(n1-m1, m2, n2)."""
    return complex(v.coeff(n.n1 - m.n1, m.n2, n.n2))


def ad_power_entry(
    v: FourierPerturbation, j: int, m: LatticeIndex, n: LatticeIndex
) -> complex:
    """(m1-n1)**j * V_{mn}, the entry of the j-fold drive-derivative commutator."""
    if j < 0:
        raise ValueError("commutator power must be >= 0")
    if j > v.smoothness:
        raise SmoothnessError(
            f"commutator power {j} exceeds declared smoothness {v.smoothness}"
        )
    return (m.n1 - n.n1) ** j * matrix_entry(v, m, n)


def build_slice(v: FourierPerturbation, window: TruncationWindow) -> MatrixSlice:
    """Assemble the dense window matrix of ``v`` (block Toeplitz in n1)."""
    n2m = window.n2_max
    width = 2 * window.n1_max + 1
    dtype = float if v.is_real else complex
    out = np.zeros((window.size, window.size), dtype=dtype)
    k_hi = 2 * window.n1_max
    if v.band_limit is not None:
        k_hi = min(k_hi, v.band_limit)
    for k in range(-k_hi, k_hi + 1):
        blk = v.block(k, n2m)
        if not blk.any():
            continue
        blk = blk.real if v.is_real else blk
        for a in range(width):          # row group at n1 = a - n1_max
            b = a + k                   # column group at n1 + k
            if 0 <= b < width:
                out[a * n2m:(a + 1) * n2m, b * n2m:(b + 1) * n2m] = blk
    return MatrixSlice(window=window, entries=out)


def ad_matrix(entries: np.ndarray, window: TruncationWindow, j: int) -> np.ndarray:
    """Entrywise (m1-n1)**j scaling of a window matrix."""
    if j == 0:
        return entries
    delta = window.n1[:, None] - window.n1[None, :]
    return entries * (delta.astype(float) ** j)


def schur_norm_matrix(a: np.ndarray) -> float:
    """max(max row sum, max column sum) of |a| -- an operator-norm upper bound."""
    mags = np.abs(a)
    return float(max(mags.sum(axis=1).max(), mags.sum(axis=0).max()))


def schur_norm(v: FourierPerturbation, window: TruncationWindow, j: int = 0) -> float:
    """Schur-Holmgren surrogate for the norm of the j-fold commutator on the window."""
    if j > v.smoothness:
        raise SmoothnessError(
            f"commutator power {j} exceeds declared smoothness {v.smoothness}"
        )
    entries = build_slice(v, window).entries
    return schur_norm_matrix(ad_matrix(entries, window, j))


@dataclass(frozen=True)
class DecayReport:
    """Outcome of an entrywise decay check |V_mn| <= C (1+|m1-n1|)^-r."""

    r: int
    constant: float
    worst_ratio: float
    worst_pair: tuple[LatticeIndex, LatticeIndex] | None
    passed: bool
    window: TruncationWindow
    reference: TruncationWindow


def decay_check(
    v: FourierPerturbation,
    window: TruncationWindow,
    r: int,
    reference: TruncationWindow | None = None,
) -> DecayReport:
    """Probe the off-diagonal decay implied by r-fold time differentiability.

    The constant C = max(||V||, 2**r ||ad^r V||) is calibrated with Schur
    surrogates on the ``reference`` window (default: the probe window itself)
    and the inequality |V_mn| <= C (1+|m1-n1|)^-r is then tested entrywise on
    ``window``.  A genuinely r-smooth perturbation keeps the worst ratio <= 1
    however far the probe window extends beyond the reference; a rougher one
    is exposed by ratios above 1 once the probe outruns the calibration.

    The check reads entries directly, so it can probe claimed smoothness
    beyond the declared order.
    """
    ref = reference if reference is not None else window
    ref_entries = build_slice(v, ref).entries
    s0 = schur_norm_matrix(ref_entries)
    sr = schur_norm_matrix(ad_matrix(ref_entries, ref, r))
    constant = max(s0, 2.0**r * sr)

    entries = np.abs(build_slice(v, window).entries)
    if constant == 0.0:
        passed = not entries.any()
        return DecayReport(r, 0.0, 0.0 if passed else math.inf, None, passed,
                           window, ref)
    delta = np.abs(window.n1[:, None] - window.n1[None, :])
    ratio = entries * (1.0 + delta.astype(float)) ** r / constant
    flat = int(np.argmax(ratio))
    mi, ni = divmod(flat, window.size)
    worst = float(ratio[mi, ni])
    return DecayReport(
        r=r,
        constant=float(constant),
        worst_ratio=worst,
        worst_pair=(window.point(mi), window.point(ni)),
        passed=bool(worst <= 1.0 + 1e-12),
        window=window,
        reference=ref,
    )


# ---------------------------------------------------------------------------
# Ready-made perturbations
# ---------------------------------------------------------------------------

def band_perturbation(
    amplitude: float = 0.2,
    band_limit: int = 1,
    spatial_decay: float = 2.0,
    include_k0: bool = True,
    smoothness: int = 64,
    label: str = "",
) -> FourierPerturbation:
    """Real band-limited perturbation with power-law spatial decay.

    V(k,p,q) = amplitude * (1+|p-q|)^-spatial_decay for 1 <= |k| <= band_limit,
    and the same profile at k = 0 off the spatial diagonal when ``include_k0``.
    The k = 0 spatial diagonal is identically zero, so <V f, f> = 0 for any
    tracked index without further normalization.
    """

    def coeff(k: int, p: int, q: int) -> complex:
        if abs(k) > band_limit:
            return 0.0
        if k == 0 and (p == q or not include_k0):
            return 0.0
        return amplitude * (1.0 + abs(p - q)) ** (-spatial_decay)

    def block_fn(k: int, n2_max: int) -> np.ndarray:
        lv = np.arange(1, n2_max + 1)
        prof = amplitude * (1.0 + np.abs(lv[:, None] - lv[None, :])) ** (-spatial_decay)
        if k == 0:
            if not include_k0:
                return np.zeros((n2_max, n2_max))
            np.fill_diagonal(prof, 0.0)
        return prof

    return FourierPerturbation(
        coeff=coeff,
        smoothness=smoothness,
        band_limit=band_limit,
        label=label or f"band(|k|<={band_limit}, amp={amplitude})",
        block_fn=block_fn,
        is_real=True,
    )


def xi_weight(k: int | np.ndarray) -> np.ndarray | float:
    """The summable weight sequence 1 / (k * log^2(k+1))."""
    ks = np.asarray(k, dtype=float)
    out = 1.0 / (ks * np.log(ks + 1.0) ** 2)
    return out if out.ndim else float(out)


def counterexample_perturbation(
    model: SpectrumModel,
    omega: float,
    xi: Callable[[np.ndarray], np.ndarray] = xi_weight,
) -> FourierPerturbation:
    """Strongly continuous perturbation whose second-order coefficient diverges.

    Off the spatial diagonal the only nonzero harmonic of the (p,q) channel
    sits at |k| equal to the integer part of |E_p - E_q| / omega, with value
    sqrt(xi_p xi_q); on the spatial diagonal the k = 0 coefficient is 2 xi_p.
    The resulting operator is Hilbert-Schmidt but only strongly continuous in
    time, so its matrix shows no off-diagonal decay in n1.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")

    def coeff(k: int, p: int, q: int) -> complex:
        if p == q:
            return 2.0 * float(xi(np.asarray([p]))[0]) if k == 0 else 0.0
        ep, eq = model.energy(p), model.energy(q)
        target = int(abs(ep - eq) / omega)
        if abs(k) != target:
            return 0.0
        xs = xi(np.asarray([p, q]))
        return math.sqrt(float(xs[0]) * float(xs[1]))

    def block_fn(k: int, n2_max: int) -> np.ndarray:
        lv = np.arange(1, n2_max + 1)
        e = model.energies(lv)
        xs = np.asarray(xi(lv), dtype=float)
        target = np.floor(np.abs(e[:, None] - e[None, :]) / omega).astype(np.int64)
        amp = np.sqrt(xs[:, None] * xs[None, :])
        out = np.where(target == abs(k), amp, 0.0)
        np.fill_diagonal(out, 2.0 * xs if k == 0 else 0.0)
        return out

    return FourierPerturbation(
        coeff=coeff,
        smoothness=0,
        band_limit=None,
        label="resonant-comb counterexample",
        block_fn=block_fn,
        is_real=True,
    )


def divergence_partial_sum(
    model: SpectrumModel,
    omega: float,
    eta2: int,
    n_terms: int,
    xi: Callable[[np.ndarray], np.ndarray] = xi_weight,
) -> float:
    """Partial sum over eta2 < k <= n_terms of xi_k / frac((E_k - E_eta2)/omega).

    This lower-bounds the divergent part of the second-order coefficient of
    the resonant-comb perturbation.  Fractional parts below 1e-15 are treated
    as exact resonances and reported instead of summed.
    """
    if n_terms <= eta2:
        raise ValueError("n_terms must exceed eta2")
    ks = np.arange(eta2 + 1, n_terms + 1)
    e = model.energies(ks)
    e_eta = model.energy(eta2)
    frac = np.mod((e - e_eta) / omega, 1.0)
    bad = np.flatnonzero(frac < 1e-15)
    if bad.size:
        k_bad = int(ks[bad[0]])
        raise ResonanceError(
            f"fractional part vanishes at k={k_bad}; omega resonates with the spectrum",
            index=k_bad,
        )
    return float(np.sum(np.asarray(xi(ks), dtype=float) / frac))


# ---------------------------------------------------------------------------
# Monte Carlo statistics of the cutoff reciprocal-fractional-part variables
# ---------------------------------------------------------------------------

def _resolve_h(h, k: int) -> float:
    if callable(h):
        return float(h(k))
    return float(h[k - 1])


def _rng(seed: int) -> np.random.Generator:
    # counter-based generator: reproducible and cheap to split by task
    return np.random.Generator(np.random.Philox(seed))


def _cutoff_values(zeta: np.ndarray, h_k: float, k: int, theta: float) -> np.ndarray:
    frac = np.mod(h_k * zeta, 1.0)
    out = np.zeros_like(zeta)
    mask = frac > k ** (-theta)
    out[mask] = 1.0 / frac[mask]
    return out


@dataclass(frozen=True)
class CutoffStats:
    """Monte Carlo estimate of the mean of one cutoff variable."""

    mean: float
    stderr: float
    second_moment: float
    second_stderr: float
    samples: int
    seed: int


def cutoff_mean_estimate(
    h, k: int, theta: float, samples: int, seed: int
) -> CutoffStats:
    """Estimate E(Y_k) for Y_k(z) = 1/frac(h_k z) cut off above the level k^theta.

    ``h`` is the scale sequence (sequence indexed from k = 1, or a callable);
    zeta is sampled uniformly on [0, 1].  For scales obeying an exponential
    growth condition the mean approaches theta*log k with bias at most
    theta*log(k)/h_k.
    """
    if not 0.0 < theta < 0.5:
        raise ValueError("theta must lie in (0, 1/2)")
    h_k = _resolve_h(h, k)
    if h_k < 1.0:
        raise ValueError("scales h_k must be >= 1")
    zeta = _rng(seed).random(samples)
    y = _cutoff_values(zeta, h_k, k, theta)
    mean = float(y.mean())
    stderr = float(y.std(ddof=1) / math.sqrt(samples))
    y2 = y * y
    return CutoffStats(
        mean=mean,
        stderr=stderr,
        second_moment=float(y2.mean()),
        second_stderr=float(y2.std(ddof=1) / math.sqrt(samples)),
        samples=samples,
        seed=seed,
    )


@dataclass(frozen=True)
class CovarianceStats:
    """Monte Carlo covariance of two cutoff variables sampled at the same zeta."""

    cov: float
    stderr: float
    mean_j: float
    mean_k: float
    samples: int
    seed: int


def cutoff_covariance(
    h, j: int, k: int, theta: float, samples: int, seed: int
) -> CovarianceStats:
    """Estimate cov(Y_j, Y_k) with both variables driven by one uniform zeta."""
    if not 0.0 < theta < 0.5:
        raise ValueError("theta must lie in (0, 1/2)")
    zeta = _rng(seed).random(samples)
    yj = _cutoff_values(zeta, _resolve_h(h, j), j, theta)
    yk = _cutoff_values(zeta, _resolve_h(h, k), k, theta)
    prod = (yj - yj.mean()) * (yk - yk.mean())
    # ddof=1 matches the unbiased sample covariance
    cov = float(prod.sum() / (samples - 1))
    stderr = float(prod.std(ddof=1) / math.sqrt(samples))
    return CovarianceStats(
        cov=cov,
        stderr=stderr,
        mean_j=float(yj.mean()),
        mean_k=float(yk.mean()),
        samples=samples,
        seed=seed,
    )
