"""Perturbation-series coefficients, computed two independent ways.

The (asymptotic) expansions of the tracked eigenvalue and eigenvector,

    F(beta) = F + beta*l_1 + beta^2*l_2 + ...,
    f(beta) = f + beta*g_1 + beta^2*g_2 + ...,

are produced both by the textbook recursion (solving order by order with the
reduced resolvent) and by an explicit closed formula whose summands are
indexed by rooted trees.  The two routes share no code beyond the matrix
slice, so their agreement is the module's central cross-check.

Rooted N-trees are integer vectors nu of length N with |nu| = N-1 whose
suffix sums obey nu_k + ... + nu_N <= N-k for k >= 2; they are counted by the
Catalan numbers.  Every tree with N >= 2 splits uniquely as a shifted
concatenation of two smaller trees, which is exactly the recursion the closed
formula resums.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import HermiticityError, ResonanceError
from .perturbation import FourierPerturbation, build_slice
from .spectrum import FloquetGrid, TruncationWindow, detunings

__all__ = [
    "RootedTree",
    "enumerate_trees",
    "compose_trees",
    "decompose_tree",
    "SummandIndex",
    "summand_indices",
    "RSExpansion",
    "rs_recursive",
    "rs_tree_formula",
    "TailReport",
    "tail_diagnostic",
]

_MAX_TREE_ORDER = 12
_MAX_FORMULA_ORDER = 6
_REALITY_TOL = 1e-12


@dataclass(frozen=True)
class RootedTree:
    """A rooted N-tree encoded as its child-count vector nu."""

    nu: tuple[int, ...]

    def __post_init__(self):
        n = len(self.nu)
        if n == 0 or any(x < 0 for x in self.nu):
            raise ValueError(f"not a tree vector: {self.nu}")
        if sum(self.nu) != n - 1:
            raise ValueError(f"|nu| must equal N-1: {self.nu}")
        suffix = 0
        for k in range(n, 1, -1):  # positions N..2, 1-based
            suffix += self.nu[k - 1]
            if suffix > n - k:
                raise ValueError(f"suffix sum violates tree condition at {k}: {self.nu}")

    @property
    def order(self) -> int:
        return len(self.nu)


def enumerate_trees(n: int) -> list[RootedTree]:
    """All rooted N-trees for N = n (Catalan-many: 1, 1, 2, 5, 14, 42, ...)."""
    if not 1 <= n <= _MAX_TREE_ORDER:
        raise ValueError(f"tree order must lie in 1..{_MAX_TREE_ORDER}")
    results: list[RootedTree] = []

    def extend(pos: int, suffix: int, tail: tuple[int, ...]) -> None:
        # pos runs N..2; suffix is nu_pos + ... + nu_N so far
        if pos == 1:
            nu1 = n - 1 - suffix
            if nu1 >= 0:
                results.append(RootedTree((nu1,) + tail))
            return
        for value in range(0, n - pos - suffix + 1):
            extend(pos - 1, suffix + value, (value,) + tail)

    if n == 1:
        return [RootedTree((0,))]
    extend(n, 0, ())
    return results


def compose_trees(left: RootedTree, right: RootedTree) -> RootedTree:
    """Shifted concatenation (left, right) + (1, 0, ..., 0), again a tree."""
    nu = (left.nu[0] + 1,) + left.nu[1:] + right.nu
    return RootedTree(nu)


def decompose_tree(tree: RootedTree) -> tuple[RootedTree, RootedTree]:
    """Invert :func:`compose_trees`; the split is unique for every N >= 2."""
    n = tree.order
    if n < 2:
        raise ValueError("an order-1 tree has no decomposition")
    found: list[tuple[RootedTree, RootedTree]] = []
    for n_left in range(1, n):
        left_nu = (tree.nu[0] - 1,) + tree.nu[1:n_left]
        right_nu = tree.nu[n_left:]
        try:
            found.append((RootedTree(left_nu), RootedTree(right_nu)))
        except ValueError:
            continue
    if len(found) != 1:  # uniqueness is a theorem; failure means corrupted input
        raise AssertionError(f"expected exactly one split of {tree.nu}, got {len(found)}")
    return found[0]


@dataclass(frozen=True)
class SummandIndex:
    """One multi-index (N, nu, k(1..N), mu(1..N)) of the closed formula."""

    order: int                     # M, the expansion order
    tree: RootedTree
    k: tuple[int, ...]
    mu: tuple[tuple[int, ...], ...]


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All ways to write ``total`` as an ordered sum of ``parts`` positive ints."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def summand_indices(order: int, variant: str) -> Iterator[SummandIndex]:
    """Enumerate the formula's multi-indices for one expansion order.

    ``variant='eigenvalue'`` constrains k(1)+...+k(N)+N = order, the
    ``'eigenvector'`` variant uses order+1; in both cases |mu(j)| = k(j)+nu_j.
    """
    if variant not in ("eigenvalue", "eigenvector"):
        raise ValueError(f"unknown variant {variant!r}")
    budget = order if variant == "eigenvalue" else order + 1
    for n in range(1, budget // 2 + 1):
        for k_vec in _compositions(budget - n, n):
            for tree in enumerate_trees(n):
                mu_choices = [
                    list(_compositions(k_vec[j] + tree.nu[j], k_vec[j]))
                    for j in range(n)
                ]
                if any(not c for c in mu_choices):
                    continue
                idx = [0] * n
                while True:
                    yield SummandIndex(
                        order=order,
                        tree=tree,
                        k=k_vec,
                        mu=tuple(mu_choices[j][idx[j]] for j in range(n)),
                    )
                    j = n - 1
                    while j >= 0:
                        idx[j] += 1
                        if idx[j] < len(mu_choices[j]):
                            break
                        idx[j] = 0
                        j -= 1
                    if j < 0:
                        break


@dataclass
class RSExpansion:
    """Coefficients l_1..l_ell and vectors g_1..g_ell on one window."""

    ell: int
    lambdas: np.ndarray
    g_vectors: list[np.ndarray]
    window: TruncationWindow
    method: str
    diag_shift: float
    tail: "TailReport | None" = None


class _WindowProblem:
    """Shared window data: shifted matrix, source vector, diagonal resolvent."""

    def __init__(self, grid: FloquetGrid, v: FourierPerturbation,
                 window: TruncationWindow):
        self.window = window
        self.eta_idx = window.index(grid.eta)
        slice_ = build_slice(v, window)
        self.vmat = np.array(slice_.entries)
        d = detunings(grid, window)
        zeros = [int(i) for i in np.flatnonzero(d == 0.0) if int(i) != self.eta_idx]
        if zeros:
            raise ResonanceError(
                f"window contains an exact resonance at {window.point(zeros[0])}",
                index=window.point(zeros[0]),
            )
        # normalize so the tracked diagonal entry vanishes (pure spectral shift)
        self.diag_shift = float(np.real(self.vmat[self.eta_idx, self.eta_idx]))
        if self.diag_shift != 0.0:
            self.vmat[np.diag_indices_from(self.vmat)] -= self.diag_shift
        self.inv_d = np.zeros(window.size)
        mask = np.arange(window.size) != self.eta_idx
        self.inv_d[mask] = 1.0 / d[mask]
        self.qvf = np.array(self.vmat[:, self.eta_idx])
        self.qvf[self.eta_idx] = 0.0

    def gamma0(self, x: np.ndarray, power: int = 1) -> np.ndarray:
        return x * self.inv_d**power

    def vhat(self, x: np.ndarray) -> np.ndarray:
        out = self.vmat @ x
        out[self.eta_idx] = 0.0
        return out

    def as_real(self, value: complex, what: str) -> float:
        scale = max(1.0, abs(value))
        if abs(np.imag(value)) > _REALITY_TOL * scale:
            raise HermiticityError(f"{what} has imaginary part {np.imag(value)}")
        return float(np.real(value))


def rs_recursive(
    grid: FloquetGrid,
    v: FourierPerturbation,
    ell: int,
    window: TruncationWindow,
) -> RSExpansion:
    """Coefficients by the order-by-order recursion.

    g_M = -Gamma0 Vhat g_{M-1} + sum_{j<M} l_j Gamma0 g_{M-j} (the M = 1 step
    reads g_1 = -Gamma0 Q V f) and l_M = <Q V f, g_{M-1}>.  The tracked
    diagonal entry of V is shifted to zero first, which only translates the
    spectrum; the shift is recorded in the result.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    prob = _WindowProblem(grid, v, window)
    lambdas = np.zeros(ell)
    gs: list[np.ndarray] = []
    prev = None  # g_{M-1}; None encodes g_0 = f
    for order in range(1, ell + 1):
        if prev is None:
            lambdas[0] = 0.0  # <QVf, f> vanishes identically
            g = -prob.gamma0(prob.qvf)
        else:
            lambdas[order - 1] = prob.as_real(
                np.vdot(prob.qvf, prev), f"lambda_{order}"
            )
            g = -prob.gamma0(prob.vhat(prev))
            for j in range(1, order):
                g = g + lambdas[j - 1] * prob.gamma0(gs[order - j - 1])
        gs.append(g)
        prev = g
    return RSExpansion(
        ell=ell,
        lambdas=lambdas,
        g_vectors=gs,
        window=window,
        method="recursive",
        diag_shift=prob.diag_shift,
    )


class _WordCache:
    """Memoized evaluation of the resolvent words indexed by mu-tuples.

    ``vector(mu)`` is Gamma0^mu1 Vhat Gamma0^mu2 ... Vhat Gamma0^muk (Q V f);
    ``scalar(mu)`` is its inner product with Q V f.  The same words recur
    across many summands, so both are cached.
    """

    def __init__(self, prob: _WindowProblem):
        self.prob = prob
        self._vectors: dict[tuple[int, ...], np.ndarray] = {}
        self._scalars: dict[tuple[int, ...], complex] = {}

    def vector(self, mu: tuple[int, ...]) -> np.ndarray:
        if mu not in self._vectors:
            w = self.prob.qvf
            for i in range(len(mu) - 1, -1, -1):
                w = self.prob.gamma0(w, mu[i])
                if i > 0:
                    w = self.prob.vhat(w)
            self._vectors[mu] = w
        return self._vectors[mu]

    def scalar(self, mu: tuple[int, ...]) -> complex:
        if mu not in self._scalars:
            self._scalars[mu] = np.vdot(self.prob.qvf, self.vector(mu))
        return self._scalars[mu]


def rs_tree_formula(
    grid: FloquetGrid,
    v: FourierPerturbation,
    ell: int,
    window: TruncationWindow,
) -> RSExpansion:
    """Coefficients by the explicit tree-indexed formula (independent route).

    Each eigenvalue summand is (-1)^(M+N) times a product of N resolvent-word
    inner products; eigenvector summands carry sign (-1)^(M+N+1) and keep the
    first word as a vector factor.
    """
    if not 1 <= ell <= _MAX_FORMULA_ORDER:
        raise ValueError(f"ell must lie in 1..{_MAX_FORMULA_ORDER}")
    prob = _WindowProblem(grid, v, window)
    cache = _WordCache(prob)
    lambdas = np.zeros(ell)
    gs: list[np.ndarray] = []
    for order in range(1, ell + 1):
        lam = 0.0
        for s in summand_indices(order, "eigenvalue"):
            sign = -1.0 if (order + s.tree.order) % 2 else 1.0
            term = 1.0
            for mu_j in s.mu:
                term = term * cache.scalar(mu_j)
            lam = lam + sign * term
        lambdas[order - 1] = prob.as_real(lam, f"lambda_{order}")

        g = np.zeros(window.size, dtype=prob.vmat.dtype)
        for s in summand_indices(order, "eigenvector"):
            sign = -1.0 if (order + s.tree.order + 1) % 2 else 1.0
            weight = 1.0
            for mu_j in s.mu[1:]:
                weight = weight * cache.scalar(mu_j)
            g = g + sign * weight * cache.vector(s.mu[0])
        gs.append(g)
    return RSExpansion(
        ell=ell,
        lambdas=lambdas,
        g_vectors=gs,
        window=window,
        method="tree",
        diag_shift=prob.diag_shift,
    )


@dataclass(frozen=True)
class TailReport:
    """Cauchy differences of each coefficient along a window ladder."""

    windows: tuple[TruncationWindow, ...]
    lambdas: np.ndarray            # shape (len(windows), ell)
    diffs: np.ndarray              # shape (len(windows)-1, ell)
    converged: tuple[bool, ...]    # per coefficient, from the last difference


def tail_diagnostic(
    grid: FloquetGrid,
    v: FourierPerturbation,
    ell: int,
    windows: Sequence[TruncationWindow],
) -> TailReport:
    """Track coefficient movement across an increasing window ladder.

    The final Cauchy difference below 1e-8 relative marks a coefficient as
    converged at the probed resolution; no rate is asserted.
    """
    if len(windows) < 1:
        raise ValueError("need at least one window")
    for prev, cur in zip(windows, windows[1:]):
        if cur.n1_max < prev.n1_max or cur.n2_max < prev.n2_max:
            raise ValueError("window ladder must be increasing")
    rows = [rs_recursive(grid, v, ell, w).lambdas for w in windows]
    lam = np.vstack(rows)
    diffs = np.abs(np.diff(lam, axis=0)) if len(windows) > 1 else np.zeros((0, ell))
    if diffs.shape[0]:
        last = diffs[-1]
        converged = tuple(
            bool(d == 0.0 or d < 1e-8 * abs(val))
            for d, val in zip(last, lam[-1])
        )
    else:
        converged = tuple([True] * ell)
    return TailReport(
        windows=tuple(windows), lambdas=lam, diffs=diffs, converged=converged
    )
