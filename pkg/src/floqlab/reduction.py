"""Critical indices, the effective window operator, and the reduced solver.

The lattice points whose quasi-energy detuning F_n - F falls in the half-open
interval ]-omega/2, omega/2] are the only candidates for dangerous small
denominators; there is at most one per spatial row and none in the tracked
row.  Eliminating the complementary "regular" points produces an effective
operator W(beta, lambda) on the critical block, a diagonal compensation pair
(v_n, w_n), and an explicit solution of the eigenvector equation

    (K_hat + beta*V_hat - F - lambda) g = -beta V f

whenever (beta, lambda) respects the coupling box and the small-denominator
floor psi_tilde.  All operators here are realized on truncation windows;
resolvent input is applied as diagonal scalings, W by a dense LU solve, and
every norm is the Schur row/column surrogate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .diophantine import DiophantineProfile
from .errors import (
    ConditioningError,
    ContractionError,
    DomainError,
    HermiticityError,
    InequalityError,
    ResonanceError,
)
from .perturbation import (
    FourierPerturbation,
    MatrixSlice,
    ad_matrix,
    build_slice,
    schur_norm_matrix,
)
from .spectrum import FloquetGrid, LatticeIndex, TruncationWindow, detunings

__all__ = [
    "CriticalSet",
    "critical_set",
    "DistanceReport",
    "distance_checks",
    "projector_bounds",
    "W_slice",
    "v_n",
    "v_tail_bound",
    "w_n",
    "domain_condition",
    "zeta_fn",
    "C_g",
    "ReducedState",
    "ReductionWork",
    "assemble_reduced_state",
    "solve_eigenvector",
    "G_value",
    "partition_vectors",
    "ad_product_bound",
    "neumann_ad_bound",
    "w_ad_bound",
    "ltau_vector_bound",
    "ltau_block_bound",
]

_RESIDUAL_TOL = 1e-8
_SOLVE_TOL = 1e-9
_REALITY_TOL = 1e-12


# ---------------------------------------------------------------------------
# Critical set and elementary bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalSet:
    """Window points with detuning in ]-omega/2, omega/2], one per spatial row."""

    grid: FloquetGrid
    window: TruncationWindow
    members: dict[int, int]  # n2 -> n1

    def points(self) -> list[LatticeIndex]:
        return [LatticeIndex(n1, n2) for n2, n1 in sorted(self.members.items())]

    def indices(self) -> np.ndarray:
        return np.asarray(
            [self.window.index(p) for p in self.points()], dtype=np.int64
        )

    def __len__(self) -> int:
        return len(self.members)


def critical_set(grid: FloquetGrid, window: TruncationWindow) -> CriticalSet:
    """Collect the critical indices of the window by direct scan.

    Two hits in one spatial row are mathematically impossible (the interval
    has length omega and row detunings step by omega); such a hit signals a
    corrupted model and raises :class:`InequalityError`.
    """
    d = detunings(grid, window)
    half = grid.omega / 2.0
    mask = (d > -half) & (d <= half)
    mask[window.index(grid.eta)] = False
    members: dict[int, int] = {}
    for idx in np.flatnonzero(mask):
        n = window.point(int(idx))
        if n.n2 in members:
            raise InequalityError(
                f"two critical indices in row n2={n.n2}: {members[n.n2]} and {n.n1}"
            )
        members[n.n2] = n.n1
    if grid.eta.n2 in members:
        raise InequalityError("tracked row produced a critical index besides eta")
    return CriticalSet(grid=grid, window=window, members=members)


@dataclass(frozen=True)
class DistanceReport:
    """Worst slack (lhs - rhs) of the critical-set separation inequalities."""

    worst_pair_slack: float
    worst_eta_slack: float
    pairs_checked: int


def distance_checks(crit: CriticalSet) -> DistanceReport:
    """Verify the lattice separation forced on critical indices by the gap growth.

    For m, n critical: 1 + |m1-n1| >= C_E/(omega(1+alpha)) max(m2,n2)^alpha |m2-n2|,
    and the same inequality strictly against the tracked index.  A violation
    means the declared (C_E, alpha) do not actually bound the spectrum.
    """
    grid = crit.grid
    model = grid.model
    coef = model.gap_constant / (grid.omega * (1.0 + model.alpha))
    pts = crit.points()
    worst_pair = math.inf
    checked = 0
    for i, m in enumerate(pts):
        for n in pts[i + 1:]:
            lhs = 1.0 + abs(m.n1 - n.n1)
            rhs = coef * max(m.n2, n.n2) ** model.alpha * abs(m.n2 - n.n2)
            slack = lhs - rhs
            worst_pair = min(worst_pair, slack)
            checked += 1
            if slack < 0:
                raise InequalityError(
                    f"critical pair {m}, {n} violates the separation bound by {-slack}"
                )
    worst_eta = math.inf
    eta = grid.eta
    for m in pts:
        lhs = 1.0 + abs(m.n1 - eta.n1)
        rhs = coef * max(m.n2, eta.n2) ** model.alpha * abs(m.n2 - eta.n2)
        slack = lhs - rhs
        worst_eta = min(worst_eta, slack)
        if slack <= 0:
            raise InequalityError(
                f"critical index {m} violates the strict separation from eta by {-slack}"
            )
    return DistanceReport(
        worst_pair_slack=worst_pair, worst_eta_slack=worst_eta, pairs_checked=checked
    )


def projector_bounds(crit: CriticalSet) -> tuple[float, float]:
    """(max critical |F_n - F|, max regular 1/|F_n - F|) with their hard caps.

    The first never exceeds omega/2 and the second never exceeds 2/omega;
    both are asserted.  An exact resonance inside the critical set raises.
    """
    grid, window = crit.grid, crit.window
    d = detunings(grid, window)
    s_idx = crit.indices()
    if s_idx.size and np.any(d[s_idx] == 0.0):
        bad = crit.points()[int(np.flatnonzero(d[s_idx] == 0.0)[0])]
        raise ResonanceError(f"exact resonance at critical index {bad}", index=bad)
    norm_ks = float(np.abs(d[s_idx]).max()) if s_idx.size else 0.0
    mask = np.ones(window.size, dtype=bool)
    mask[s_idx] = False
    mask[window.index(grid.eta)] = False
    norm_g0pr = float((1.0 / np.abs(d[mask])).max()) if mask.any() else 0.0
    assert norm_ks <= grid.omega / 2.0 * (1 + 1e-12)
    assert norm_g0pr <= 2.0 / grid.omega * (1 + 1e-12)
    return norm_ks, norm_g0pr


# ---------------------------------------------------------------------------
# Shared per-(grid, V, window) machinery
# ---------------------------------------------------------------------------

class ReductionWork:
    """Immutable window data reused across many (beta, lambda) evaluations.

    Holds the Hermitian window matrix of V with its tracked diagonal entry
    shifted to zero (a pure spectral translation, recorded in ``diag_shift``),
    the detuning vector, the critical set, and the Schur norm of V.
    """

    def __init__(self, grid: FloquetGrid, v: FourierPerturbation,
                 window: TruncationWindow):
        self.grid = grid
        self.window = window
        self.eta_idx = window.index(grid.eta)
        self.vmat = np.array(build_slice(v, window).entries)
        self.diag_shift = float(np.real(self.vmat[self.eta_idx, self.eta_idx]))
        if self.diag_shift != 0.0:
            self.vmat[np.diag_indices_from(self.vmat)] -= self.diag_shift
        self.d = detunings(grid, window)
        self.crit = critical_set(grid, window)
        self.s_idx = self.crit.indices()
        self.s_points = self.crit.points()
        self.r_mask = np.ones(window.size, dtype=bool)
        self.r_mask[self.s_idx] = False
        self.r_mask[self.eta_idx] = False
        self.vnorm = schur_norm_matrix(self.vmat)
        self.vf = np.array(self.vmat[:, self.eta_idx])  # V f; eta entry is 0

    def check_box(self, beta: float, lam: float) -> None:
        """Enforce the coupling box |beta| <= omega/(12 ||V||), |lam| <= omega/3."""
        omega = self.grid.omega
        if self.vnorm > 0 and abs(beta) > omega / (12.0 * self.vnorm) * (1 + 1e-12):
            raise DomainError(
                f"|beta|={abs(beta)} outside the box omega/(12||V||)="
                f"{omega / (12.0 * self.vnorm)}"
            )
        if abs(lam) > self.grid.omega / 3.0 * (1 + 1e-12):
            raise DomainError(f"|lambda|={abs(lam)} exceeds omega/3")

    def gamma_r(self, lam: float) -> np.ndarray:
        """Diagonal of the regular-block resolvent (zero on critical and eta)."""
        out = np.zeros(self.window.size)
        out[self.r_mask] = 1.0 / (self.d[self.r_mask] - lam)
        return out

    def w_columns(self, beta: float, lam: float,
                  cols: np.ndarray | None = None) -> np.ndarray:
        """Columns of W = V (1 + beta Gamma_lam P_R V)^{-1} by dense LU solve."""
        gam = self.gamma_r(lam)
        m = beta * gam[:, None] * self.vmat
        m[np.diag_indices_from(m)] += 1.0
        lu = lu_factor(m)
        if cols is None:
            x = lu_solve(lu, np.eye(self.window.size, dtype=self.vmat.dtype))
        else:
            rhs = np.zeros((self.window.size, len(cols)), dtype=self.vmat.dtype)
            rhs[cols, np.arange(len(cols))] = 1.0
            x = lu_solve(lu, rhs)
        resid = m @ x
        if cols is None:
            resid[np.diag_indices_from(resid)] -= 1.0
        else:
            resid[cols, np.arange(len(cols))] -= 1.0
        worst = float(np.abs(resid).max())
        if worst > _SOLVE_TOL:
            raise ConditioningError(f"W solve residual {worst} above {_SOLVE_TOL}")
        return self.vmat @ x


def W_slice(
    grid: FloquetGrid,
    v: FourierPerturbation,
    beta: float,
    lam: float,
    window: TruncationWindow,
    work: ReductionWork | None = None,
) -> MatrixSlice:
    """Full effective operator W(beta, lambda) on the window.

    Raises :class:`DomainError` outside the coupling box and
    :class:`ConditioningError` when the dense solve fails its residual check.
    Its Schur norm never exceeds twice the Schur norm of V inside the box
    (asserted).
    """
    work = work or ReductionWork(grid, v, window)
    work.check_box(beta, lam)
    w = work.w_columns(beta, lam, cols=None)
    assert schur_norm_matrix(w) <= 2.0 * work.vnorm * (1 + 1e-9)
    return MatrixSlice(window=window, entries=w)


# ---------------------------------------------------------------------------
# Diagonal compensations
# ---------------------------------------------------------------------------

def v_n(
    grid: FloquetGrid,
    v: FourierPerturbation,
    n: LatticeIndex,
    lam: float,
    k_sum: int = 256,
) -> float:
    """Row compensation v_n(lam) = sum_k |V(k,n2,n2)|^2 / (omega^2 k^2 - (F_n-F-lam)^2).

    For |F_n - F| <= omega/2 and |lam| <= omega/3 every denominator is
    positive, so the sum is non-negative; band-limited perturbations make it
    exact once k_sum passes the band.
    """
    if abs(lam) > grid.omega / 3.0 * (1 + 1e-12):
        raise DomainError(f"|lambda|={abs(lam)} exceeds omega/3")
    dn = grid.omega * (n.n1 - grid.eta.n1) + (
        grid.model.energy(n.n2) - grid.model.energy(grid.eta.n2)
    )
    if abs(dn) > grid.omega / 2.0 * (1 + 1e-12):
        raise DomainError(f"{n} is not a critical index (detuning {dn})")
    k_hi = k_sum if v.band_limit is None else min(k_sum, v.band_limit)
    shift = dn - lam
    total = 0.0
    for k in range(1, k_hi + 1):
        c = v.coeff(k, n.n2, n.n2)
        if c == 0:
            continue
        total += abs(c) ** 2 / (grid.omega**2 * k**2 - shift**2)
    assert total >= 0.0
    return total


def v_tail_bound(vnorm: float, omega: float, k_sum: int) -> float:
    """Rigorous tail bound ||V||^2/omega^2 * sum_{k>k_sum} 1/(k^2-1) for v_n."""
    if k_sum < 2:
        raise ValueError("tail bound needs k_sum >= 2")
    # telescoping: sum_{k>K} 1/(k^2-1) = (1/K + 1/(K+1)) / 2
    tail = 0.5 * (1.0 / k_sum + 1.0 / (k_sum + 1))
    return vnorm**2 / omega**2 * tail


def w_n(state: "ReducedState", n: LatticeIndex) -> float:
    """Compensated diagonal w_n = (W_nn - 2 beta (F_n-F-lam) v_n) / (1 + 2 beta^2 v_n)."""
    if n not in state.w_diag:
        raise KeyError(f"{n} is not a critical index of the state's window")
    return state.w_comp[n]


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------

def zeta_fn(r: float) -> float:
    """Riemann zeta at r >= 2 by partial summation with an Euler-Maclaurin tail.

    The correction terms leave an error below 1e-14, which the acceptance
    tolerance of every consumer absorbs.
    """
    if r < 2:
        raise ValueError("zeta_fn requires r >= 2")
    cut = 50_000
    ks = np.arange(1, cut + 1, dtype=float)
    head = float(np.sum(ks ** (-r)))
    x = float(cut + 1)
    tail = x ** (1 - r) / (r - 1) + 0.5 * x ** (-r) + r * x ** (-r - 1) / 12.0
    tail -= r * (r + 1) * (r + 2) * x ** (-r - 3) / 720.0
    return head + tail


def C_g(
    grid: FloquetGrid,
    profile: DiophantineProfile,
    v: FourierPerturbation,
    window: TruncationWindow,
    r: int | None = None,
) -> float:
    """A-priori coupling constant (1/gamma) 32 zeta(r) r! (8 omega (1+alpha)/C_E)^r max_j ||ad^j V||.

    This is the sufficient-condition constant controlling the reduced Neumann
    series; at desk scale it is astronomically pessimistic, so solvers verify
    the contraction margin directly and report this value for context.
    """
    r = profile.r if r is None else r
    if r < 2:
        raise ValueError("C_g needs r >= 2")
    entries = build_slice(v, window).entries
    ad_max = max(
        schur_norm_matrix(ad_matrix(entries, window, j)) for j in range(r + 1)
    )
    if ad_max == 0.0:
        return 0.0
    model = grid.model
    base = 8.0 * grid.omega * (1.0 + model.alpha) / model.gap_constant
    return (
        32.0 * zeta_fn(r) * math.factorial(r) * base**r * ad_max / profile.gamma
    )


# ---------------------------------------------------------------------------
# Reduced state assembly
# ---------------------------------------------------------------------------

@dataclass
class ReducedState:
    """Everything the reduction produces at one (beta, lambda) point.

    ``g`` lives on the whole window with a zero entry at the tracked index;
    ``g_s`` is its critical block in the order of ``crit.points()``.  The
    ``in_domain`` verdict is the window-level small-denominator condition
    (diagonal-of-W variant) together with the coupling box; ``auto_rows`` is
    the spatial depth up to which the unperturbed floor alone already forces
    that condition, for tail reporting.
    """

    beta: float
    lam: float
    window: TruncationWindow
    crit: CriticalSet
    w_slice: MatrixSlice | None
    w_diag: dict[LatticeIndex, float]
    v_diag: dict[LatticeIndex, float]
    w_comp: dict[LatticeIndex, float]
    g_s: np.ndarray
    g: np.ndarray
    g_value: float
    residual: float
    contraction: float
    in_domain: bool | None
    in_domain_strong: bool | None
    diag_shift: float
    auto_rows: int


def _as_real(value, what: str) -> float:
    scale = max(1.0, abs(value))
    if abs(np.imag(value)) > _REALITY_TOL * scale:
        raise HermiticityError(f"{what} has imaginary part {np.imag(value)}")
    return float(np.real(value))


def domain_condition(
    state: ReducedState, profile: DiophantineProfile, variant: str = "standard"
) -> bool:
    """Small-denominator condition |F_n-F-lam + beta*X_n| >= psi_tilde(n2) on the window.

    ``variant='standard'`` uses X_n = W_nn, ``'strong'`` the compensated w_n;
    the strong variant implies the standard one because v_n >= 0.
    """
    if variant not in ("standard", "strong"):
        raise ValueError(f"unknown variant {variant!r}")
    d = detunings(state.crit.grid, state.window)
    ok = True
    for n in state.crit.points():
        dn = d[state.window.index(n)] - state.lam
        x = state.w_diag[n] if variant == "standard" else state.w_comp[n]
        if abs(dn + state.beta * x) < profile.psi_tilde(n.n2):
            ok = False
            break
    return ok


def _auto_rows(profile: DiophantineProfile, beta: float, lam: float,
               vnorm: float) -> int:
    """Largest spatial depth where gamma k^-sigma / 2 >= |lam| + 2|beta| ||V||."""
    drive = abs(lam) + 2.0 * abs(beta) * vnorm
    if drive == 0.0:
        return 10**9
    k = (profile.gamma / (2.0 * drive)) ** (1.0 / profile.sigma)
    return max(0, math.floor(k))


def assemble_reduced_state(
    grid: FloquetGrid,
    v: FourierPerturbation,
    beta: float,
    lam: float,
    profile: DiophantineProfile,
    window: TruncationWindow,
    full_w: bool = False,
    work: ReductionWork | None = None,
) -> ReducedState:
    """Run the whole reduction at one (beta, lambda) point.

    Builds the needed columns of W, the diagonal compensations, the solved
    critical block g_s, the full correction g, and the coupling functional
    G = beta <V f, g>.  Raises :class:`DomainError` outside the coupling box
    and :class:`ContractionError` when the critical-block Neumann margin
    reaches 1/2.
    """
    work = work or ReductionWork(grid, v, window)
    work.check_box(beta, lam)
    n_s = len(work.s_idx)
    cols = np.concatenate([work.s_idx, [work.eta_idx]])
    w_cols = work.w_columns(beta, lam, cols=cols)
    w_slice = None
    if full_w:
        w_full = work.w_columns(beta, lam, cols=None)
        assert schur_norm_matrix(w_full) <= 2.0 * work.vnorm * (1 + 1e-9)
        w_slice = MatrixSlice(window=window, entries=w_full)
    wf = w_cols[:, -1]                       # W f
    w_s_block = w_cols[np.ix_(work.s_idx, np.arange(n_s))]
    w_diag_vals = np.real(np.diag(w_s_block)) if n_s else np.zeros(0)

    v_vals = np.array([v_n(grid, v, n, lam) for n in work.s_points])
    d_s = work.d[work.s_idx] - lam
    w_diag = {}
    v_diag = {}
    w_comp = {}
    for i, n in enumerate(work.s_points):
        w_diag[n] = _as_real(w_s_block[i, i], f"W diagonal at {n}")
        v_diag[n] = float(v_vals[i])
        tilde = w_diag[n] - 2.0 * beta * d_s[i] * v_vals[i]
        w_comp[n] = tilde / (1.0 + 2.0 * beta**2 * v_vals[i])

    # critical-block resolvent and contraction margin
    if n_s:
        denom = d_s + beta * w_diag_vals
        if np.any(denom == 0.0):
            bad = work.s_points[int(np.flatnonzero(denom == 0.0)[0])]
            raise ResonanceError(f"vanishing reduced denominator at {bad}", index=bad)
        gam_s = 1.0 / denom
        w_off = np.array(w_s_block)
        w_off[np.diag_indices_from(w_off)] = 0.0
        contraction = abs(beta) * schur_norm_matrix(gam_s[:, None] * w_off)
        if contraction > 0.5:
            raise ContractionError(
                f"critical-block margin |beta Gamma W_off| = {contraction} exceeds 1/2"
            )
        a = beta * gam_s[:, None] * w_off
        a[np.diag_indices_from(a)] += 1.0
        g_s = np.linalg.solve(a, -beta * gam_s * wf[work.s_idx])
    else:
        contraction = 0.0
        g_s = np.zeros(0, dtype=work.vmat.dtype)

    # extend to the full window: g = g_S - beta Gamma_lam P_R W (g_S + f)
    g = np.zeros(window.size, dtype=work.vmat.dtype)
    if n_s:
        g[work.s_idx] = g_s
        w_gs = w_cols[:, :n_s] @ g_s
    else:
        w_gs = np.zeros(window.size, dtype=work.vmat.dtype)
    gam_r = work.gamma_r(lam)
    g = g - beta * gam_r * (w_gs + wf)

    # residual of the eigenvector equation on the window
    qvg = work.vmat @ g
    qvg[work.eta_idx] = 0.0
    resid_vec = (work.d - lam) * g + beta * qvg + beta * work.vf
    resid_vec[work.eta_idx] = 0.0
    residual = float(np.linalg.norm(resid_vec))
    g_norm = float(np.linalg.norm(g))
    if residual > _RESIDUAL_TOL * (1.0 + g_norm):
        raise ConditioningError(
            f"eigenvector residual {residual} above {_RESIDUAL_TOL}*(1+||g||)"
        )

    g_value = _as_real(beta * np.vdot(work.vf, g), "coupling functional")

    state = ReducedState(
        beta=beta,
        lam=lam,
        window=window,
        crit=work.crit,
        w_slice=w_slice,
        w_diag=w_diag,
        v_diag=v_diag,
        w_comp=w_comp,
        g_s=g_s,
        g=g,
        g_value=g_value,
        residual=residual,
        contraction=contraction,
        in_domain=None,
        in_domain_strong=None,
        diag_shift=work.diag_shift,
        auto_rows=_auto_rows(profile, beta, lam, work.vnorm),
    )
    state.in_domain = domain_condition(state, profile, "standard")
    state.in_domain_strong = domain_condition(state, profile, "strong")
    if state.in_domain_strong and not state.in_domain:
        raise AssertionError("strong condition held where the standard one failed")
    return state


def solve_eigenvector(
    grid: FloquetGrid,
    v: FourierPerturbation,
    beta: float,
    lam: float,
    profile: DiophantineProfile,
    window: TruncationWindow,
    work: ReductionWork | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Solve the eigenvector equation at (beta, lambda); returns (g_s, g, residual).

    Requires the window-level small-denominator condition; apart from the
    box, the binding constraint is the directly verified contraction margin
    |beta Gamma W_off| <= 1/2 on the critical block.
    """
    state = assemble_reduced_state(grid, v, beta, lam, profile, window, work=work)
    if not state.in_domain:
        raise DomainError(
            f"(beta, lambda)=({beta}, {lam}) violates the small-denominator condition"
        )
    return state.g_s, state.g, state.residual


def G_value(
    grid: FloquetGrid,
    v: FourierPerturbation,
    g: np.ndarray,
    beta: float,
    window: TruncationWindow,
    work: ReductionWork | None = None,
) -> float:
    """Coupling functional G(beta, lambda) = beta <V f, g> for a solved correction.

    The value must be real (self-adjointness); an imaginary part beyond
    tolerance raises :class:`HermiticityError`.  States assembled by
    :func:`assemble_reduced_state` carry the same number as ``g_value``.
    """
    work = work or ReductionWork(grid, v, window)
    return _as_real(beta * np.vdot(work.vf, g), "coupling functional")


# ---------------------------------------------------------------------------
# Combinatorial norm bounds (window checks)
# ---------------------------------------------------------------------------

def partition_vectors(r: int) -> Iterator[tuple[int, ...]]:
    """All nu in Z_+^r with 1*nu_1 + 2*nu_2 + ... + r*nu_r = r."""

    def rec(j: int, remaining: int, acc: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
        if j > r:
            if remaining == 0:
                yield acc
            return
        for count in range(remaining // j + 1):
            yield from rec(j + 1, remaining - j * count, acc + (count,))

    yield from rec(1, r, ())


def _falling(p: int, m: int) -> float:
    out = 1.0
    for i in range(m):
        out *= p - i
    return out


def ad_product_bound(
    x: np.ndarray,
    window: TruncationWindow,
    b_diags: Sequence[np.ndarray],
    r: int,
) -> tuple[float, float]:
    """(lhs, rhs) of the product-commutator bound on the window.

    lhs is the Schur norm of ad^r(X B_1 X ... B_{p-1} X) for diagonal B_i
    (which commute with the drive-index operator); rhs is the combinatorial
    majorant: prod ||B_i|| * sum over partition vectors nu of
    r!/prod((j!)^nu_j nu_j!) * falling(p,|nu|) * ||X||^(p-|nu|) * prod ||ad^j X||^nu_j.
    The inequality holds verbatim for Schur norms because they are
    submultiplicative and exact on diagonals.
    """
    p = len(b_diags) + 1
    prod = np.array(x)
    for b in b_diags:
        prod = prod * b[None, :]       # right-multiply by diag(b)
        prod = prod @ x
    lhs = schur_norm_matrix(ad_matrix(prod, window, r))

    s_x = [schur_norm_matrix(ad_matrix(x, window, j)) for j in range(r + 1)]
    rhs = 1.0
    for b in b_diags:
        rhs *= float(np.abs(b).max())
    total = 0.0
    for nu in partition_vectors(r):
        size = sum(nu)
        if size > p:
            continue
        coeff = math.factorial(r)
        for j, nj in enumerate(nu, start=1):
            coeff //= math.factorial(j) ** nj * math.factorial(nj)
        term = coeff * _falling(p, size) * s_x[0] ** (p - size)
        for j, nj in enumerate(nu, start=1):
            term *= s_x[j] ** nj
        total += term
    return lhs, rhs * total


def neumann_ad_bound(
    x: np.ndarray,
    window: TruncationWindow,
    b_diag: np.ndarray,
    p: int,
) -> tuple[float, float]:
    """(lhs, rhs) of the commutator bound for the Neumann-resummed X (1-BX)^{-1}.

    Hypotheses ||B|| ||X|| < 1 and ||B|| max_{1<=j<=p} ||ad^j X|| <= 1 are
    required (in Schur norms); the majorant is
    p! (2^{p+1}-1) / (1-||B|| ||X||)^{p+1} * max_{0<=j<=p} ||ad^j X||.
    """
    s_b = float(np.abs(b_diag).max())
    s_x = [schur_norm_matrix(ad_matrix(x, window, j)) for j in range(p + 1)]
    if s_b * s_x[0] >= 1.0:
        raise ContractionError(f"||B|| ||X|| = {s_b * s_x[0]} >= 1")
    if p >= 1 and s_b * max(s_x[1:]) > 1.0 + 1e-12:
        raise ContractionError("||B|| max ||ad^j X|| exceeds 1")
    n = window.size
    resolvent = np.linalg.solve(np.eye(n, dtype=x.dtype) - b_diag[:, None] * x,
                                np.eye(n, dtype=x.dtype))
    lhs = schur_norm_matrix(ad_matrix(x @ resolvent, window, p))
    rhs = (
        math.factorial(p)
        * (2 ** (p + 1) - 1)
        / (1.0 - s_b * s_x[0]) ** (p + 1)
        * max(s_x)
    )
    return lhs, rhs


def w_ad_bound(
    grid: FloquetGrid,
    v: FourierPerturbation,
    beta: float,
    lam: float,
    window: TruncationWindow,
    r: int,
    work: ReductionWork | None = None,
) -> tuple[float, float]:
    """(lhs, rhs) of ||ad^r W(beta,lambda)|| <= r! 2^(2r+2) max_j ||ad^j V||.

    Valid inside the coupling box when additionally
    |beta| ||Gamma_lam P_R|| max_{1<=j<=r} ||ad^j V|| <= 1.
    """
    work = work or ReductionWork(grid, v, window)
    work.check_box(beta, lam)
    s_ad = [schur_norm_matrix(ad_matrix(work.vmat, window, j)) for j in range(r + 1)]
    gam = work.gamma_r(lam)
    s_b = abs(beta) * float(np.abs(gam).max())
    if r >= 1 and s_ad[1:] and s_b * max(s_ad[1:]) > 1.0 + 1e-12:
        raise ContractionError("hypothesis |beta| ||Gamma P_R|| max ||ad^j V|| <= 1 fails")
    w = work.w_columns(beta, lam, cols=None)
    lhs = schur_norm_matrix(ad_matrix(w, window, r))
    rhs = math.factorial(r) * 2.0 ** (2 * r + 2) * max(s_ad)
    return lhs, rhs


def _decay_constant(x: np.ndarray, window: TruncationWindow, r: int) -> float:
    return max(
        schur_norm_matrix(x),
        2.0**r * schur_norm_matrix(ad_matrix(x, window, r)),
    )


def ltau_vector_bound(
    crit: CriticalSet,
    x: np.ndarray,
    tau: float,
    r: int,
) -> tuple[float, float]:
    """(lhs, rhs) for the weighted critical column ||L^tau P_S X f||.

    Requires tau <= r*alpha.  rhs = sqrt(2 zeta(2r)) (omega(1+alpha)/C_E)^r
    max(||X||, 2^r ||ad^r X||).
    """
    grid, window = crit.grid, crit.window
    model = grid.model
    if tau > r * model.alpha * (1 + 1e-12):
        raise ValueError("need tau <= r*alpha")
    eta_idx = window.index(grid.eta)
    s_idx = crit.indices()
    n2 = np.array([p.n2 for p in crit.points()], dtype=float)
    col = x[s_idx, eta_idx] if s_idx.size else np.zeros(0)
    lhs = float(np.linalg.norm(n2**tau * col))
    base = grid.omega * (1.0 + model.alpha) / model.gap_constant
    rhs = math.sqrt(2.0 * zeta_fn(2 * r)) * base**r * _decay_constant(x, window, r)
    return lhs, rhs


def ltau_block_bound(
    crit: CriticalSet,
    x: np.ndarray,
    tau: float,
    r: int,
) -> tuple[float, float]:
    """(lhs, rhs) for the weighted off-diagonal critical block ||L^tau P_S X^off P_S||.

    Requires r >= 2 and tau <= r*alpha.  rhs = 2 zeta(r) (omega(1+alpha)/C_E)^r
    max(||X||, 2^r ||ad^r X||).
    """
    grid, window = crit.grid, crit.window
    model = grid.model
    if r < 2:
        raise ValueError("block bound needs r >= 2")
    if tau > r * model.alpha * (1 + 1e-12):
        raise ValueError("need tau <= r*alpha")
    s_idx = crit.indices()
    n2 = np.array([p.n2 for p in crit.points()], dtype=float)
    block = np.array(x[np.ix_(s_idx, s_idx)]) if s_idx.size else np.zeros((0, 0))
    if block.size:
        block[np.diag_indices_from(block)] = 0.0
        block = n2[:, None] ** tau * block
    lhs = schur_norm_matrix(block) if block.size else 0.0
    base = grid.omega * (1.0 + model.alpha) / model.gap_constant
    rhs = 2.0 * zeta_fn(float(r)) * base**r * _decay_constant(x, window, r)
    return lhs, rhs
