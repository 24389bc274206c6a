import numpy as np
import pytest

import floqlab as fl
from floqlab.errors import ModelRangeError
from floqlab.spectrum import resonance_scan


def test_floquet_value_examples():
    g = fl.FloquetGrid(model=fl.power_spectrum(), omega=1.0, eta=fl.LatticeIndex(0, 1))
    assert fl.floquet_value(g, fl.LatticeIndex(0, 1)) == 1.0
    # self-consistency at the tracked index, arbitrary frequency
    g2 = fl.FloquetGrid(model=fl.power_spectrum(), omega=0.31, eta=fl.LatticeIndex(3, 2))
    assert fl.floquet_value(g2, g2.eta) == g2.f_eta
    g3 = fl.FloquetGrid(model=fl.power_spectrum(), omega=0.7, eta=fl.LatticeIndex(0, 1))
    assert fl.floquet_value(g3, fl.LatticeIndex(2, 3)) == pytest.approx(10.4, rel=1e-12)


def test_floquet_value_affine_in_n1(grid):
    w = fl.TruncationWindow(6, 4)
    for n2 in (1, 2, 4):
        vals = [fl.floquet_value(grid, fl.LatticeIndex(n1, n2)) for n1 in range(-3, 4)]
        diffs = np.diff(vals)
        assert np.allclose(diffs, grid.omega, rtol=1e-12)
    d = fl.detunings(grid, w)
    assert d[w.index(grid.eta)] == 0.0


def test_table_model_range_error():
    model = fl.table_spectrum([1.0, 4.0, 9.0])
    assert model.energy(3) == 9.0
    with pytest.raises(ModelRangeError):
        model.energy(4)
    with pytest.raises(ModelRangeError):
        model.energies([1, 5])
    with pytest.raises(ValueError):
        fl.table_spectrum([1.0, 1.0, 2.0])  # not strictly increasing


def test_gap_check_against_direct_scan():
    model = fl.power_spectrum()  # E_k = k^2, alpha = 1
    got = fl.gap_check(model, 100)
    # independent oracle: direct scan of (2k+1)/(k+1)
    ks = np.arange(1, 101)
    oracle = np.min((2 * ks + 1) / (ks + 1))
    assert got == pytest.approx(oracle, rel=1e-14)
    assert got == pytest.approx(1.5, rel=1e-12)       # attained at k = 1
    assert got >= model.gap_constant


def test_gap_check_linear_spectrum_decays():
    model = fl.power_spectrum(p=1.0, gap_constant=0.001)
    got = fl.gap_check(model, 100)
    assert got == pytest.approx(1.0 / 101.0, rel=1e-12)
    # monotone to zero: the condition fails for any fixed constant eventually
    assert fl.gap_check(model, 1000) < got


def test_gap_check_two_term_table():
    model = fl.table_spectrum([1.0, 4.0, 9.0])
    assert fl.gap_check(model, 2) == pytest.approx(1.5, rel=1e-14)


def test_pairwise_gap_bound_examples(model):
    assert fl.pairwise_gap_bound(model, 1, 2)  # |1-4| = 3 >= 1.5/2 * 1 * 2
    with pytest.raises(ValueError):
        fl.pairwise_gap_bound(model, 3, 3)


def test_pairwise_gap_bound_random_sample(model):
    rng = np.random.default_rng(7)
    for _ in range(300):
        j, k = rng.integers(1, 201, size=2)
        if j == k:
            continue
        assert fl.pairwise_gap_bound(model, int(j), int(k))


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_gap_condition_implies_pairwise(p):
    # property: whatever constant gap_check certifies also certifies every pair
    model = fl.power_spectrum(p=p, alpha=1.0, gap_constant=1e-9)
    certified = fl.gap_check(model, 120)
    strong = fl.SpectrumModel(
        energy_fn=model.energy_fn, alpha=1.0, gap_constant=certified
    )
    rng = np.random.default_rng(11)
    for _ in range(200):
        j, k = rng.integers(1, 121, size=2)
        if j != k:
            assert fl.pairwise_gap_bound(strong, int(j), int(k))


def test_multiplicative_check_examples():
    model = fl.power_spectrum()  # C_M = 1, mu = 2: equality case
    assert fl.multiplicative_check(model, "power", 100)
    exp_model = fl.SpectrumModel(
        energy_fn=model.energy_fn, alpha=1.0, gap_constant=1.5,
        mult_constant=1.0, mult_exponent=1.0,
    )
    assert not fl.multiplicative_check(exp_model, "exponential", 50)
    # oracle scan: exhibit a failing pair for the exponential variant
    ks = np.arange(1, 51, dtype=float)
    e = ks**2
    fails = [
        (j, k)
        for j in range(1, 51)
        for k in range(j + 1, 51)
        if e[k - 1] / e[j - 1] < np.exp(k - j)
    ]
    assert fails and fails[0] == (1, 4)
    geo = fl.geometric_spectrum(base=2.0, mult_constant=1.0)
    assert fl.multiplicative_check(geo, "exponential", 40)
    with pytest.raises(ValueError):
        fl.multiplicative_check(model, "geometriX", 10)


def test_decompose_spectrum_enumeration(model):
    parts = fl.decompose_spectrum(model, 17)
    assert parts[0] == [1, 2, 4, 8, 16]
    assert parts[1] == [3, 5, 9, 17]


def test_decompose_spectrum_cover(model):
    parts = fl.decompose_spectrum(model, 64)
    assert max(parts) <= 31
    seen = sorted(x for members in parts.values() for x in members)
    assert seen == list(range(1, 65))  # disjoint cover by brute force


def test_decompose_subsequences_upgrade_growth(model):
    # along each N(a) the power condition upgrades to an exponential one with
    # constants C_M/(a+1)^mu and mu*log2 -- checkable on the window
    parts = fl.decompose_spectrum(model, 256)
    c_m, mu = model.mult_constant, model.mult_exponent
    for a, members in parts.items():
        if len(members) < 2:
            continue
        e = model.energies(np.asarray(members))
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                bound = c_m / (a + 1.0) ** mu * np.exp(mu * np.log(2.0) * (j - i))
                assert e[j] / e[i] >= bound * (1 - 1e-12)


def test_window_indexing_roundtrip():
    w = fl.TruncationWindow(3, 4)
    assert w.size == 7 * 4
    for idx in range(w.size):
        p = w.point(idx)
        assert w.index(p) == idx
    assert not w.contains(fl.LatticeIndex(4, 1))
    with pytest.raises(ValueError):
        w.index(fl.LatticeIndex(0, 5))


def test_resonance_scan_detects_integer_drive(model):
    g = fl.FloquetGrid(model=model, omega=1.0, eta=fl.LatticeIndex(0, 1))
    hit = resonance_scan(g, fl.TruncationWindow(5, 3))
    assert hit is not None and hit.n2 != 1
    assert fl.floquet_value(g, hit) == g.f_eta
    g_irr = fl.default_grid()
    assert resonance_scan(g_irr, fl.TruncationWindow(12, 8)) is None
