"""Cross-cutting checks: non-default tracked indices, complex couplings,
generic frequencies; both eigenvalue pipelines must keep agreeing."""

import math

import numpy as np
import pytest

import floqlab as fl
from floqlab.perturbation import FourierPerturbation
from floqlab.reduction import ReductionWork


@pytest.mark.parametrize("eta", [(2, 3), (-1, 2)])
def test_full_pipeline_non_default_tracked_index(eta):
    grid = fl.default_grid(eta=eta)
    v = fl.default_perturbation()
    w = fl.TruncationWindow(21, 12)
    profile = fl.default_profile(grid, w)
    work = ReductionWork(grid, v, w)
    assert eta[1] not in work.crit.members  # tracked row never turns critical

    rec = fl.rs_recursive(grid, v, 4, w)
    tree = fl.rs_tree_formula(grid, v, 4, w)
    assert np.allclose(rec.lambdas, tree.lambdas, rtol=1e-10, atol=1e-15)
    assert rec.lambdas[0] == 0.0

    beta = 2e-3
    fp = fl.fixed_point_lambda(grid, v, profile, beta, w, work=work)
    tracked = fl.eigenpair_track(fl.assemble(grid, v, beta, w))
    assert fp.in_domain
    assert abs(grid.f_eta + fp.f_total - tracked.f_beta) <= 1e-9
    assert fl.eigen_check(grid, v, profile, beta, w, work=work, fp=fp) <= 1e-7


def test_full_pipeline_complex_coupling(grid):
    rng = np.random.default_rng(99)
    blocks = {k: 0.1 * (rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10)))
              for k in range(2)}
    blocks[0] = (blocks[0] + blocks[0].conj().T) / 2

    def coeff(k, p, q):
        if abs(k) > 1 or p > 10 or q > 10:
            return 0.0
        return blocks[abs(k)][p - 1, q - 1] if k >= 0 \
            else np.conj(blocks[abs(k)][q - 1, p - 1])

    v = FourierPerturbation(coeff=coeff, smoothness=16, band_limit=1, is_real=False)
    w = fl.TruncationWindow(16, 10)
    profile = fl.default_profile(grid, w)
    work = ReductionWork(grid, v, w)
    beta = 1e-3
    fp = fl.fixed_point_lambda(grid, v, profile, beta, w, work=work)
    tracked = fl.eigenpair_track(fl.assemble(grid, v, beta, w))
    assert abs(grid.f_eta + fp.f_total - tracked.f_beta) <= 1e-9
    assert fl.eigen_check(grid, v, profile, beta, w, work=work, fp=fp) <= 1e-7
    # the eigenvalue is real although the coupling is genuinely complex
    assert isinstance(fp.lam, float) and fp.lam != 0.0


def test_full_pipeline_generic_frequency(model):
    grid = fl.FloquetGrid(model=model, omega=math.sqrt(2.0),
                          eta=fl.LatticeIndex(0, 1))
    v = fl.default_perturbation()
    w = fl.TruncationWindow(20, 12)
    profile = fl.default_profile(grid, w)
    work = ReductionWork(grid, v, w)
    for beta in (5e-4, -3e-3):
        fp = fl.fixed_point_lambda(grid, v, profile, beta, w, work=work)
        tracked = fl.eigenpair_track(fl.assemble(grid, v, beta, w))
        assert fp.in_domain
        assert abs(grid.f_eta + fp.f_total - tracked.f_beta) <= 1e-9
