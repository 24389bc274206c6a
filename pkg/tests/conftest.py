import pytest
from threadpoolctl import threadpool_limits

import floqlab as fl


@pytest.fixture(scope="session", autouse=True)
def _single_thread_blas():
    # the dense problems here are small; letting BLAS fan out across the
    # container's cores thrashes badly
    with threadpool_limits(limits=1):
        yield


@pytest.fixture(scope="session")
def model():
    return fl.default_model()


@pytest.fixture(scope="session")
def grid(model):
    return fl.default_grid(model=model)


@pytest.fixture(scope="session")
def vband():
    return fl.default_perturbation()


@pytest.fixture(scope="session")
def win_small():
    return fl.TruncationWindow(12, 8)


@pytest.fixture(scope="session")
def win_mid():
    return fl.TruncationWindow(21, 15)


@pytest.fixture(scope="session")
def profile_mid(grid, win_mid):
    return fl.default_profile(grid, win_mid)


@pytest.fixture(scope="session")
def rs_mid(grid, vband, win_mid):
    return fl.rs_recursive(grid, vband, 5, win_mid)
