import os

import numpy as np
import pytest

from pdsplit.problems import (
    gen_elastic_net_strongly_convex,
    gen_fused_lasso,
    reference_solution,
)


@pytest.fixture(scope="session", autouse=True)
def session_cache(tmp_path_factory):
    """Point the reference cache at a session-scoped temp directory."""
    cache = tmp_path_factory.mktemp("pdsplit-cache")
    old = os.environ.get("PDSPLIT_CACHE_DIR")
    os.environ["PDSPLIT_CACHE_DIR"] = str(cache)
    yield cache
    if old is None:
        os.environ.pop("PDSPLIT_CACHE_DIR", None)
    else:
        os.environ["PDSPLIT_CACHE_DIR"] = old


# Desk-scale benchmark: the size used by the residual/rate/gap criteria.
@pytest.fixture(scope="session")
def desk_fused_lasso():
    return gen_fused_lasso(n=100, p=500, seed=7)


@pytest.fixture(scope="session")
def desk_reference(desk_fused_lasso):
    return reference_solution(desk_fused_lasso, iters=20000)


# Wide instance (n:p = 1:20): the near-linear speedup in gamma needs p >> n;
# at squarer aspect ratios the dual block dominates and the trend reverses.
@pytest.fixture(scope="session")
def sweep_fused_lasso():
    return gen_fused_lasso(n=100, p=2000, seed=7)


@pytest.fixture(scope="session")
def sweep_reference(sweep_fused_lasso):
    return reference_solution(sweep_fused_lasso, iters=20000)


# Small instance for cheap cross-algorithm module tests.
@pytest.fixture(scope="session")
def small_fused_lasso():
    return gen_fused_lasso(n=40, p=120, seed=3)


@pytest.fixture(scope="session")
def small_reference(small_fused_lasso):
    return reference_solution(small_fused_lasso, iters=20000)


@pytest.fixture(scope="session")
def ridge_instance():
    # mu1 = 0 keeps g smooth (L_g = 0) so the linear-rate factor applies
    return gen_elastic_net_strongly_convex(n=50, p=50, seed=3, mu1=0.0, mu2=0.5)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
