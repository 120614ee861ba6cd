import numpy as np
import pytest
from hypothesis import settings

from mwlab import weights as mw
from mwlab.cubature import CubeFamily

# property tests must be reproducible run to run
settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")


@pytest.fixture(scope="session")
def identity2():
    return mw.identity_weight(n=3, d=2)


@pytest.fixture(scope="session")
def rank_one():
    return mw.RankOneRadialWeight(n=3)


@pytest.fixture(scope="session")
def diag_poly():
    # diag(|x|^2, |x|^4)
    return mw.ScalarDiagWeight(entries=(mw.PolyScalar((0.0, 1.0)),
                                        mw.PolyScalar((0.0, 0.0, 1.0))))


@pytest.fixture(scope="session")
def diag_ordered():
    # diag(v1, v2) with v1 <= v2 pointwise everywhere
    return mw.ScalarDiagWeight(entries=(mw.PolyScalar((0.0, 1.0)),
                                        mw.PolyScalar((0.0, 1.0, 1.0))))


@pytest.fixture(scope="session")
def power13():
    return mw.PowerWeight(A=np.array([[2.0, 0.5], [0.5, 1.0]]),
                          gamma=np.array([1.0, 3.0]))


@pytest.fixture(scope="session")
def small_family():
    return CubeFamily(generator="dyadic", box=4.0, count=9, r_min=1.0, r_max=2.0)


@pytest.fixture(scope="session")
def catalog_family():
    return CubeFamily(generator="dyadic", box=8.0, count=18, r_min=1.0, r_max=4.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
