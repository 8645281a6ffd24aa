import numpy as np
import pytest

from drab.array_model import ArrayGeometry, ArrayScenario, sample_covariance, synth_snapshots
from drab.moments import default_params, sector_moments


def make_scenario(N=10, snr_db=0.0, std=0.02):
    return ArrayScenario(ArrayGeometry(N), 5.0, 1.0, (0.0, 10.0), ((-5.0, 30.0), (15.0, 30.0)),
                         snr_db=snr_db, phase_distortion_std=std)


def make_instance(N=10, snr_db=0.0, seed=0, T=100):
    """(scenario, block, Rhat, a0, Sigma, d1, d2) for the standard two-interferer setup."""
    sc = make_scenario(N, snr_db)
    block = synth_snapshots(sc, T, seed)
    Rhat = sample_covariance(block)
    a0, Sigma = sector_moments(sc.geometry, sc.sector_deg)
    d1, d2 = default_params(Rhat, a0, Sigma)
    return sc, block, Rhat, a0, Sigma, d1, d2


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def instance10():
    return make_instance(10)


@pytest.fixture(scope="session")
def instance2():
    return make_instance(2)


@pytest.fixture(scope="session")
def instance3():
    return make_instance(3, seed=7)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
