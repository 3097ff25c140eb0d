import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from edfagp.domain import Dataset, InputSpectrum, make_grid
from edfagp.edfa_sim import EdfaSimulator, SimulatorConfig

settings.register_profile("default", max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid():
    return make_grid()


def random_dataset(rng, m, z, sim=None, p_occ=0.5):
    """Random spectra on a z-channel grid, measured by ``sim`` (default config)."""
    from edfagp.active_learning import random_spectra

    meter = EdfaSimulator(sim or SimulatorConfig(), stream=99)
    xs = random_spectra(z, m, rng, p_occupied=p_occ)
    return Dataset(xs, [meter.measure(x) for x in xs])


def full_dataset(rng, m, z, scale=1.0):
    """All channels occupied, free-valued powers and gains; for GP algebra tests."""
    power = rng.uniform(-20, -12, size=(m, z))
    gain = 16 + scale * rng.normal(size=(m, z))
    return Dataset.from_arrays(power, np.ones((m, z), bool), gain)


def spectrum(power):
    power = np.asarray(power, dtype=float)
    return InputSpectrum(power, np.ones(power.shape, bool))
