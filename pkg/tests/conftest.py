import numpy as np
import pytest

from mmwave_ir.channel import ChannelParams, assemble_channel, sample_channel
from mmwave_ir.sounding import MeasurementSet, SoundingSetup, make_setup, measure

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _phase(a):
    return np.exp(2j * np.pi * np.mod(a, 1.0))


def frozen_instance():
    """Deterministic small instance shared with the high-precision oracle.

    W is 4x3, X is 5x3, Y comes from two paths plus a fixed perturbation.
    """
    n_r, n_t, n_y, n_x = 4, 5, 3, 3
    i, j = np.meshgrid(np.arange(n_r), np.arange(n_y), indexing="ij")
    w = _phase(GOLDEN * (i * 7 + j * 3 + 1)) / np.sqrt(n_r)
    i, j = np.meshgrid(np.arange(n_t), np.arange(n_x), indexing="ij")
    x = _phase(GOLDEN**2 * (i * 5 + j * 11 + 2)) / np.sqrt(n_t)
    setup = SoundingSetup(w, x, rf_chains_rx=1)
    truth = ChannelParams([1.0 - 0.5j, -0.3 + 0.8j], [0.13, 0.61], [0.42, 0.87])
    y = w.conj().T @ assemble_channel(truth, n_r, n_t) @ x
    yi, pi = np.meshgrid(np.arange(n_y), np.arange(n_x), indexing="ij")
    y = y + 0.05 * _phase(GOLDEN * (yi * 13 + pi * 17 + 5))
    return setup, MeasurementSet(y, 0.0)


@pytest.fixture
def frozen():
    return frozen_instance()


def random_instance(seed, n_r=8, n_t=8, rf=1, slots=4, n_x=4, paths=2, noise=0.01):
    rng = np.random.default_rng(seed)
    params = sample_channel(rng, paths)
    setup = make_setup(rng, n_r, n_t, rf, slots, n_x)
    h = assemble_channel(params, n_r, n_t)
    return params, setup, measure(h, setup, noise, rng)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
