import numpy as np
import pytest

from mmwave_ir.channel import ChannelParams, assemble_channel, sample_channel
from mmwave_ir.errors import DimensionError, ParameterError
from mmwave_ir.sounding import (
    MeasurementSet,
    SoundingSetup,
    effective_matrix,
    generate_combiners,
    generate_pilots,
    make_setup,
    measure,
    noiseless_pilots,
    snr_to_noise_variance,
)


def test_pilot_modulus_and_determinism():
    x = generate_pilots(3, 64, 24)
    assert x.shape == (64, 24)
    np.testing.assert_allclose(np.abs(x), 1 / 8, atol=1e-15)
    np.testing.assert_array_equal(x, generate_pilots(3, 64, 24))


def test_pilot_columns_nearly_orthonormal():
    x = generate_pilots(5, 64, 24)
    gram = x.conj().T @ x
    np.testing.assert_allclose(np.diag(gram), 1.0, atol=1e-12)
    off = np.abs(gram - np.diag(np.diag(gram)))
    assert off.max() < 0.5


def test_combiner_shape_modulus_determinism():
    w = generate_combiners(1, 64, 4, 6)
    assert w.shape == (64, 24)
    np.testing.assert_allclose(np.abs(w), 1 / 8, atol=1e-15)
    np.testing.assert_array_equal(w, generate_combiners(1, 64, 4, 6))


def test_setup_slot_bookkeeping():
    s = make_setup(0, 16, 8, 4, 3, 5)
    assert (s.n_r, s.n_t, s.n_y, s.n_x, s.slots) == (16, 8, 12, 5, 3)
    with pytest.raises(DimensionError):
        SoundingSetup(s.combiner, s.pilots, rf_chains_rx=5)
    with pytest.raises(DimensionError):
        SoundingSetup(s.combiner, s.pilots, rf_chains_rx=4, slots=2)


def test_setup_json_round_trip():
    s = make_setup(0, 8, 8, 2, 2, 3)
    t = SoundingSetup.from_dict(s.to_dict())
    np.testing.assert_array_equal(s.combiner, t.combiner)
    np.testing.assert_array_equal(s.pilots, t.pilots)
    assert (t.rf_chains_rx, t.slots) == (2, 2)


def test_measure_zero_channel():
    s = make_setup(0, 8, 8, 1, 4, 4)
    m = measure(np.zeros((8, 8)), s, 0.0)
    np.testing.assert_array_equal(m.received, 0)


def test_measure_noiseless_equals_model():
    s = make_setup(0, 8, 6, 2, 2, 3)
    h = assemble_channel(sample_channel(1, 2), 8, 6)
    m = measure(h, s, 0.0)
    np.testing.assert_allclose(m.received, s.combiner.conj().T @ h @ s.pilots, atol=1e-12)


def test_measure_noise_variance():
    s = make_setup(0, 4, 4, 1, 400, 250)
    h = assemble_channel(sample_channel(1, 1), 4, 4)
    m = measure(h, s, 0.3, rng=7)
    noise = m.received - noiseless_pilots(h, s)
    assert noise.size == 10**5
    assert abs(np.mean(np.abs(noise) ** 2) / 0.3 - 1) < 0.05
    # circular symmetry: real and imaginary parts carry half each
    assert abs(np.var(noise.real) / 0.15 - 1) < 0.05


def test_measure_dimension_checks():
    s = make_setup(0, 8, 8, 1, 4, 4)
    with pytest.raises(DimensionError):
        measure(np.zeros((8, 7)), s, 0.0)
    with pytest.raises(ParameterError):
        measure(np.zeros((8, 8)), s, -1.0)
    with pytest.raises(DimensionError):
        MeasurementSet(np.zeros((3, 4))).check_against(s)


def test_measurement_json_round_trip():
    m = MeasurementSet(np.array([[1 + 2j, 3.0]]), 0.25)
    n = MeasurementSet.from_dict(m.to_dict())
    np.testing.assert_array_equal(m.received, n.received)
    assert n.noise_variance == 0.25


def test_effective_matrix_empty():
    s = make_setup(0, 8, 8, 1, 4, 4)
    assert effective_matrix(s, [], [], 0).shape == (4, 0)


def test_effective_matrix_one_dimensional_reduction():
    # single receive antenna, W = [1], pilot aligned with a_T(theta_T)
    n_t, theta_t = 4, 0.3
    a_t = np.exp(2j * np.pi * np.arange(n_t) * theta_t)
    x = (a_t / np.sqrt(n_t))[:, None]
    s = SoundingSetup(np.ones((1, 1)), x)
    k = effective_matrix(s, [0.7], [theta_t], 0)
    assert k.shape == (1, 1)
    np.testing.assert_allclose(k[0, 0], np.linalg.norm(x) * np.sqrt(n_t), atol=1e-12)


def test_effective_matrix_index_range():
    s = make_setup(0, 8, 8, 1, 4, 4)
    with pytest.raises(IndexError):
        effective_matrix(s, [0.1], [0.2], 4)
    with pytest.raises(IndexError):
        effective_matrix(s, [0.1], [0.2], -1)


def test_factorization_identity(rng):
    s = make_setup(rng, 8, 8, 1, 4, 4)
    aoa, aod = rng.random(2), rng.random(2)
    for _ in range(10):
        z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        h = assemble_channel(ChannelParams(z, aoa, aod), 8, 8)
        for p in range(s.n_x):
            np.testing.assert_allclose(effective_matrix(s, aoa, aod, p) @ z,
                                       s.combiner.conj().T @ h @ s.pilots[:, p], atol=1e-12)


def test_column_decomposition_of_residual(rng):
    s = make_setup(rng, 8, 8, 2, 2, 5)
    p = sample_channel(rng, 2)
    m = measure(assemble_channel(sample_channel(rng, 3), 8, 8), s, 0.1, rng)
    total = sum(np.linalg.norm(m.received[:, q] - effective_matrix(s, p.aoa, p.aod, q) @ p.gains) ** 2
                for q in range(s.n_x))
    full = np.linalg.norm(m.received - noiseless_pilots(assemble_channel(p, 8, 8), s)) ** 2
    assert abs(total - full) < 1e-12 * max(full, 1)


def test_snr_definition_and_scaling():
    s = make_setup(0, 8, 8, 1, 4, 4)
    h = assemble_channel(sample_channel(2, 2), 8, 8)
    power = np.mean(np.abs(noiseless_pilots(h, s)) ** 2)
    assert snr_to_noise_variance(h, s, 0.0) == pytest.approx(power, rel=1e-12)
    assert snr_to_noise_variance(h, s, 13.0) == pytest.approx(snr_to_noise_variance(h, s, 3.0) / 10, rel=1e-12)


def test_snr_errors():
    s = make_setup(0, 8, 8, 1, 4, 4)
    with pytest.raises(ParameterError):
        snr_to_noise_variance(np.zeros((8, 8)), s, 10.0)
    with pytest.raises(ParameterError):
        snr_to_noise_variance(np.ones((8, 8)), s, np.inf)


def test_snr_round_trip_monte_carlo():
    rng = np.random.default_rng(11)
    s = make_setup(rng, 16, 16, 4, 2, 8)
    h = assemble_channel(sample_channel(rng, 3), 16, 16)
    nv = snr_to_noise_variance(h, s, 7.0)
    clean = noiseless_pilots(h, s)
    est = []
    for _ in range(100):
        noise = measure(h, s, nv, rng).received - clean
        est.append(np.mean(np.abs(clean) ** 2) / np.mean(np.abs(noise) ** 2))
    assert abs(10 * np.log10(np.mean(est)) - 7.0) < 0.5
