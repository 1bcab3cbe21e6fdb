import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmwave_ir.channel import (
    ChannelParams,
    assemble_channel,
    circular_distance,
    sample_channel,
    steering_matrix,
    steering_matrix_derivative,
    steering_vector,
    steering_vector_derivative,
    wrap_angle,
)
from mmwave_ir.errors import DimensionError, ParameterError


def test_steering_zero_angle():
    np.testing.assert_allclose(steering_vector(4, 0.0), np.ones(4))


def test_steering_half_turn():
    np.testing.assert_allclose(steering_vector(2, 0.5), [1, -1], atol=1e-15)


def test_steering_quarter_turn():
    np.testing.assert_allclose(steering_vector(3, 0.25), [1, 1j, -1], atol=1e-15)


def test_steering_rejects_zero_antennas():
    with pytest.raises(DimensionError):
        steering_vector(0, 0.1)
    with pytest.raises(DimensionError):
        steering_vector_derivative(0, 0.1)


def test_derivative_at_zero():
    np.testing.assert_allclose(steering_vector_derivative(2, 0.0), [0, 2j * np.pi])


def test_derivative_single_antenna():
    np.testing.assert_array_equal(steering_vector_derivative(1, 0.77), [0])


def _fd(n, theta, h=1e-6):
    return (steering_vector(n, theta + h) - steering_vector(n, theta - h)) / (2 * h)


def test_derivative_matches_finite_difference():
    exact = steering_vector_derivative(8, 0.31)
    rel = np.linalg.norm(exact - _fd(8, 0.31)) / np.linalg.norm(exact)
    assert rel < 1e-6


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.0, exclude_max=True), st.integers(2, 128))
def test_derivative_finite_difference_property(theta, n):
    exact = steering_vector_derivative(n, theta)
    rel = np.linalg.norm(exact - _fd(n, theta)) / np.linalg.norm(exact)
    assert rel < 1e-6


@settings(max_examples=100, deadline=None)
@given(st.integers(-2**20, 2**20), st.integers(1, 256))
def test_periodicity_exact_dyadic(k, n):
    # k / 2^20 is exactly representable, and so is k / 2^20 + 1
    theta = k / 2.0**20
    np.testing.assert_array_equal(steering_vector(n, theta), steering_vector(n, theta + 1.0))


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10, allow_nan=False), st.integers(1, 256))
def test_periodicity_and_unit_modulus(theta, n):
    a = steering_vector(n, theta)
    np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-14)
    np.testing.assert_allclose(a, steering_vector(n, theta + 1.0), atol=1e-12)


def test_wrap_angle_canonical():
    w = wrap_angle([-0.25, 1.0, 2.5, -1e-300])
    np.testing.assert_allclose(w, [0.75, 0.0, 0.5, 0.0])
    assert np.all((w >= 0) & (w < 1))


def test_circular_distance():
    np.testing.assert_allclose(circular_distance(0.95, 0.05), 0.1)
    np.testing.assert_allclose(circular_distance(0.2, 0.7), 0.5)


def test_steering_matrix_columns():
    thetas = [0.1, 0.35, 0.9]
    m = steering_matrix(6, thetas)
    dm = steering_matrix_derivative(6, thetas)
    for l, t in enumerate(thetas):
        np.testing.assert_allclose(m[:, l], steering_vector(6, t), atol=1e-14)
        np.testing.assert_allclose(dm[:, l], steering_vector_derivative(6, t), atol=1e-12)


def test_assemble_single_path_all_ones():
    h = assemble_channel(ChannelParams([2.0], [0.0], [0.0]), 2, 2)
    np.testing.assert_allclose(h, 2 * np.ones((2, 2)))


def test_assemble_empty():
    np.testing.assert_array_equal(assemble_channel(ChannelParams(), 3, 4), np.zeros((3, 4)))


def test_assemble_matches_naive_loops(rng):
    p = ChannelParams(rng.standard_normal(2) + 1j * rng.standard_normal(2), rng.random(2), rng.random(2))
    n = 8
    naive = np.zeros((n, n), dtype=complex)
    for l in range(2):
        for r in range(n):
            for t in range(n):
                naive[r, t] += p.gains[l] * np.exp(2j * np.pi * r * p.aoa[l]) * np.exp(-2j * np.pi * t * p.aod[l])
    np.testing.assert_allclose(assemble_channel(p, n, n), naive, atol=1e-12)


def test_assemble_linear_in_gains(rng):
    p = sample_channel(rng, 3)
    alpha = 0.7 - 1.3j
    np.testing.assert_allclose(assemble_channel(p.scaled(alpha), 16, 12),
                               alpha * assemble_channel(p, 16, 12), atol=1e-12)


def test_params_length_mismatch():
    with pytest.raises(DimensionError):
        ChannelParams([1.0, 2.0], [0.1], [0.2, 0.3])


def test_params_wrap_and_readonly():
    p = ChannelParams([1.0], [1.25], [-0.25])
    assert p.aoa[0] == 0.25 and p.aod[0] == 0.75
    with pytest.raises(ValueError):
        p.gains[0] = 3.0


def test_params_json_round_trip(rng):
    p = sample_channel(rng, 4)
    q = ChannelParams.from_dict(p.to_dict())
    np.testing.assert_array_equal(p.gains, q.gains)
    np.testing.assert_array_equal(p.aoa, q.aoa)
    assert set(p.to_dict()) == {"gains", "aoa", "aod"}
    assert p.to_dict()["gains"][0] == [p.gains[0].real, p.gains[0].imag]


def test_sample_deterministic():
    a, b = sample_channel(99, 3, 2 / 64), sample_channel(99, 3, 2 / 64)
    np.testing.assert_array_equal(a.gains, b.gains)
    np.testing.assert_array_equal(a.aoa, b.aoa)
    np.testing.assert_array_equal(a.aod, b.aod)


def test_sample_separation():
    for seed in range(50):
        p = sample_channel(seed, 3, 2 / 64)
        for angles in (p.aoa, p.aod):
            for i in range(3):
                for j in range(i):
                    assert circular_distance(angles[i], angles[j]) >= 2 / 64


def test_sample_gain_power():
    rng = np.random.default_rng(0)
    power = np.mean([np.abs(sample_channel(rng, 3).gains) ** 2 for _ in range(10_000)])
    assert abs(power - 1.0) < 0.05


@pytest.mark.parametrize("paths,sep", [(0, 0.0), (3, 0.34), (2, -0.1)])
def test_sample_rejects_infeasible(paths, sep):
    with pytest.raises(ParameterError):
        sample_channel(0, paths, sep)
