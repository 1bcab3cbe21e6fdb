"""ULA steering vectors and the multipath channel model.

Angles throughout the package are *normalized spatial angles*
``theta = d sin(phi) / wavelength``.  The array response is 1-periodic in
``theta`` so every angle is stored on the canonical interval ``[0, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError

__all__ = [
    "ChannelParams",
    "wrap_angle",
    "circular_distance",
    "steering_vector",
    "steering_vector_derivative",
    "steering_matrix",
    "steering_matrix_derivative",
    "assemble_channel",
    "sample_channel",
]

TWO_PI = 2.0 * np.pi


def wrap_angle(theta):
    """Map normalized angles onto the canonical interval [0, 1)."""
    wrapped = np.mod(np.asarray(theta, dtype=float), 1.0)
    # np.mod can return exactly 1.0 for tiny negative inputs
    return np.where(wrapped >= 1.0, 0.0, wrapped)


def circular_distance(a, b):
    """Distance between normalized angles on the unit circle, in [0, 0.5]."""
    diff = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), 1.0)
    return np.minimum(diff, 1.0 - diff)


def _check_count(n):
    if int(n) != n or n < 1:
        raise DimensionError(f"antenna count must be a positive integer, got {n}")
    return int(n)


def steering_vector(n, theta):
    """Array response ``[1, e^{j2pi theta}, ..., e^{j2pi(n-1)theta}]``.

    Parameters
    ----------
    n : int
        Number of antennas.
    theta : float
        Normalized spatial angle.

    Returns
    -------
    ndarray, shape (n,)
    """
    n = _check_count(n)
    k = np.arange(n)
    # reduce before multiplying so theta and theta + 1 give bit-identical phases
    phase = np.mod(k * float(wrap_angle(theta)), 1.0)
    return np.exp(1j * TWO_PI * phase)


def steering_vector_derivative(n, theta):
    """Element-wise derivative of :func:`steering_vector` with respect to theta."""
    n = _check_count(n)
    k = np.arange(n)
    return 1j * TWO_PI * k * steering_vector(n, theta)


def steering_matrix(n, thetas):
    """Stack steering vectors column-wise, shape ``(n, len(thetas))``."""
    n = _check_count(n)
    thetas = wrap_angle(np.atleast_1d(thetas))
    k = np.arange(n)[:, None]
    return np.exp(1j * TWO_PI * np.mod(k * thetas[None, :], 1.0))


def steering_matrix_derivative(n, thetas):
    """Column-wise theta derivatives matching :func:`steering_matrix`."""
    k = np.arange(_check_count(n))[:, None]
    return 1j * TWO_PI * k * steering_matrix(n, thetas)


@dataclass(frozen=True)
class ChannelParams:
    """Path gains and normalized AoAs/AoDs parameterizing a channel.

    ``gains[l]``, ``aoa[l]`` and ``aod[l]`` describe path ``l``.  Angles are
    wrapped onto [0, 1) at construction.
    """

    gains: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    aoa: np.ndarray = field(default_factory=lambda: np.zeros(0))
    aod: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        gains = np.atleast_1d(np.asarray(self.gains, dtype=complex)).copy()
        aoa = wrap_angle(np.atleast_1d(self.aoa)).copy()
        aod = wrap_angle(np.atleast_1d(self.aod)).copy()
        if not (gains.ndim == aoa.ndim == aod.ndim == 1):
            raise DimensionError("gains, aoa and aod must be one-dimensional")
        if not (len(gains) == len(aoa) == len(aod)):
            raise DimensionError(
                f"length mismatch: gains={len(gains)}, aoa={len(aoa)}, aod={len(aod)}"
            )
        for name, arr in (("gains", gains), ("aoa", aoa), ("aod", aod)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def num_paths(self):
        return len(self.gains)

    def scaled(self, alpha):
        return ChannelParams(alpha * self.gains, self.aoa, self.aod)

    def to_dict(self):
        return {
            "gains": [[float(g.real), float(g.imag)] for g in self.gains],
            "aoa": [float(t) for t in self.aoa],
            "aod": [float(t) for t in self.aod],
        }

    @classmethod
    def from_dict(cls, doc):
        gains = np.array([complex(re, im) for re, im in doc["gains"]], dtype=complex)
        return cls(gains, np.asarray(doc["aoa"], dtype=float), np.asarray(doc["aod"], dtype=float))


def assemble_channel(params, n_r, n_t):
    """Channel matrix ``H = A_R diag(z) A_T^H``, shape ``(n_r, n_t)``."""
    n_r, n_t = _check_count(n_r), _check_count(n_t)
    if params.num_paths == 0:
        return np.zeros((n_r, n_t), dtype=complex)
    a_r = steering_matrix(n_r, params.aoa)
    a_t = steering_matrix(n_t, params.aod)
    return (a_r * params.gains[None, :]) @ a_t.conj().T


def _sample_separated(rng, n, min_separation, max_attempts=10_000):
    angles = []
    attempts = 0
    while len(angles) < n:
        attempts += 1
        if attempts > max_attempts:
            raise ParameterError(
                f"could not place {n} angles with separation {min_separation}"
            )
        cand = rng.random()
        if all(circular_distance(cand, a) >= min_separation for a in angles):
            angles.append(cand)
    return np.array(angles)


def sample_channel(rng, num_paths, min_separation=0.0):
    """Draw a random multipath channel.

    AoAs and AoDs are uniform on [0, 1) with a pairwise circular separation
    of at least ``min_separation`` inside each angle vector.  Gains are
    circularly-symmetric complex Gaussian with unit variance.

    Parameters
    ----------
    rng : int, numpy.random.Generator or None
        Seed or generator; identical seeds give identical channels.
    num_paths : int
    min_separation : float
        Must satisfy ``min_separation * num_paths < 1``.
    """
    if num_paths < 1:
        raise ParameterError(f"num_paths must be >= 1, got {num_paths}")
    if min_separation < 0 or min_separation * num_paths >= 1.0:
        raise ParameterError(
            f"infeasible separation {min_separation} for {num_paths} paths"
        )
    rng = np.random.default_rng(rng)
    aoa = _sample_separated(rng, num_paths, min_separation)
    aod = _sample_separated(rng, num_paths, min_separation)
    gains = (rng.standard_normal(num_paths) + 1j * rng.standard_normal(num_paths)) / np.sqrt(2.0)
    return ChannelParams(gains, aoa, aod)
