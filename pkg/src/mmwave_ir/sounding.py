"""Pilot and combiner generation and the received-pilot model ``Y = W^H H X + N``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import assemble_channel, steering_matrix
from .errors import DimensionError, ParameterError

__all__ = [
    "SoundingSetup",
    "MeasurementSet",
    "generate_pilots",
    "generate_combiners",
    "make_setup",
    "measure",
    "effective_matrix",
    "snr_to_noise_variance",
    "noiseless_pilots",
    "sound_params",
    "complex_to_json",
    "complex_from_json",
]


def complex_to_json(arr):
    """Nested lists of ``[re, im]`` pairs."""
    arr = np.asarray(arr, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def complex_from_json(doc):
    pairs = np.asarray(doc, dtype=float)
    if pairs.shape[-1] != 2:
        raise DimensionError("complex entries must be [re, im] pairs")
    return pairs[..., 0] + 1j * pairs[..., 1]


def _random_phases(rng, shape, scale):
    phi = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    return np.exp(1j * phi) * scale


@dataclass(frozen=True)
class SoundingSetup:
    """Receive combiner ``W`` (N_R x N_Y) and transmit pilots ``X`` (N_T x N_X)."""

    combiner: np.ndarray
    pilots: np.ndarray
    rf_chains_rx: int = 1
    slots: int | None = None

    def __post_init__(self):
        w = np.asarray(self.combiner, dtype=complex)
        x = np.asarray(self.pilots, dtype=complex)
        if w.ndim != 2 or x.ndim != 2:
            raise DimensionError("combiner and pilots must be 2-D")
        slots = self.slots
        if slots is None:
            slots, rem = divmod(w.shape[1], self.rf_chains_rx)
            if rem:
                raise DimensionError(
                    f"N_Y={w.shape[1]} not divisible by rf_chains_rx={self.rf_chains_rx}"
                )
        if slots * self.rf_chains_rx != w.shape[1]:
            raise DimensionError(
                f"N_Y={w.shape[1]} != slots*rf_chains_rx={slots}*{self.rf_chains_rx}"
            )
        object.__setattr__(self, "combiner", w)
        object.__setattr__(self, "pilots", x)
        object.__setattr__(self, "slots", int(slots))

    @property
    def n_r(self):
        return self.combiner.shape[0]

    @property
    def n_t(self):
        return self.pilots.shape[0]

    @property
    def n_y(self):
        return self.combiner.shape[1]

    @property
    def n_x(self):
        return self.pilots.shape[1]

    def to_dict(self):
        return {
            "combiner": complex_to_json(self.combiner),
            "pilots": complex_to_json(self.pilots),
            "rf_chains_rx": self.rf_chains_rx,
            "slots": self.slots,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            complex_from_json(doc["combiner"]),
            complex_from_json(doc["pilots"]),
            rf_chains_rx=int(doc.get("rf_chains_rx", 1)),
            slots=doc.get("slots"),
        )


@dataclass(frozen=True)
class MeasurementSet:
    """Received pilots ``Y`` (N_Y x N_X) and the per-entry noise variance."""

    received: np.ndarray
    noise_variance: float = 0.0

    def __post_init__(self):
        y = np.asarray(self.received, dtype=complex)
        if y.ndim != 2:
            raise DimensionError("received pilots must be 2-D")
        if self.noise_variance < 0:
            raise ParameterError("noise_variance must be >= 0")
        object.__setattr__(self, "received", y)

    def check_against(self, setup):
        if self.received.shape != (setup.n_y, setup.n_x):
            raise DimensionError(
                f"Y has shape {self.received.shape}, setup expects {(setup.n_y, setup.n_x)}"
            )

    def to_dict(self):
        return {"received": complex_to_json(self.received), "noise_variance": self.noise_variance}

    @classmethod
    def from_dict(cls, doc):
        return cls(complex_from_json(doc["received"]), float(doc.get("noise_variance", 0.0)))


def generate_pilots(rng, n_t, n_x):
    """Random unit-modulus pilots scaled by ``1/sqrt(n_t)``, shape (n_t, n_x)."""
    if n_t < 1 or n_x < 1:
        raise DimensionError(f"pilot dimensions must be positive, got ({n_t}, {n_x})")
    return _random_phases(np.random.default_rng(rng), (n_t, n_x), 1.0 / np.sqrt(n_t))


def generate_combiners(rng, n_r, rf, m):
    """Analog combiner ``[W_1 ... W_M]`` with ``rf`` columns per time slot.

    Entries are random phases of modulus ``1/sqrt(n_r)``.  Slot ``m`` occupies
    columns ``m*rf : (m+1)*rf``.
    """
    if n_r < 1 or rf < 1 or m < 1:
        raise DimensionError(f"combiner dimensions must be positive, got ({n_r}, {rf}, {m})")
    rng = np.random.default_rng(rng)
    slots = [_random_phases(rng, (n_r, rf), 1.0 / np.sqrt(n_r)) for _ in range(m)]
    return np.hstack(slots)


def make_setup(rng, n_r, n_t, rf_rx, slots, n_x):
    """Draw combiners then pilots from one generator."""
    rng = np.random.default_rng(rng)
    w = generate_combiners(rng, n_r, rf_rx, slots)
    x = generate_pilots(rng, n_t, n_x)
    return SoundingSetup(w, x, rf_chains_rx=rf_rx, slots=slots)


def _check_channel(h, setup):
    h = np.asarray(h)
    if h.shape != (setup.n_r, setup.n_t):
        raise DimensionError(f"H has shape {h.shape}, setup expects {(setup.n_r, setup.n_t)}")
    return h


def noiseless_pilots(h, setup):
    """``W^H H X``."""
    h = _check_channel(h, setup)
    return setup.combiner.conj().T @ h @ setup.pilots


def measure(h, setup, noise_variance, rng=None):
    """Sound channel ``h``; noise is CN(0, noise_variance) per entry of ``Y``."""
    if noise_variance < 0:
        raise ParameterError("noise_variance must be >= 0")
    y = noiseless_pilots(h, setup)
    if noise_variance > 0:
        rng = np.random.default_rng(rng)
        noise = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
        y = y + np.sqrt(noise_variance / 2.0) * noise
    return MeasurementSet(y, float(noise_variance))


def effective_matrix(setup, aoa, aod, p):
    """Per-pilot effective matrix ``K_p = W^H A_R diag(A_T^H x_p)``.

    ``p`` is 0-based.  Column ``l`` equals ``(a_T(aod_l)^H x_p) W^H a_R(aoa_l)``
    so that ``K_p @ z == W^H H(z) x_p``.
    """
    aoa, aod = np.atleast_1d(aoa), np.atleast_1d(aod)
    if len(aoa) != len(aod):
        raise DimensionError("aoa and aod must have equal length")
    if not 0 <= p < setup.n_x:
        raise IndexError(f"pilot index {p} out of range [0, {setup.n_x})")
    if len(aoa) == 0:
        return np.zeros((setup.n_y, 0), dtype=complex)
    b = setup.combiner.conj().T @ steering_matrix(setup.n_r, aoa)
    t = steering_matrix(setup.n_t, aod).conj().T @ setup.pilots[:, p]
    return b * t[None, :]


def snr_to_noise_variance(h, setup, snr_db):
    """Noise variance giving per-entry received-pilot SNR ``snr_db``.

    SNR is the mean of ``|W^H H X|^2`` over entries divided by the noise
    variance of one entry.
    """
    if not np.isfinite(snr_db):
        raise ParameterError(f"snr_db must be finite, got {snr_db}")
    signal = noiseless_pilots(h, setup)
    power = np.mean(np.abs(signal) ** 2)
    if power <= 0:
        raise ParameterError("zero received signal power")
    return float(power / 10.0 ** (snr_db / 10.0))


def sound_params(params, setup, noise_variance, rng=None):
    """Convenience wrapper: assemble ``H`` from params and measure it."""
    h = assemble_channel(params, setup.n_r, setup.n_t)
    return measure(h, setup, noise_variance, rng)
