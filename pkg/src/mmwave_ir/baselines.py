"""On-grid OMP baseline, NMSE and the spectral-efficiency proxy."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, assemble_channel
from .errors import DimensionError, ParameterError
from .svd_init import dft_dictionary

logger = logging.getLogger(__name__)

__all__ = ["GridEstimate", "omp_estimate", "nmse", "spectral_efficiency", "SpectralEfficiency", "NMSE_FLOOR_DB"]

NMSE_FLOOR_DB = -300.0


@dataclass(frozen=True)
class GridEstimate:
    """Path gains on grid indices: AoA ``aoa_index / n_r``, AoD ``aod_index / n_t``."""

    gains: np.ndarray
    aoa_index: np.ndarray
    aod_index: np.ndarray
    n_r: int
    n_t: int
    residuals: tuple = field(default=())

    @property
    def num_paths(self):
        return len(self.gains)

    @property
    def aoa(self):
        return np.asarray(self.aoa_index) / self.n_r

    @property
    def aod(self):
        return np.asarray(self.aod_index) / self.n_t

    def params(self):
        return ChannelParams(self.gains, self.aoa, self.aod)

    def channel(self):
        return assemble_channel(self.params(), self.n_r, self.n_t)


def omp_estimate(measurements, setup, max_paths, *, tol=1e-6):
    """Greedy pursuit over the ``n_r * n_t`` grid-pair dictionary.

    Atom ``(j, k)`` maps a gain to ``W^H a_R(j/n_r) a_T(k/n_t)^H X``.  Each
    round adds the atom whose normalized correlation with the residual is
    largest, then refits all selected gains by least squares.  Stops after
    ``max_paths`` atoms or once a round lowers the residual energy by less
    than ``tol`` relative.
    """
    if max_paths < 1:
        raise ParameterError(f"max_paths must be >= 1, got {max_paths}")
    measurements.check_against(setup)
    y = measurements.received
    b = setup.combiner.conj().T @ dft_dictionary(setup.n_r)
    c = setup.pilots.conj().T @ dft_dictionary(setup.n_t)
    norms = np.outer(np.linalg.norm(b, axis=0), np.linalg.norm(c, axis=0))
    norms[norms == 0] = np.inf

    rows, cols, atoms = [], [], []
    gains = np.zeros(0, dtype=complex)
    resid = y
    energy = np.vdot(y, y).real
    history = [energy]
    while len(rows) < max_paths and energy > 0:
        corr = np.abs(b.conj().T @ resid @ c) / norms
        j, k = np.unravel_index(np.argmax(corr), corr.shape)
        if (j, k) in zip(rows, cols):
            break
        atoms.append(np.outer(b[:, j], c[:, k].conj()).ravel())
        phi = np.stack(atoms, axis=1)
        trial, *_ = np.linalg.lstsq(phi, y.ravel(), rcond=None)
        new_resid = y - (phi @ trial).reshape(y.shape)
        new_energy = np.vdot(new_resid, new_resid).real
        if energy - new_energy < tol * energy:
            atoms.pop()
            break
        rows.append(j)
        cols.append(k)
        gains, resid, energy = trial, new_resid, new_energy
        history.append(energy)
    return GridEstimate(np.asarray(gains, dtype=complex), np.array(rows, dtype=int),
                        np.array(cols, dtype=int), setup.n_r, setup.n_t, tuple(history))


def nmse(h_true, h_est):
    """``10 log10(||H - H_hat||_F^2 / ||H||_F^2)``, floored at -300 dB."""
    h_true, h_est = np.asarray(h_true), np.asarray(h_est)
    if h_true.shape != h_est.shape:
        raise DimensionError(f"shape mismatch {h_true.shape} vs {h_est.shape}")
    ref = np.linalg.norm(h_true) ** 2
    if ref == 0:
        raise ParameterError("true channel is zero")
    ratio = np.linalg.norm(h_true - h_est) ** 2 / ref
    if ratio == 0:
        return NMSE_FLOOR_DB
    return max(10.0 * np.log10(ratio), NMSE_FLOOR_DB)


@dataclass(frozen=True)
class SpectralEfficiency:
    bits: float
    pinv_fallback: bool


def spectral_efficiency(h_est, h_true, snr_linear, n_streams, *, detail=False):
    """Achievable rate on ``h_true`` with SVD-truncation beams from ``h_est``.

    ``P`` holds the leading ``n_streams`` right singular vectors of
    ``h_est`` and ``Q`` the leading left ones; the rate is
    ``log2 det(I + snr/Ns (Q^H Q)^{-1} Q^H H P P^H H^H Q)``.  When ``Q^H Q``
    is rank deficient a pseudo-inverse is used and, with ``detail=True``,
    reported in the returned :class:`SpectralEfficiency`.
    """
    h_est, h_true = np.asarray(h_est), np.asarray(h_true)
    if h_est.shape != h_true.shape:
        raise DimensionError(f"shape mismatch {h_est.shape} vs {h_true.shape}")
    if not 1 <= n_streams <= min(h_true.shape):
        raise ParameterError(f"n_streams must lie in [1, {min(h_true.shape)}], got {n_streams}")
    if snr_linear < 0:
        raise ParameterError("snr_linear must be >= 0")
    u, _, vh = np.linalg.svd(h_est)
    q = u[:, :n_streams]
    p = vh[:n_streams].conj().T
    gram = q.conj().T @ q
    fallback = np.linalg.matrix_rank(gram) < n_streams
    inv = np.linalg.pinv(gram) if fallback else np.linalg.inv(gram)
    if fallback:
        logger.debug("rank-deficient combiner Gram matrix; using pseudo-inverse")
    eff = q.conj().T @ h_true @ p
    m = np.eye(n_streams) + (snr_linear / n_streams) * inv @ eff @ eff.conj().T
    _, logdet = np.linalg.slogdet(m)
    bits = float(logdet.real / np.log(2.0))
    if detail:
        return SpectralEfficiency(bits, bool(fallback))
    return bits
