"""SVD-based coarse on-grid AoA/AoD detection used to seed the IR solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import steering_matrix
from .errors import ParameterError

__all__ = ["CoarseEstimate", "dft_dictionary", "precondition", "choose_n_init"]


@dataclass(frozen=True)
class CoarseEstimate:
    """Grid-valued candidate angles and the singular values that produced them."""

    aoa_grid: np.ndarray
    aod_grid: np.ndarray
    singular_values: np.ndarray

    @property
    def n_init(self):
        return len(self.aoa_grid)

    def to_dict(self):
        return {
            "aoa_grid": self.aoa_grid.tolist(),
            "aod_grid": self.aod_grid.tolist(),
            "singular_values": self.singular_values.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            np.asarray(doc["aoa_grid"], dtype=float),
            np.asarray(doc["aod_grid"], dtype=float),
            np.asarray(doc["singular_values"], dtype=float),
        )


def dft_dictionary(n):
    """Grid steering vectors as columns: column ``k`` is ``a(k / n)``."""
    if n < 1:
        raise ParameterError(f"dictionary size must be >= 1, got {n}")
    return steering_matrix(n, np.arange(n) / n)


def choose_n_init(expected_paths, n_x=None, n_y=None, factor=2):
    """Candidate count: ``factor * expected_paths`` capped at ``min(n_x, n_y)``."""
    if expected_paths < 1:
        raise ParameterError(f"expected_paths must be >= 1, got {expected_paths}")
    n_init = factor * expected_paths
    caps = [c for c in (n_x, n_y) if c is not None]
    if caps:
        n_init = min(n_init, *caps)
    return int(n_init)


def _grid_match(proj, vecs, n, oversample, normalize):
    """Grid index in ``0..n-1`` best correlated with each column of ``vecs``.

    ``proj`` maps a steering vector into the measurement domain (``W^H`` or
    ``X^H``).  With ``oversample > 1`` the scan runs on a finer angle grid,
    the peak is located by parabolic interpolation, and then snapped to the
    nearest native grid point.
    """
    fine = n * oversample
    dictionary = proj @ steering_matrix(n, np.arange(fine) / fine)
    corr = np.abs(dictionary.conj().T @ vecs)
    if normalize:
        norms = np.linalg.norm(dictionary, axis=0)
        corr = corr / np.where(norms > 0, norms, 1.0)[:, None]
    peak = np.argmax(corr, axis=0)
    if oversample == 1:
        return peak
    cols = np.arange(corr.shape[1])
    left, mid, right = corr[(peak - 1) % fine, cols], corr[peak, cols], corr[(peak + 1) % fine, cols]
    curvature = left - 2.0 * mid + right
    offset = np.divide(0.5 * (left - right), curvature, out=np.zeros_like(mid), where=curvature < 0)
    location = (peak + np.clip(offset, -0.5, 0.5)) / oversample
    return np.mod(np.floor(location + 0.5).astype(int), n)


def precondition(measurements, setup, n_init, *, normalize=True, oversample=8):
    """Coarse angle candidates from the leading singular vectors of ``Y``.

    For each of the ``n_init`` dominant singular triples ``(sigma_i, u_i, v_i)``
    the AoA is the grid point maximizing ``|(W^H D_R)^H u_i|`` and the AoD
    the grid point maximizing ``|(X^H D_T)^H v_i|``.  Duplicate grid hits are
    kept; the IR solver merges or prunes them.

    Parameters
    ----------
    normalize : bool
        Divide each correlation by the norm of its dictionary column, so
        grid directions that the random combiner happens to amplify are not
        favoured.
    oversample : int
        Scan ``oversample`` times finer than the grid and interpolate the
        peak before snapping to the nearest grid point.
        ``normalize=False, oversample=1`` is the plain
        DFT-grid argmax.
    """
    measurements.check_against(setup)
    rank_budget = min(setup.n_x, setup.n_y)
    if not 1 <= n_init <= rank_budget:
        raise ParameterError(f"n_init must lie in [1, {rank_budget}], got {n_init}")
    if oversample < 1:
        raise ParameterError(f"oversample must be >= 1, got {oversample}")
    u, s, vh = np.linalg.svd(measurements.received, full_matrices=False)
    u, s, v = u[:, :n_init], s[:n_init], vh[:n_init].conj().T
    aoa = _grid_match(setup.combiner.conj().T, u, setup.n_r, oversample, normalize) / setup.n_r
    aod = _grid_match(setup.pilots.conj().T, v, setup.n_t, oversample, normalize) / setup.n_t
    return CoarseEstimate(aoa, aod, s)
