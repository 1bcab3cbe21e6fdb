"""Two-stage estimation: SVD preconditioning followed by the IR solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, assemble_channel
from .ir_solver import SolverOptions, run_ir
from .sounding import MeasurementSet, noiseless_pilots
from .svd_init import CoarseEstimate, choose_n_init, precondition

__all__ = ["PipelineResult", "estimate_channel", "full_grid_candidates", "noise_floor"]


@dataclass
class PipelineResult:
    estimate: ChannelParams
    coarse: CoarseEstimate | None
    converged: bool
    no_paths: bool
    iterations: int
    reseeds: int
    trace: list

    @property
    def status(self):
        if self.no_paths:
            return "no paths detected"
        return "converged" if self.converged else "max_iter reached"

    def to_dict(self):
        return {
            "estimate": self.estimate.to_dict(),
            "coarse": None if self.coarse is None else self.coarse.to_dict(),
            "status": self.status,
            "iterations": self.iterations,
            "reseeds": self.reseeds,
        }


def full_grid_candidates(n_r, n_t):
    """Every (AoA, AoD) grid pair, ``n_r * n_t`` candidates."""
    aoa, aod = np.meshgrid(np.arange(n_r) / n_r, np.arange(n_t) / n_t, indexing="ij")
    return aoa.ravel(), aod.ravel()


def noise_floor(measurements):
    """Residual energy below which the remaining error is treated as noise.

    Mean plus three standard deviations of ``||N||_F^2`` for complex
    Gaussian noise, plus a tiny relative slack for the noiseless case.
    """
    y = measurements.received
    n = y.size
    s2 = measurements.noise_variance
    return n * s2 + 3.0 * np.sqrt(n) * s2 + 1e-10 * np.vdot(y, y).real


def estimate_channel(measurements, setup, n_init=None, opts=None, *, use_precondition=True,
                     reseed_rounds=3, reseed_candidates=3, expected_paths=3):
    """Estimate channel parameters from received pilots.

    The IR solver is seeded with the ``n_init`` coarse grid pairs of
    :func:`~mmwave_ir.svd_init.precondition` (or every grid pair when
    ``use_precondition`` is false).  A path that the coarse stage
    mis-paired is usually pruned rather than corrected, so while the fitting
    residual stays above :func:`noise_floor` the residual itself is
    preconditioned and the solver restarted from the current estimate plus
    ``reseed_candidates`` new pairs, at most ``reseed_rounds`` times.
    """
    opts = opts or SolverOptions()
    measurements.check_against(setup)
    if n_init is None:
        n_init = choose_n_init(expected_paths, setup.n_x, setup.n_y)
    coarse = None
    if use_precondition:
        coarse = precondition(measurements, setup, n_init)
        aoa0, aod0 = coarse.aoa_grid, coarse.aod_grid
    else:
        aoa0, aod0 = full_grid_candidates(setup.n_r, setup.n_t)
    result = run_ir(aoa0, aod0, setup, measurements, opts)
    iterations = result.iterations
    trace = list(result.trace)
    extra = min(reseed_candidates, setup.n_x, setup.n_y)
    floor = noise_floor(measurements)
    reseeds = 0
    for _ in range(reseed_rounds):
        if result.no_paths:
            break
        est = result.estimate
        r = measurements.received - noiseless_pilots(assemble_channel(est, setup.n_r, setup.n_t), setup)
        if np.vdot(r, r).real <= floor:
            break
        reseeds += 1
        fresh = precondition(MeasurementSet(r, measurements.noise_variance), setup, extra)
        result = run_ir(np.r_[est.aoa, fresh.aoa_grid], np.r_[est.aod, fresh.aod_grid],
                        setup, measurements, opts)
        iterations += result.iterations
        trace.extend(result.trace)
    return PipelineResult(result.estimate, coarse, result.converged, result.no_paths,
                          iterations, reseeds, trace)
