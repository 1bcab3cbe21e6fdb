"""Iterative-reweighted super-resolution channel estimator.

The estimator minimizes the log-sum penalized fitting cost

    G(z, theta_R, theta_T) = sum_l log(|z_l|^2 + delta) + lam * ||Y - W^H H X||_F^2

by majorization-minimization.  At each outer iteration the log-sum term is
replaced by the quadratic ``lam^{-1} z^H D z`` with ``D = diag(1/(|z_l|^2 + delta))``
built from the current gains; the gains are then eliminated in closed form,
leaving a cost ``S_opt`` in the angles alone that is decreased by one
gradient step.

Internally every per-pilot quantity is expressed through

    B = W^H A_R(theta_R)   (N_Y x L),     C = X^H A_T(theta_T)   (N_X x L),

so ``K_p[:, l] = B[:, l] * conj(C[p, l])`` and::

    sum_p K_p^H K_p = (B^H B) * (C^H C)^T      (elementwise product)
    sum_p K_p^H y_p = diag(B^H Y C)
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .channel import (
    ChannelParams,
    circular_distance,
    steering_matrix,
    steering_matrix_derivative,
    wrap_angle,
)
from .errors import DimensionError, ParameterError, SolverError

logger = logging.getLogger(__name__)

__all__ = [
    "SolverOptions",
    "IrState",
    "IrResult",
    "DescentStep",
    "weight_matrix",
    "system_matrix",
    "solve_gains",
    "surrogate_value",
    "surrogate_objective",
    "surrogate_gradient",
    "residue",
    "update_lambda",
    "descend_angles",
    "merge_duplicates",
    "prune_paths",
    "log_sum_objective",
    "run_ir",
    "TRACE_COLUMNS",
    "write_trace_csv",
]

TRACE_COLUMNS = ("iteration", "lambda", "delta", "residue", "G", "S_opt", "path_count", "step_halvings")


@dataclass(frozen=True)
class SolverOptions:
    """Hyperparameters of :func:`run_ir`.

    ``step_init`` is the largest trial angle displacement of a line search,
    in grid cells of the larger array (see :func:`descend_angles`).
    """

    lambda_scale: float = 100.0
    lambda_max: float = 1e6
    delta_init: float = 1.0
    delta_min: float = 1e-10
    delta_shrink: float = 0.1
    prune_rel: float = 0.05
    prune_abs: float = 1e-4
    eps_th: float = 1e-6
    max_iter: int = 200
    max_backtracks: int = 20
    step_init: float = 1.0
    merge_tol: float = 1e-6
    cond_max: float = 1e12
    descent_metric: str = "diagonal"

    def __post_init__(self):
        positive = (
            "lambda_scale", "lambda_max", "delta_init", "delta_min", "delta_shrink",
            "prune_rel", "prune_abs", "eps_th", "max_iter", "max_backtracks", "step_init",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.delta_min > self.delta_init:
            raise ParameterError("delta_min must not exceed delta_init")
        if not 0 < self.prune_rel < 1:
            raise ParameterError("prune_rel must lie in (0, 1)")
        if self.descent_metric not in ("diagonal", "identity"):
            raise ParameterError(f"unknown descent_metric {self.descent_metric!r}")
        if self.delta_shrink > 1:
            raise ParameterError("delta_shrink must lie in (0, 1]")

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, doc):
        known = {k: v for k, v in doc.items() if k in cls.__dataclass_fields__}
        unknown = set(doc) - set(known)
        if unknown:
            raise ParameterError(f"unknown solver options: {sorted(unknown)}")
        return cls(**known)


@dataclass(frozen=True)
class IrState:
    """Estimates carried between outer iterations."""

    gains: np.ndarray
    aoa: np.ndarray
    aod: np.ndarray
    lam: float
    delta: float
    iteration: int = 0
    residue: float = float("nan")

    def __post_init__(self):
        if not (len(self.gains) == len(self.aoa) == len(self.aod)):
            raise DimensionError("gains, aoa and aod must have equal length")

    @property
    def num_paths(self):
        return len(self.gains)

    def params(self):
        return ChannelParams(self.gains, self.aoa, self.aod)


@dataclass
class IrResult:
    """Output of :func:`run_ir`."""

    estimate: ChannelParams
    trace: list = field(default_factory=list)
    converged: bool = False
    no_paths: bool = False
    iterations: int = 0
    jitter_events: int = 0

    @property
    def status(self):
        if self.no_paths:
            return "no paths detected"
        return "converged" if self.converged else "max_iter reached"


@dataclass(frozen=True)
class DescentStep:
    """Outcome of one line-searched gradient step on the angles."""

    aoa: np.ndarray
    aod: np.ndarray
    s_old: float
    s_new: float
    halvings: int
    accepted: bool


# --------------------------------------------------------------------------
# linear-algebra core


def _projections(setup, aoa, aod):
    b = setup.combiner.conj().T @ steering_matrix(setup.n_r, aoa)
    c = setup.pilots.conj().T @ steering_matrix(setup.n_t, aod)
    return b, c


def _projection_derivatives(setup, aoa, aod):
    db = setup.combiner.conj().T @ steering_matrix_derivative(setup.n_r, aoa)
    dc = setup.pilots.conj().T @ steering_matrix_derivative(setup.n_t, aod)
    return db, dc


def _check_angles(aoa, aod):
    aoa = np.atleast_1d(np.asarray(aoa, dtype=float))
    aod = np.atleast_1d(np.asarray(aod, dtype=float))
    if aoa.shape != aod.shape or aoa.ndim != 1:
        raise DimensionError(f"aoa {aoa.shape} and aod {aod.shape} must be equal-length vectors")
    return aoa, aod


def weight_matrix(gains, delta):
    """Diagonal reweighting ``1 / (|z_l|^2 + delta)`` as a vector."""
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    return 1.0 / (np.abs(np.asarray(gains)) ** 2 + delta)


def system_matrix(aoa, aod, weights, lam, setup):
    """``A = D / lam + sum_p K_p^H K_p`` (Hermitian positive definite)."""
    aoa, aod = _check_angles(aoa, aod)
    b, c = _projections(setup, aoa, aod)
    return _assemble_system(b, c, weights, lam)


def _assemble_system(b, c, weights, lam):
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (b.shape[1],):
        raise DimensionError(f"weights length {weights.shape} != path count {b.shape[1]}")
    gram = (b.conj().T @ b) * (c.conj().T @ c).T
    a = gram + np.diag(weights / lam)
    return 0.5 * (a + a.conj().T)


class _Solved:
    """Gain solve at fixed angles, reused by value and gradient evaluations."""

    __slots__ = ("b", "c", "a", "v", "z", "jitter", "condition")

    def __init__(self, setup, y, aoa, aod, weights, lam, cond_max=1e12):
        if len(aoa) == 0:
            raise DimensionError("at least one path is required")
        self.b, self.c = _projections(setup, aoa, aod)
        self.a = _assemble_system(self.b, self.c, weights, lam)
        self.v = np.einsum("yl,yp,pl->l", self.b.conj(), y, self.c)
        self.jitter = 0.0
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.v))):
            raise SolverError("non-finite gain system")
        eig = np.linalg.eigvalsh(self.a)
        self.condition = eig[-1] / eig[0] if eig[0] > 0 else np.inf
        a = self.a
        if not self.condition < cond_max:
            self.jitter = 1e-12 * np.trace(a).real / len(aoa)
            a = a + self.jitter * np.eye(len(aoa))
            logger.debug("ill-conditioned gain system (cond %.3e); jitter %.3e", self.condition, self.jitter)
        try:
            factor = sla.cho_factor(a, lower=True)
        except np.linalg.LinAlgError as exc:
            raise SolverError("gain system is not positive definite", self.condition) from exc
        self.z = sla.cho_solve(factor, self.v)
        if not np.all(np.isfinite(self.z)):
            raise SolverError("non-finite gain solution", self.condition)

    def value(self, y_energy):
        return float(y_energy - np.real(np.vdot(self.v, self.z)))


def solve_gains(aoa, aod, weights, lam, setup, measurements, *, cond_max=1e12):
    """Closed-form minimizer over the gains of the quadratic surrogate.

    Returns ``(D/lam + sum_p K_p^H K_p)^{-1} sum_p K_p^H y_p``.

    Raises
    ------
    SolverError
        If the system cannot be factorized even after diagonal jitter.
    """
    aoa, aod = _check_angles(aoa, aod)
    measurements.check_against(setup)
    return _Solved(setup, measurements.received, aoa, aod, weights, lam, cond_max).z


def surrogate_value(aoa, aod, weights, lam, setup, measurements, *, cond_max=1e12):
    """Surrogate minimized over gains: ``||Y||^2 - v^H A^{-1} v``."""
    aoa, aod = _check_angles(aoa, aod)
    measurements.check_against(setup)
    y = measurements.received
    solved = _Solved(setup, y, aoa, aod, weights, lam, cond_max)
    return solved.value(np.vdot(y, y).real)


def surrogate_objective(gains, aoa, aod, weights, lam, setup, measurements):
    """The surrogate at explicit gains: ``z^H D z / lam + ||Y - W^H H X||_F^2``."""
    gains = np.asarray(gains, dtype=complex)
    penalty = np.sum(np.asarray(weights) * np.abs(gains) ** 2) / lam
    return float(penalty + residue(gains, aoa, aod, setup, measurements))


def surrogate_gradient(aoa, aod, weights, lam, setup, measurements, *, cond_max=1e12):
    """Gradient of :func:`surrogate_value` with respect to both angle vectors.

    Returns
    -------
    grad_aoa, grad_aod : ndarray
        Real vectors of length L.
    """
    aoa, aod = _check_angles(aoa, aod)
    measurements.check_against(setup)
    y = measurements.received
    solved = _Solved(setup, y, aoa, aod, weights, lam, cond_max)
    return _angle_gradient(solved, setup, y, aoa, aod)


def _angle_gradient(solved, setup, y, aoa, aod, with_curvature=False):
    b, c, u = solved.b, solved.c, solved.z
    db, dc = _projection_derivatives(setup, aoa, aod)
    # theta_R: dv_l = db_l^H Y c_l, dA row l = (db_l^H b_m) (C^H C)^T[l, m]
    m_t = (c.conj().T @ c).T
    dv_r = np.einsum("yl,yp,pl->l", db.conj(), y, c)
    da_r = (db.conj().T @ b) * m_t
    grad_r = 2.0 * np.real(u.conj() * (da_r @ u - dv_r))
    # theta_T: K_p column l is b_l conj(c_pl), so c takes the derivative
    n_r = b.conj().T @ b
    dv_t = np.einsum("yl,yp,pl->l", b.conj(), y, dc)
    da_t = n_r * (c.conj().T @ dc).T
    grad_t = 2.0 * np.real(u.conj() * (da_t @ u - dv_t))
    if not with_curvature:
        return grad_r, grad_t
    # Gauss-Newton diagonal with the gains re-solved: only the part of a
    # column derivative orthogonal to the column itself changes the fit.
    # Cross-path coupling is dropped.
    u2 = 2.0 * np.abs(u) ** 2
    curv_r = u2 * _orthogonal_energy(b, db) * np.diag(m_t).real
    curv_t = u2 * np.diag(n_r).real * _orthogonal_energy(c, dc)
    return grad_r, grad_t, curv_r, curv_t


def _orthogonal_energy(m, dm):
    energy = np.sum(np.abs(m) ** 2, axis=0)
    along = np.abs(np.sum(m.conj() * dm, axis=0)) ** 2
    along = np.divide(along, energy, out=np.zeros_like(along), where=energy > 0)
    return np.maximum(np.sum(np.abs(dm) ** 2, axis=0) - along, 0.0)


def residue(gains, aoa, aod, setup, measurements):
    """Squared fitting error ``||Y - W^H A_R diag(z) A_T^H X||_F^2``."""
    aoa, aod = _check_angles(aoa, aod)
    y = measurements.received
    if len(aoa) == 0:
        return float(np.vdot(y, y).real)
    b, c = _projections(setup, aoa, aod)
    r = y - (b * np.asarray(gains)[None, :]) @ c.conj().T
    return float(np.vdot(r, r).real)


def update_lambda(res, opts):
    """Regularization update ``min(d / r, lambda_max)``."""
    if res < 0:
        raise ParameterError(f"residue must be >= 0, got {res}")
    if res == 0:
        return opts.lambda_max
    return min(opts.lambda_scale / res, opts.lambda_max)


def log_sum_objective(state, setup, measurements):
    """``sum_l log(|z_l|^2 + delta) + lam * residue`` at the state's parameters."""
    penalty = np.sum(np.log(np.abs(state.gains) ** 2 + state.delta))
    res = residue(state.gains, state.aoa, state.aod, setup, measurements)
    return float(penalty + state.lam * res)


def _search_direction(grad, curv, cap, metric):
    if metric == "identity":
        return -grad
    scaled = np.divide(grad, curv, out=np.zeros_like(grad), where=curv > 0)
    return -np.clip(scaled, -cap, cap)


def descend_angles(state, setup, measurements, opts):
    """One backtracking descent step on ``S_opt`` at the state's (lam, D).

    With ``opts.descent_metric == "identity"`` the step is a plain gradient
    step ``-eta * grad`` whose first trial moves the largest angle by
    ``opts.step_init`` grid cells.  The default ``"diagonal"`` metric divides
    each angle's gradient by its Gauss-Newton curvature and clips the result
    to ``opts.step_init`` grid cells, starting from ``eta = 1``; this keeps
    weak and strong paths converging at comparable rates.

    Either way ``eta`` is halved up to ``opts.max_backtracks`` times until the
    surrogate does not increase.  If no trial succeeds the input angles are
    returned unchanged.
    """
    y = measurements.received
    y_energy = np.vdot(y, y).real
    weights = weight_matrix(state.gains, state.delta)
    aoa, aod = _check_angles(state.aoa, state.aod)
    solved = _Solved(setup, y, aoa, aod, weights, state.lam, opts.cond_max)
    s_old = solved.value(y_energy)
    grad_r, grad_t, curv_r, curv_t = _angle_gradient(solved, setup, y, aoa, aod, with_curvature=True)
    cell_r, cell_t = opts.step_init / setup.n_r, opts.step_init / setup.n_t
    dir_r = _search_direction(grad_r, curv_r, cell_r, opts.descent_metric)
    dir_t = _search_direction(grad_t, curv_t, cell_t, opts.descent_metric)
    if opts.descent_metric == "identity":
        gmax = max(np.max(np.abs(grad_r)), np.max(np.abs(grad_t)))
        eta = opts.step_init / max(setup.n_r, setup.n_t) / gmax if gmax > 0 else 0.0
    else:
        eta = 1.0
    if not (np.any(dir_r) or np.any(dir_t)) or eta == 0.0:
        return DescentStep(aoa, aod, s_old, s_old, 0, False)
    for halvings in range(opts.max_backtracks + 1):
        new_r = wrap_angle(aoa + eta * dir_r)
        new_t = wrap_angle(aod + eta * dir_t)
        try:
            s_new = _Solved(setup, y, new_r, new_t, weights, state.lam, opts.cond_max).value(y_energy)
        except SolverError:
            s_new = np.inf
        if s_new <= s_old:
            return DescentStep(new_r, new_t, s_old, s_new, halvings, True)
        eta *= 0.5
    return DescentStep(aoa, aod, s_old, s_old, opts.max_backtracks, False)


def merge_duplicates(gains, aoa, aod, tol):
    """Merge paths closer than ``tol`` in both angles, summing their gains."""
    gains = np.asarray(gains, dtype=complex)
    keep = []
    merged = gains.copy()
    for l in range(len(gains)):
        for k in keep:
            if circular_distance(aoa[l], aoa[k]) < tol and circular_distance(aod[l], aod[k]) < tol:
                merged[k] += merged[l]
                break
        else:
            keep.append(l)
    keep = np.array(keep, dtype=int)
    return merged[keep], np.asarray(aoa)[keep], np.asarray(aod)[keep]


def prune_paths(state, opts):
    """Drop paths with ``|z_l| < max(prune_abs, prune_rel * max|z|)``.

    An empty state is returned when every path falls under the threshold.
    """
    if state.num_paths == 0:
        return state
    mag = np.abs(state.gains)
    threshold = max(opts.prune_abs, opts.prune_rel * mag.max())
    keep = mag >= threshold
    return replace(state, gains=state.gains[keep], aoa=state.aoa[keep], aod=state.aod[keep])


def run_ir(aoa0, aod0, setup, measurements, opts=None):
    """Estimate the channel from on-grid initial candidates.

    Parameters
    ----------
    aoa0, aod0 : array_like
        Initial AoA/AoD candidates (typically coarse grid estimates).
    setup : SoundingSetup
    measurements : MeasurementSet
    opts : SolverOptions, optional

    Returns
    -------
    IrResult
        Final estimate plus a per-iteration trace of dicts keyed by
        :data:`TRACE_COLUMNS` (and a few extra diagnostics).
    """
    opts = opts or SolverOptions()
    measurements.check_against(setup)
    aoa, aod = _check_angles(wrap_angle(aoa0), wrap_angle(aod0))
    if len(aoa) == 0:
        raise DimensionError("at least one initial candidate is required")
    y = measurements.received
    y_energy = np.vdot(y, y).real
    result = IrResult(ChannelParams())

    # seed with a lightly regularized fit: zero-gain weights at delta_init
    gains, aoa, aod = merge_duplicates(np.zeros(len(aoa), complex), aoa, aod, opts.merge_tol)
    seed = _Solved(setup, y, aoa, aod, weight_matrix(gains, opts.delta_init), opts.lambda_max, opts.cond_max)
    gains = seed.z
    delta = opts.delta_init
    res = residue(gains, aoa, aod, setup, measurements)
    state = IrState(gains, aoa, aod, opts.lambda_max, delta, 0, res)

    for it in range(1, opts.max_iter + 1):
        gains, aoa, aod = merge_duplicates(state.gains, state.aoa, state.aod, opts.merge_tol)
        lam = update_lambda(state.residue, opts)
        state = IrState(gains, aoa, aod, lam, delta, it, residue(gains, aoa, aod, setup, measurements))
        weights = weight_matrix(state.gains, delta)
        g_before = log_sum_objective(state, setup, measurements)
        s_before = surrogate_objective(state.gains, aoa, aod, weights, lam, setup, measurements)

        step = descend_angles(state, setup, measurements, opts)
        solved = _Solved(setup, y, step.aoa, step.aod, weights, lam, opts.cond_max)
        result.jitter_events += solved.jitter > 0
        trial = replace(state, gains=solved.z, aoa=step.aoa, aod=step.aod)
        g_after = log_sum_objective(trial, setup, measurements)
        s_after = solved.value(y_energy)

        pruned = prune_paths(trial, opts)
        new_res = residue(pruned.gains, pruned.aoa, pruned.aod, setup, measurements)
        result.trace.append({
            "iteration": it,
            "lambda": lam,
            "delta": delta,
            "residue": new_res,
            "G": g_after,
            "S_opt": s_after,
            "path_count": pruned.num_paths,
            "step_halvings": step.halvings,
            "G_before": g_before,
            "S_before": s_before,
            "S_opt_before_step": step.s_old,
            "S_opt_after_step": step.s_new,
            "step_accepted": step.accepted,
        })
        result.iterations = it

        if pruned.num_paths == 0:
            result.no_paths = True
            state = replace(pruned, residue=new_res)
            break
        same_order = pruned.num_paths == state.num_paths
        converged = False
        if same_order:
            change = np.linalg.norm(pruned.gains - state.gains)
            converged = change < opts.eps_th * max(np.linalg.norm(pruned.gains), np.finfo(float).tiny)
        state = replace(pruned, residue=new_res)
        delta = max(delta * opts.delta_shrink, opts.delta_min)
        if converged:
            result.converged = True
            break

    result.estimate = ChannelParams(state.gains, state.aoa, state.aod)
    return result


def write_trace_csv(trace, path):
    """Write a diagnostics trace with the columns in :data:`TRACE_COLUMNS`."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for row in trace:
            writer.writerow([row[c] for c in TRACE_COLUMNS])
