"""Seeded Monte Carlo sweeps over SNR comparing IR, OMP and perfect CSI."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .baselines import nmse, omp_estimate, spectral_efficiency
from .channel import assemble_channel, sample_channel
from .errors import ParameterError, SolverError
from .ir_solver import SolverOptions
from .pipeline import estimate_channel
from .sounding import make_setup, measure, snr_to_noise_variance
from .svd_init import choose_n_init

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "SweepRow",
    "CSV_COLUMNS",
    "METHODS",
    "trial_seed",
    "make_scenario",
    "run_trial",
    "run_sweep",
    "aggregate",
    "emit_csv",
    "read_csv",
]

CSV_COLUMNS = (
    "snr_db", "method", "nmse_db_mean", "nmse_db_std", "se_mean",
    "paths_mean", "iters_mean", "time_ms_mean", "failures",
)
METHODS = ("ir", "omp", "perfect")


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep configuration.  Every field has a default; ``None`` means derived.

    ``min_separation`` defaults to ``2 / max(n_r, n_t)``, ``n_init`` to
    twice the path count and ``omp_paths`` to the path count.
    """

    n_r: int = 64
    n_t: int = 64
    rf_rx: int = 4
    rf_tx: int = 4
    n_x: int = 24
    m: int = 6
    paths: int = 3
    min_separation: float | None = None
    snr_db_list: tuple = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
    trials: int = 100
    seed: int = 0
    solver: SolverOptions = field(default_factory=SolverOptions)
    n_init: int | None = None
    omp_paths: int | None = None
    precondition: bool = True
    reseed_rounds: int = 3

    def __post_init__(self):
        for name in ("n_r", "n_t", "rf_rx", "rf_tx", "n_x", "m", "paths", "trials"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1")
        object.__setattr__(self, "snr_db_list", tuple(float(s) for s in self.snr_db_list))
        if isinstance(self.solver, dict):
            object.__setattr__(self, "solver", SolverOptions.from_dict(self.solver))

    @property
    def n_y(self):
        return self.m * self.rf_rx

    @property
    def separation(self):
        if self.min_separation is None:
            return 2.0 / max(self.n_r, self.n_t)
        return self.min_separation

    @property
    def candidates(self):
        if self.n_init is None:
            return choose_n_init(self.paths, self.n_x, self.n_y)
        return self.n_init

    @property
    def streams(self):
        return min(self.rf_rx, self.rf_tx, self.paths)

    def to_dict(self):
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        doc["solver"] = self.solver.to_dict()
        doc["snr_db_list"] = [_snr_json(s) for s in self.snr_db_list]
        return doc

    @classmethod
    def from_dict(cls, doc):
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ParameterError(f"unknown config fields: {sorted(unknown)}")
        doc = dict(doc)
        if "snr_db_list" in doc:
            doc["snr_db_list"] = tuple(_snr_parse(s) for s in doc["snr_db_list"])
        return cls(**doc)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _snr_json(s):
    return "inf" if math.isinf(s) else s


def _snr_parse(s):
    if isinstance(s, str) and s.strip().lower() in ("inf", "+inf", "noiseless"):
        return math.inf
    return float(s)


def trial_seed(seed, *keys):
    """Seed derived by hashing the master seed with arbitrary keys."""
    text = ":".join(repr(k) for k in (seed, *keys)).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def make_scenario(config, snr_db, trial_index):
    """Channel, sounding setup and measurements of one trial.

    Channel and sounding depend only on ``(seed, trial_index)`` so the SNR
    points of a trial share them; the noise also depends on ``snr_db``.
    ``snr_db = inf`` gives noiseless pilots.
    """
    rng = np.random.default_rng(trial_seed(config.seed, "scenario", trial_index))
    params = sample_channel(rng, config.paths, config.separation)
    setup = make_setup(rng, config.n_r, config.n_t, config.rf_rx, config.m, config.n_x)
    h = assemble_channel(params, config.n_r, config.n_t)
    if math.isinf(snr_db):
        nv = 0.0
    else:
        nv = snr_to_noise_variance(h, setup, snr_db)
    noise_rng = np.random.default_rng(trial_seed(config.seed, "noise", _snr_json(snr_db), trial_index))
    return params, setup, measure(h, setup, nv, noise_rng)


@dataclass(frozen=True)
class TrialRecord:
    snr_db: float
    trial: int
    method: str
    nmse_db: float
    se: float
    paths: int
    iterations: int
    time_ms: float
    failed: bool
    status: str = ""


def _se(h_est, h, snr_db, streams):
    if math.isinf(snr_db):
        return math.nan
    return spectral_efficiency(h_est, h, 10.0 ** (snr_db / 10.0), streams)


def run_trial(config, snr_db, trial_index):
    """Run every method on one seeded scenario; returns a list of records."""
    snr_db = float(snr_db)
    params, setup, meas = make_scenario(config, snr_db, trial_index)
    h = assemble_channel(params, config.n_r, config.n_t)
    records = []

    t0 = time.perf_counter()
    try:
        est = estimate_channel(meas, setup, config.candidates, config.solver,
                               use_precondition=config.precondition,
                               reseed_rounds=config.reseed_rounds)
        h_ir = assemble_channel(est.estimate, config.n_r, config.n_t)
        ir = dict(paths=est.estimate.num_paths, iterations=est.iterations,
                  failed=not est.converged, status=est.status)
    except SolverError as exc:
        h_ir = np.zeros_like(h)
        ir = dict(paths=0, iterations=0, failed=True, status=f"solver error: {exc}")
    elapsed = 1e3 * (time.perf_counter() - t0)
    records.append(TrialRecord(snr_db, trial_index, "ir", nmse(h, h_ir),
                               _se(h_ir, h, snr_db, config.streams), time_ms=elapsed, **ir))

    t0 = time.perf_counter()
    omp = omp_estimate(meas, setup, config.omp_paths or config.paths)
    h_omp = omp.channel()
    elapsed = 1e3 * (time.perf_counter() - t0)
    records.append(TrialRecord(snr_db, trial_index, "omp", nmse(h, h_omp),
                               _se(h_omp, h, snr_db, config.streams), omp.num_paths,
                               omp.num_paths, elapsed, False, "ok"))

    records.append(TrialRecord(snr_db, trial_index, "perfect", nmse(h, h),
                               _se(h, h, snr_db, config.streams), params.num_paths,
                               0, 0.0, False, "ok"))
    return records


def _run_task(task):
    config, snr_db, trial = task
    return run_trial(config, snr_db, trial)


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    method: str
    nmse_db_mean: float
    nmse_db_std: float
    se_mean: float
    paths_mean: float
    iters_mean: float
    time_ms_mean: float
    failures: int


def aggregate(records):
    """Per-(snr, method) summary rows, independent of record order."""
    groups = {}
    for rec in sorted(records, key=lambda r: (r.snr_db, METHODS.index(r.method), r.trial)):
        groups.setdefault((rec.snr_db, rec.method), []).append(rec)
    rows = []
    for (snr, method), recs in groups.items():
        nm = np.array([r.nmse_db for r in recs])
        se = np.array([r.se for r in recs])
        rows.append(SweepRow(
            snr, method,
            float(np.mean(nm)), float(np.std(nm)),
            float(np.mean(se)) if not np.all(np.isnan(se)) else math.nan,
            float(np.mean([r.paths for r in recs])),
            float(np.mean([r.iterations for r in recs])),
            float(np.mean([r.time_ms for r in recs])),
            int(sum(r.failed for r in recs)),
        ))
    return rows


def run_sweep(config, workers=1, *, return_records=False):
    """All trials at every SNR of the config, aggregated by :func:`aggregate`.

    ``workers > 1`` distributes trials over a process pool; results do not
    depend on the worker count.
    """
    tasks = [(config, snr, t) for snr in config.snr_db_list for t in range(config.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            nested = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        nested = [_run_task(t) for t in tasks]
    records = [r for recs in nested for r in recs]
    rows = aggregate(records)
    return (rows, records) if return_records else rows


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(rows, path):
    """Write sweep rows with the columns in :data:`CSV_COLUMNS`."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                doc = asdict(row)
                writer.writerow([_fmt(doc[c]) for c in CSV_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write sweep results to {path}: {exc}") from exc


def read_csv(path):
    """Parse a file written by :func:`emit_csv` back into rows."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ParameterError(f"{path}: unexpected header {reader.fieldnames}")
        for doc in reader:
            rows.append(SweepRow(
                float(doc["snr_db"]), doc["method"],
                *(float(doc[c]) for c in CSV_COLUMNS[2:-1]),
                int(doc["failures"]),
            ))
    return rows
