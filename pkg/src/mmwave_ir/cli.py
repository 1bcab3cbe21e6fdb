"""Command-line entry point: ``mmwave-ir {simulate,estimate,gen}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace

from .errors import DimensionError, ParameterError, SolverError
from .harness import ExperimentConfig, emit_csv, make_scenario, run_sweep
from .pipeline import estimate_channel
from .sounding import MeasurementSet, SoundingSetup

log = logging.getLogger("mmwave_ir")


def _parse_snr_list(text):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        out.append(math.inf if tok.lower() in ("inf", "noiseless") else float(tok))
    if not out:
        raise argparse.ArgumentTypeError("empty SNR list")
    return tuple(out)


def _load_config(args):
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        overrides["trials"] = args.trials
    if args.snr is not None:
        overrides["snr_db_list"] = args.snr
    if getattr(args, "no_precondition", False):
        overrides["precondition"] = False
    return replace(config, **overrides) if overrides else config


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def cmd_simulate(args):
    config = _load_config(args)
    log.info("sweep: %d SNR points x %d trials, %d worker(s)",
             len(config.snr_db_list), config.trials, args.threads)
    rows = run_sweep(config, workers=args.threads)
    emit_csv(rows, args.out)
    log.info("wrote %s", args.out)
    return 0


def cmd_estimate(args):
    setup = SoundingSetup.from_dict(_read_json(args.setup))
    meas = MeasurementSet.from_dict(_read_json(args.measurements))
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    result = estimate_channel(meas, setup, args.n_init or config.n_init, config.solver,
                              use_precondition=not args.no_precondition,
                              reseed_rounds=config.reseed_rounds,
                              expected_paths=config.paths)
    _write_json(args.out, result.to_dict())
    log.info("%s: %d path(s) after %d iterations", result.status,
             result.estimate.num_paths, result.iterations)
    return 0


def cmd_gen(args):
    config = _load_config(args)
    snr = config.snr_db_list[0] if args.snr is not None else math.inf
    params, setup, meas = make_scenario(config, snr, args.trial)
    os.makedirs(args.out_dir, exist_ok=True)
    _write_json(os.path.join(args.out_dir, "channel.json"), params.to_dict())
    _write_json(os.path.join(args.out_dir, "setup.json"), setup.to_dict())
    _write_json(os.path.join(args.out_dir, "measurements.json"), meas.to_dict())
    _write_json(os.path.join(args.out_dir, "config.json"), config.to_dict())
    log.info("wrote scenario (trial %d, snr %s dB) to %s", args.trial, snr, args.out_dir)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="mmwave-ir", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment configuration")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--snr", type=_parse_snr_list, help="comma-separated SNRs in dB ('inf' = noiseless)")

    sim = sub.add_parser("simulate", help="Monte Carlo sweep to CSV")
    common(sim)
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.add_argument("--trials", type=int, help="trials per SNR point")
    sim.add_argument("--threads", type=int, default=1, help="parallel worker processes")
    sim.add_argument("--no-precondition", action="store_true",
                     help="start IR from every grid pair (slow, for validation)")
    sim.set_defaults(func=cmd_simulate)

    est = sub.add_parser("estimate", help="estimate one channel from JSON files")
    est.add_argument("--measurements", required=True)
    est.add_argument("--setup", required=True)
    est.add_argument("--out", required=True)
    est.add_argument("--config", help="JSON configuration supplying solver options")
    est.add_argument("--n-init", type=int, help="number of coarse candidates")
    est.add_argument("--no-precondition", action="store_true")
    est.set_defaults(func=cmd_estimate)

    gen = sub.add_parser("gen", help="write one scenario as JSON")
    common(gen)
    gen.add_argument("--out-dir", required=True)
    gen.add_argument("--trial", type=int, default=0, help="trial index to generate")
    gen.set_defaults(func=cmd_gen)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ParameterError, DimensionError, SolverError, KeyError, json.JSONDecodeError) as exc:
        print(f"mmwave-ir: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
