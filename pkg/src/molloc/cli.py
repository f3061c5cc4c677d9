"""Command-line front end: ``molloc <subcommand> --config scenario.toml``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys

import numpy as np

from .crb import crb as compute_crb
from .channel import UnrepresentableAlpha, sample_peak_measurements
from .config import ConfigError, apply_overrides, read_document, scenario_from_document
from .estimators import AnchorCollision, MeasurementFailure, gradient_descent, triangulate
from .geometry import DegenerateGeometryError
from .harness import (Estimator, ScenarioError, export_results, run_convergence, run_mse_sweep,
                      trial_rng)

log = logging.getLogger("molloc")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

SUBCOMMANDS = ("simulate", "triangulate", "gradient-descent", "crb", "sweep", "convergence")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="molloc", description=__doc__)
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="TOML scenario file")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted-path config override, repeatable")
    p.add_argument("--noise-free", action="store_true", help="use exact means instead of draws")
    p.add_argument("--peak-model", choices=("derived", "paper-literal"))
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def _resolve(args):
    doc = read_document(args.config)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.noise_free:
        overrides.append("channel.noise_free=true")
    if args.peak_model:
        overrides.append(f'channel.peak_model="{args.peak_model}"')
    return scenario_from_document(apply_overrides(doc, overrides))


def _write_rows(header, rows, out):
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in r])
    finally:
        if out:
            fh.close()


def _emit(payload: dict, header, rows, args):
    if args.format == "json":
        text = json.dumps(payload, indent=2)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            print(text)
    else:
        _write_rows(header, rows, args.out)


def _distances(cfg):
    return np.linalg.norm(cfg.anchors.positions - cfg.source, axis=1)


def _measure(cfg):
    return sample_peak_measurements(_distances(cfg), cfg.channel, trial_rng(cfg.seed, 0, 0))


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        log.info("resolved config: %s", json.dumps(cfg.to_dict(), sort_keys=True))
        cmd = args.subcommand
        if cmd == "simulate":
            ms = _measure(cfg)
            rows = [(m.sensor_index, float(d), m.lambda_true, m.z)
                    for m, d in zip(ms, _distances(cfg))]
            header = ["sensor", "distance_m", "expected_count", "z"]
            _emit({"config": cfg.to_dict(), "measurements": [dict(zip(header, r)) for r in rows]},
                  header, rows, args)
        elif cmd == "triangulate":
            y = triangulate(cfg.anchors, _measure(cfg), cfg.channel)
            err = float(np.sum((y - cfg.source) ** 2))
            header = [f"y{i}_m" for i in range(y.size)] + ["squared_error_m2"]
            row = [float(v) for v in y] + [err]
            _emit({"config": cfg.to_dict(), "estimate_m": y.tolist(), "squared_error_m2": err},
                  header, [row], args)
        elif cmd == "gradient-descent":
            traj = gradient_descent(cfg.anchors, _measure(cfg), cfg.channel, cfg.gd_options)
            y = traj.iterates[-1]
            err = float(np.sum((y - cfg.source) ** 2))
            header = [f"y{i}_m" for i in range(y.size)] + ["squared_error_m2", "iterations",
                                                           "converged"]
            row = [float(v) for v in y] + [err, traj.iterations_used, traj.converged]
            _emit({"config": cfg.to_dict(), "estimate_m": y.tolist(), "squared_error_m2": err,
                   "iterations": traj.iterations_used, "converged": traj.converged},
                  header, [row], args)
        elif cmd == "crb":
            res = compute_crb(cfg.source, cfg.anchors, cfg.channel)
            F = res.fim.matrix
            N = F.shape[0]
            header = ["crb_m2"] + [f"fim_{i}{j}" for i in range(N) for j in range(N)]
            row = [res.crb] + [float(v) for v in F.ravel()]
            _emit({"config": cfg.to_dict(), "crb_m2": res.crb, "fim_per_m2": F.tolist()},
                  header, [row], args)
        elif cmd in ("sweep", "convergence"):
            if cmd == "convergence" and cfg.estimator is Estimator.TRIANGULATION:
                cfg = dataclasses.replace(cfg, estimator=Estimator.GRADIENT_DESCENT)
            result = run_mse_sweep(cfg) if cmd == "sweep" else run_convergence(cfg)
            if args.out:
                export_results(result, args.out, args.format)
            else:
                export_results(result, "/dev/stdout", args.format)
    except (ConfigError, ScenarioError, DegenerateGeometryError) as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except (MeasurementFailure, AnchorCollision, UnrepresentableAlpha, FloatingPointError,
            OverflowError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
