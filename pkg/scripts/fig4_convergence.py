"""Gradient-descent squared error per iteration on the reference layout."""
import argparse

from molloc.config import load_config
from molloc.harness import export_results, run_convergence


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/acceptance.toml")
    ap.add_argument("--set", dest="overrides", action="append", default=[])
    ap.add_argument("--noisy", action="store_true", help="use Poisson counts instead of exact means")
    ap.add_argument("--out", default="convergence.csv")
    args = ap.parse_args()

    overrides = ["estimator=gradient-descent", *args.overrides]
    if not args.noisy:
        overrides.append("channel.noise_free=true")
    res = run_convergence(load_config(args.config, overrides))
    export_results(res, args.out, "csv")
    for k, e in enumerate(res.squared_error_per_iter):
        print(f"{k:4d} {e:.3e}")
    print("converged:", res.trajectory.converged)


if __name__ == "__main__":
    main()
