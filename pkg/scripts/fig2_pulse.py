"""Tabulate the impulse response at 2 um and one noisy sampled realisation."""
import argparse
import csv
import sys

import numpy as np

from molloc.channel import ChannelParams, cir, peak_time, sample_time_series


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--distance", type=float, default=2e-6)
    ap.add_argument("--samples", type=int, default=60)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    p = ChannelParams(Q=5e5, D=1e-9, T_s=peak_time(args.distance, ChannelParams()) / 10)
    series = sample_time_series(args.distance, args.samples, p, np.random.default_rng(args.seed))
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t_s", "concentration_per_m3", "expected_count", "sampled_count"])
    for k, m in enumerate(series, start=1):
        t = k * p.T_s
        w.writerow([f"{t:.17g}", f"{cir(args.distance, t, p):.17g}", f"{m.lambda_true:.17g}", m.z])
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
