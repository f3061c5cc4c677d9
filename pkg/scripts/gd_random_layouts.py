"""How often noise-free gradient descent reaches 1 nm on random in-hull layouts.

Reports success rate by step rule and iteration budget, plus the conditioning
of the cost at the source for the failures.
"""
import argparse

import numpy as np

from molloc.channel import ChannelParams, alpha, expected_peak_count
from molloc.estimators import GdOptions, gradient_descent
from molloc.harness import random_scenario

EXACT = ChannelParams(noise_free=True)


def curvature_condition(anchors, y):
    diff = anchors.positions - y
    d = np.linalg.norm(diff, axis=1)
    u = diff / d[:, None]
    w = (3 * alpha(EXACT) / d**4) ** 2
    ev = np.linalg.eigvalsh(np.einsum("i,ij,ik->jk", w, u, u))
    return ev[-1] / ev[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--seed", type=int, default=4048)
    args = ap.parse_args()

    for rule in ("bb", "fixed"):
        for budget in (100, 1000):
            rng = np.random.default_rng(args.seed)
            ok, kappas = 0, []
            for _ in range(args.trials):
                anchors, y = random_scenario(rng, args.dim)
                z = expected_peak_count(np.linalg.norm(anchors.positions - y, axis=1), EXACT)
                traj = gradient_descent(anchors, z, EXACT, GdOptions(step_rule=rule, max_iters=budget))
                err = [np.sum((q - y) ** 2) for q in traj.iterates]
                if err[-1] <= 1e-18:
                    ok += 1
                else:
                    kappas.append(curvature_condition(anchors, y))
            med = f"{np.median(kappas):.3g}" if kappas else "-"
            print(f"rule={rule:5s} budget={budget:5d} success={ok}/{args.trials} "
                  f"median curvature condition of failures={med}")


if __name__ == "__main__":
    main()
