"""Tabulate simulated singlet anti-correlation against (1 + cos theta) / 2.

    python scripts/born_rule_scan.py --samples 10000 --steps 12
"""
import argparse
import math
import random

from eprcoin.qstate import SINGLET, Z_AXIS, Axis, Particle, measure_spin


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--steps", type=int, default=12, help="angles are k*pi/steps for k = 0..steps")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    print(f"{'theta/deg':>9} {'simulated':>10} {'exact':>8} {'diff':>8}")
    for k in range(args.steps + 1):
        theta = k * math.pi / args.steps
        b = Axis.from_angles(theta)
        anti = 0
        for _ in range(args.samples):
            oa, post = measure_spin(SINGLET, Particle.A, Z_AXIS, rng.random())
            ob, _ = measure_spin(post, Particle.B, b, rng.random())
            anti += oa is not ob
        freq = anti / args.samples
        exact = (1 + math.cos(theta)) / 2
        print(f"{math.degrees(theta):>9.1f} {freq:>10.4f} {exact:>8.4f} {freq - exact:>+8.4f}")


if __name__ == "__main__":
    main()
