"""Abort rate of the premeasure-all attack as the number of pairs grows.

Each challenged pair that Bob collapsed along z passes a random-axis check
with probability 2/3, so the abort rate should follow 1 - (2/3)^(n/2).

    python scripts/detection_vs_n.py --trials 5000
"""
import argparse

from eprcoin.adversary import BobPremeasureAll, HonestAlice
from eprcoin.protocol import SessionConfig
from eprcoin.stats import ExperimentSpec, estimate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=5000)
    ap.add_argument("--master-seed", type=int, default=1)
    args = ap.parse_args()

    print(f"{'n':>4} {'abort':>8} {'oracle':>8}")
    for n in (2, 4, 6, 8, 10, 14, 20):
        spec = ExperimentSpec(SessionConfig(n=n), HonestAlice(), BobPremeasureAll(1), args.trials, args.master_seed)
        e = estimate(spec)
        print(f"{n:>4} {e.abort_rate:>8.4f} {1 - (2 / 3) ** (n // 2):>8.4f}")


if __name__ == "__main__":
    main()
