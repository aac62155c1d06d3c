"""Run the headline Monte Carlo experiments and print a summary table.

    python scripts/reproduce_claims.py --trials 100000 --master-seed 2024

Set EPRCOIN_THREADS to spread trials over several processes; results do not
depend on the thread count.
"""
import argparse
import time

from eprcoin.adversary import (
    AliceMixedProduct,
    BobPremeasureAll,
    BobPremeasureUnverified,
    BobZAxisSelect,
    HonestAlice,
    HonestBob,
    NaiveAliceNoLock,
)
from eprcoin.protocol import DesignatedRule, SessionConfig
from eprcoin.stats import ExperimentSpec, Success, estimate

FIXED, BOB, RANDOM = DesignatedRule.FIXED_FIRST, DesignatedRule.BOB_CHOOSES, DesignatedRule.PUBLIC_RANDOM
ONE, TARGET = Success.OUTCOME_EQUALS_ONE, Success.OUTCOME_EQUALS_TARGET

# label, alice, bob, rule, verification, success, expected p_hat, expected abort rate
EXPERIMENTS = [
    ("honest", HonestAlice(), HonestBob(), FIXED, True, ONE, 0.5, 0.0),
    ("mixed alice, no check", AliceMixedProduct(0.5), HonestBob(), FIXED, False, ONE, 0.75, None),
    ("premeasure all, no check", HonestAlice(), BobPremeasureAll(1), FIXED, False, TARGET, 0.5, None),
    ("z-axis select, no check", HonestAlice(), BobZAxisSelect(1), FIXED, False, TARGET, 0.5, None),
    ("premeasure all", HonestAlice(), BobPremeasureAll(1), FIXED, True, TARGET, None, 1 - (2 / 3) ** 10),
    ("mixed alice", AliceMixedProduct(0.5), HonestBob(), FIXED, True, ONE, None, 1 - (2 / 3) ** 10),
    ("no lock, z-axis select", NaiveAliceNoLock(), BobZAxisSelect(1), BOB, True, TARGET, 1.0, 0.0),
    ("premeasure unverified, bob rule", HonestAlice(), BobPremeasureUnverified(1), BOB, True, TARGET, None, 0.0),
    ("premeasure unverified, fixed", HonestAlice(), BobPremeasureUnverified(1), FIXED, True, TARGET, 0.5, 0.0),
    ("premeasure unverified, random", HonestAlice(), BobPremeasureUnverified(1), RANDOM, True, TARGET, 0.5, 0.0),
]


def _opt(x):
    return "-" if x is None else f"{x:.4f}"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--master-seed", type=int, default=2024)
    ap.add_argument("--n", type=int, default=20)
    args = ap.parse_args()

    header = f"{'experiment':<34} {'p_hat':>7} {'95% CI':>17} {'want':>7} {'abort':>7} {'want':>7} {'secs':>6}"
    print(header)
    print("-" * len(header))
    for label, alice, bob, rule, verify, success, want_p, want_abort in EXPERIMENTS:
        cfg = SessionConfig(n=args.n, designated_rule=rule, verification=verify)
        spec = ExperimentSpec(cfg, alice, bob, args.trials, args.master_seed, success)
        t0 = time.perf_counter()
        e = estimate(spec)
        secs = time.perf_counter() - t0
        ci = "undefined" if e.undefined else f"[{e.ci_low:.4f},{e.ci_high:.4f}]"
        print(f"{label:<34} {_opt(None if e.undefined else e.p_hat):>7} {ci:>17} {_opt(want_p):>7} "
              f"{e.abort_rate:>7.4f} {_opt(want_abort):>7} {secs:>6.1f}")


if __name__ == "__main__":
    main()
