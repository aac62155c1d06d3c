"""Monte Carlo bias estimation and closed-form cross-checks."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from . import seeding
from .adversary import AliceStrategy, BobStrategy
from .protocol import SessionConfig, run_full_session
from .qstate import (
    SINGLET,
    Axis,
    BellKind,
    Particle,
    PureTwoQubitState,
    SpinOutcome,
    Z_AXIS,
    anticorrelation_probability,
    outcome_probability,
    uniform_pauli_mixture,
)

Z95 = 1.959963984540054


class Success(Enum):
    OUTCOME_EQUALS_TARGET = "target"
    OUTCOME_EQUALS_ONE = "one"


@dataclass(frozen=True)
class ExperimentSpec:
    """What to run: a session template, two strategies, a trial count and a seed.

    ``config.seed`` is ignored; trial ``i`` runs with
    ``seeding.trial_seed(master_seed, i)``. Under ``OUTCOME_EQUALS_TARGET``
    the target is ``target_bit`` if given, else Bob's declared target.
    """

    config: SessionConfig
    alice: AliceStrategy
    bob: BobStrategy
    trials: int
    master_seed: int = 0
    success: Success = Success.OUTCOME_EQUALS_TARGET
    target_bit: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials!r}")
        seeding.check_seed(self.master_seed)
        if self.success is Success.OUTCOME_EQUALS_TARGET and self.target() is None:
            raise ValueError("OUTCOME_EQUALS_TARGET needs target_bit or a Bob strategy with a target")

    def target(self) -> Optional[int]:
        if self.success is Success.OUTCOME_EQUALS_ONE:
            return 1
        if self.target_bit is not None:
            return self.target_bit
        return self.bob.target_bit


@dataclass(frozen=True)
class BiasEstimate:
    trials: int
    non_aborted: int
    successes: int
    p_hat: float
    epsilon_hat: float
    ci_low: float
    ci_high: float
    abort_rate: float
    anticorrelation_violations: int = 0
    undefined: bool = False

    def as_record(self) -> dict:
        return {
            "trials": self.trials,
            "non_aborted": self.non_aborted,
            "successes": self.successes,
            "p_hat": self.p_hat,
            "epsilon_hat": self.epsilon_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "abort_rate": self.abort_rate,
            "anticorrelation_violations": self.anticorrelation_violations,
            "undefined": self.undefined,
        }


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise ValueError("wilson_interval needs n >= 1")
    if not 0 <= successes <= n:
        raise ValueError(f"successes must lie in [0, {n}], got {successes}")
    if z <= 0:
        raise ValueError("z must be positive")
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    low = 0.0 if successes == 0 else max(0.0, min(p, centre - half))
    high = 1.0 if successes == n else min(1.0, max(p, centre + half))
    return low, high


@dataclass
class _Counts:
    non_aborted: int = 0
    successes: int = 0
    violations: int = 0

    def add(self, other: "_Counts") -> None:
        self.non_aborted += other.non_aborted
        self.successes += other.successes
        self.violations += other.violations


def _run_range(spec: ExperimentSpec, start: int, stop: int) -> _Counts:
    counts = _Counts()
    target = spec.target()
    base = spec.config
    for i in range(start, stop):
        cfg = replace(base, seed=seeding.trial_seed(spec.master_seed, i))
        res = run_full_session(cfg, spec.alice, spec.bob)
        if res.outcome_bit is None:
            continue
        counts.non_aborted += 1
        if res.outcome_bit == target:
            counts.successes += 1
        if any(a == b for _, a, b in res.final_pair_bits):
            counts.violations += 1
    return counts


def _workers() -> int:
    env = os.environ.get("EPRCOIN_THREADS")
    if env:
        return max(1, int(env))
    return 1


def estimate(spec: ExperimentSpec, workers: Optional[int] = None) -> BiasEstimate:
    """Run ``spec.trials`` sessions and summarize.

    Only counts are aggregated, so the result does not depend on ``workers``.
    """
    workers = workers or _workers()
    workers = max(1, min(workers, spec.trials))
    if workers == 1:
        counts = _run_range(spec, 0, spec.trials)
    else:
        bounds = np.linspace(0, spec.trials, workers + 1).astype(int)
        counts = _Counts()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_range, spec, int(a), int(b)) for a, b in zip(bounds, bounds[1:])
            ]
            for f in futures:
                counts.add(f.result())
    return summarize(spec.trials, counts.non_aborted, counts.successes, counts.violations)


def summarize(trials: int, non_aborted: int, successes: int, violations: int = 0) -> BiasEstimate:
    abort_rate = (trials - non_aborted) / trials
    if non_aborted == 0:
        nan = float("nan")
        return BiasEstimate(trials, 0, 0, nan, nan, 0.0, 1.0, 1.0, violations, undefined=True)
    p_hat = successes / non_aborted
    low, high = wilson_interval(successes, non_aborted)
    return BiasEstimate(
        trials, non_aborted, successes, p_hat, p_hat - 0.5, low, high, abort_rate, violations
    )


# --- closed-form oracles ----------------------------------------------------


def fibonacci_sphere(count: int) -> list[Axis]:
    """Deterministic, nearly uniform point set on the unit sphere."""
    golden = math.pi * (3.0 - math.sqrt(5.0))
    pts = []
    for k in range(count):
        z = 1.0 - (2.0 * k + 1.0) / count
        r = math.sqrt(max(0.0, 1.0 - z * z))
        phi = golden * k
        pts.append(Axis._unchecked(r * math.cos(phi), r * math.sin(phi), z))
    return pts


def sphere_pass_rate(state: PureTwoQubitState, samples: int = 10_000) -> float:
    """Probability that a pair passes a common random-axis anti-correlation check."""
    pts = fibonacci_sphere(samples)
    return sum(anticorrelation_probability(state, a, a) for a in pts) / samples


def product_pair_pass_rate(samples: int = 10_000) -> float:
    return sphere_pass_rate(PureTwoQubitState.product(1, 1), samples)


def collapsed_pair_pass_rate(samples: int = 10_000) -> float:
    # after a z premeasurement and unlock, Bob holds |b> and Alice |1-b>
    return sphere_pass_rate(PureTwoQubitState.product(0, 1), samples)


def premeasure_abort_oracle(challenged: int, collapsed_pass: float) -> float:
    return 1.0 - collapsed_pass ** challenged


def mixed_product_abort_oracle(challenged: int, fraction: float, product_pass: float) -> float:
    """1 - E[product_pass ** K] with K ~ Binomial(challenged, fraction)."""
    expected = sum(
        math.comb(challenged, k) * fraction ** k * (1 - fraction) ** (challenged - k) * product_pass ** k
        for k in range(challenged + 1)
    )
    return 1.0 - expected


def mixed_product_bit_one_probability(fraction: float = 0.5) -> float:
    """Probability Alice reads DOWN (bit 1) along z on a |1>|1> / singlet mixture."""
    on_product = outcome_probability(PureTwoQubitState.product(1, 1), Particle.A, Z_AXIS, SpinOutcome.DOWN)
    on_singlet = outcome_probability(SINGLET, Particle.A, Z_AXIS, SpinOutcome.DOWN)
    return fraction * on_product + (1 - fraction) * on_singlet


@dataclass(frozen=True)
class OracleRow:
    name: str
    value: float
    expected: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.value - self.expected) <= self.tolerance


def analytic_oracles(samples: int = 10_000) -> list[OracleRow]:
    rows = []
    for k in range(19):
        theta = k * math.pi / 18
        value = anticorrelation_probability(SINGLET, Z_AXIS, Axis.from_angles(theta))
        rows.append(OracleRow(f"singlet_anticorrelation[{k * 10}deg]", value, (1 + math.cos(theta)) / 2, 1e-12))
    product_pass = product_pair_pass_rate(samples)
    collapsed_pass = collapsed_pair_pass_rate(samples)
    rows.append(OracleRow("product_pair_pass_rate", product_pass, 1 / 3, 0.02))
    rows.append(OracleRow("collapsed_pair_pass_rate", collapsed_pass, 2 / 3, 0.02))
    rows.append(OracleRow("mixed_strategy_bit1_probability", mixed_product_bit_one_probability(0.5), 0.75, 1e-12))
    mix = uniform_pauli_mixture(BellKind.PSI_MINUS)
    rows.append(OracleRow("pauli_mixture_deviation_from_quarter_identity",
                          mix.max_deviation(np.eye(4) / 4), 0.0, 1e-12))
    rows.append(OracleRow("premeasure_all_abort_n20",
                          premeasure_abort_oracle(10, collapsed_pass), 1 - (2 / 3) ** 10, 0.01))
    rows.append(OracleRow("mixed_product_abort_n20",
                          mixed_product_abort_oracle(10, 0.5, product_pass), 1 - (2 / 3) ** 10, 0.01))
    return rows
