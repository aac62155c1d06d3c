import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eprcoin.adversary import AliceMixedProduct, BobPremeasureAll, HonestAlice, HonestBob
from eprcoin.protocol import SessionConfig
from eprcoin.qstate import SINGLET, Axis, PureTwoQubitState
from eprcoin.stats import (
    ExperimentSpec,
    Success,
    analytic_oracles,
    estimate,
    fibonacci_sphere,
    mixed_product_abort_oracle,
    mixed_product_bit_one_probability,
    premeasure_abort_oracle,
    sphere_pass_rate,
    summarize,
    wilson_interval,
)


def honest(trials, master_seed=0, n=20):
    return ExperimentSpec(
        SessionConfig(n=n), HonestAlice(), HonestBob(), trials, master_seed, Success.OUTCOME_EQUALS_ONE
    )


# --- wilson_interval -----------------------------------------------------------------


def wilson_reference(k, n, z=1.96):
    # roots of (p - k/n)^2 = z^2 p (1 - p) / n, solved as a quadratic in p
    a = 1 + z * z / n
    b = -(2 * k / n + z * z / n)
    c = (k / n) ** 2
    disc = math.sqrt(b * b - 4 * a * c)
    return (-b - disc) / (2 * a), (-b + disc) / (2 * a)


def test_wilson_known_value():
    low, high = wilson_interval(50, 100, 1.96)
    assert low == pytest.approx(0.4038, abs=5e-4)
    assert high == pytest.approx(0.5962, abs=5e-4)


@given(st.integers(1, 10_000).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
def test_wilson_matches_quadratic_roots(kn):
    k, n = kn
    low, high = wilson_interval(k, n, 1.96)
    ref_low, ref_high = wilson_reference(k, n)
    assert low == pytest.approx(max(0.0, ref_low), abs=1e-9)
    assert high == pytest.approx(min(1.0, ref_high), abs=1e-9)
    assert 0.0 <= low <= k / n <= high <= 1.0


def test_wilson_boundaries():
    low, high = wilson_interval(0, 100)
    assert low == 0.0 and high == pytest.approx(0.037, abs=1e-3)
    low, high = wilson_interval(100, 100)
    assert high == 1.0 and low == pytest.approx(0.963, abs=1e-3)


@pytest.mark.parametrize("args", [(1, 0), (-1, 10), (11, 10), (5, 10, 0.0)])
def test_wilson_rejects(args):
    with pytest.raises(ValueError):
        wilson_interval(*args)


# --- estimate / summarize ------------------------------------------------------------


def test_summarize_fields():
    e = summarize(100, 80, 44)
    assert e.p_hat == pytest.approx(0.55)
    assert e.epsilon_hat == pytest.approx(0.05)
    assert e.abort_rate == pytest.approx(0.2)
    assert (e.ci_low, e.ci_high) == wilson_interval(44, 80)
    assert not e.undefined


def test_all_aborted_is_undefined():
    e = summarize(10, 0, 0)
    assert e.undefined and e.abort_rate == 1.0 and math.isnan(e.p_hat)


def test_single_trial():
    e = estimate(honest(1))
    assert e.p_hat in (0.0, 1.0) and e.trials == 1
    assert e.ci_low <= e.p_hat <= e.ci_high


def test_every_session_aborting_gives_undefined():
    # with n=2 the single checked pair is a |1>|1> product and passes
    # only a third of the time; fraction 1 at n=20 essentially always aborts
    spec = ExperimentSpec(SessionConfig(n=20), AliceMixedProduct(1.0), HonestBob(), 50, 0, Success.OUTCOME_EQUALS_ONE)
    e = estimate(spec)
    assert e.undefined and e.abort_rate == 1.0


def test_spec_validation():
    with pytest.raises(ValueError):
        honest(0)
    with pytest.raises(ValueError):
        ExperimentSpec(SessionConfig(), HonestAlice(), HonestBob(), 10)  # no target anywhere
    with pytest.raises(ValueError):
        honest(10, master_seed=-1)
    assert ExperimentSpec(SessionConfig(), HonestAlice(), BobPremeasureAll(1), 10).target() == 1
    assert ExperimentSpec(SessionConfig(), HonestAlice(), BobPremeasureAll(1), 10, target_bit=0).target() == 0


def test_estimate_is_reproducible():
    assert estimate(honest(300, 9)) == estimate(honest(300, 9))
    assert estimate(honest(300, 9)) != estimate(honest(300, 10))


def test_estimate_independent_of_workers():
    spec = honest(400, 5)
    assert estimate(spec, workers=1) == estimate(spec, workers=3)


def test_honest_sessions_never_violate_anticorrelation():
    e = estimate(honest(500, 2))
    assert e.anticorrelation_violations == 0 and e.abort_rate == 0.0


@pytest.mark.slow
def test_honest_interval_covers_half_across_master_seeds():
    # 20 independent 10^5-trial runs; a 95% interval misses 1/2 about once
    misses = 0
    for master in range(20):
        e = estimate(honest(100_000, master, n=2))
        misses += not e.ci_low <= 0.5 <= e.ci_high
    assert misses <= 3


# --- oracles ------------------------------------------------------------------------


def test_fibonacci_points_are_unit_and_balanced():
    pts = np.array([a.as_tuple() for a in fibonacci_sphere(2000)])
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-12)
    assert np.linalg.norm(pts.mean(axis=0)) < 1e-3


def test_sphere_pass_rates():
    assert sphere_pass_rate(SINGLET) == pytest.approx(1.0, abs=1e-12)
    assert sphere_pass_rate(PureTwoQubitState.product(1, 1)) == pytest.approx(1 / 3, abs=1e-3)
    assert sphere_pass_rate(PureTwoQubitState.product(0, 1)) == pytest.approx(2 / 3, abs=1e-3)


def test_abort_oracles_closed_forms():
    assert premeasure_abort_oracle(10, 2 / 3) == pytest.approx(1 - (2 / 3) ** 10)
    # E[(1/3)^K], K ~ Bin(10, 1/2) is ((1 + 1/3) / 2)^10
    assert mixed_product_abort_oracle(10, 0.5, 1 / 3) == pytest.approx(1 - (2 / 3) ** 10)
    assert mixed_product_abort_oracle(10, 0.0, 1 / 3) == 0.0
    assert mixed_product_bit_one_probability(0.5) == pytest.approx(0.75, abs=1e-12)
    assert mixed_product_bit_one_probability(0.0) == pytest.approx(0.5, abs=1e-12)


def test_analytic_oracle_table_passes():
    rows = analytic_oracles()
    assert len(rows) == 25
    assert all(r.passed for r in rows), [r for r in rows if not r.passed]


def test_from_angles_oracle_rows_cover_half_circle():
    rows = [r for r in analytic_oracles(1000) if r.name.startswith("singlet_anticorrelation")]
    assert rows[0].expected == pytest.approx(1.0) and rows[-1].expected == pytest.approx(0.0)
    assert Axis.from_angles(math.pi).z == pytest.approx(-1.0)
