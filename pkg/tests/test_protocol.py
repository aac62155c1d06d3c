import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eprcoin import protocol as P
from eprcoin.adversary import (
    AliceMixedProduct,
    BobPremeasureAll,
    BobStrategy,
    HonestAlice,
    HonestBob,
)
from eprcoin.io import encode_transcript
from eprcoin.protocol import DesignatedRule, Phase, SessionConfig
from eprcoin.qstate import (
    PAULI_OPS,
    SINGLET,
    BellKind,
    PauliOp,
    Particle,
    PureTwoQubitState,
    apply_pauli,
    make_bell,
)

seeds = st.integers(0, 2**64 - 1)


def run_until(state, phase):
    steps = {
        Phase.LOCKED_AND_SENT: P.step_prepare_lock_send,
        Phase.CHALLENGED: P.step_challenge,
        Phase.SUBSET_UNLOCKED: P.step_unlock_subset,
        Phase.RESULTS_EXCHANGED: P.step_verification_exchange,
        Phase.VERIFIED: P.step_verify,
        Phase.FINAL_UNLOCKED: P.step_final_unlock,
    }
    for target, step in steps.items():
        step(state)
        if state.phase in (phase, Phase.ABORTED):
            return state
    return state


# --- new_session ---------------------------------------------------------------

def test_new_session_init():
    s = P.new_session(SessionConfig(n=20, seed=1))
    assert s.phase is Phase.INIT
    assert len(s.pairs) == 20
    assert all(p.joint_state is None and not p.in_challenge for p in s.pairs)


@pytest.mark.parametrize("n", [3, 0, -2, 1])
def test_bad_n_rejected(n):
    with pytest.raises(P.ConfigError):
        SessionConfig(n=n)


def test_minimal_session():
    res = P.run_full_session(SessionConfig(n=2, seed=7))
    assert not res.aborted
    assert len(res.final_pair_bits) == 1
    assert res.designated_index == 0


def test_bad_seed_and_bell_rejected():
    with pytest.raises(P.ConfigError):
        SessionConfig(seed=-1)
    with pytest.raises(P.ConfigError):
        SessionConfig(seed=2**64)
    with pytest.raises(P.ConfigError):
        SessionConfig(final_bell=BellKind.PHI_PLUS)


# --- ordering ------------------------------------------------------------------

def test_steps_out_of_order_raise():
    s = P.new_session(SessionConfig(n=4))
    with pytest.raises(P.ProtocolOrderError):
        P.step_challenge(s)
    P.step_prepare_lock_send(s)
    with pytest.raises(P.ProtocolOrderError):
        P.step_prepare_lock_send(s)
    with pytest.raises(P.ProtocolOrderError):
        P.step_final_unlock(s)
    with pytest.raises(P.ProtocolOrderError):
        P.session_result(s)


# --- step_prepare_lock_send --------------------------------------------------------

def test_honest_prepared_states_are_bell_states():
    s = P.step_prepare_lock_send(P.new_session(SessionConfig(n=4, seed=3)))
    bells = [make_bell(k) for k in BellKind]
    for p in s.pairs:
        assert any(p.joint_state.equals_up_to_phase(b) for b in bells)
    assert s.phase is Phase.LOCKED_AND_SENT
    assert s.transcript.records[0].message == P.Particles(4)


def test_lock_op_distribution_is_uniform():
    counts = Counter()
    for seed in range(5000):
        s = P.step_prepare_lock_send(P.new_session(SessionConfig(n=20, seed=seed)))
        counts.update(p.lock_op for p in s.pairs)
    total = sum(counts.values())
    assert total == 100_000
    for op in PAULI_OPS:
        assert abs(counts[op] / total - 0.25) <= 0.01


# --- step_challenge -----------------------------------------------------------------

def test_challenge_reproducible():
    a = run_until(P.new_session(SessionConfig(n=4, seed=5)), Phase.CHALLENGED).challenge
    b = run_until(P.new_session(SessionConfig(n=4, seed=5)), Phase.CHALLENGED).challenge
    assert a == b and len(a) == 2


@pytest.mark.parametrize("rule", [DesignatedRule.PUBLIC_RANDOM, DesignatedRule.BOB_CHOOSES])
def test_challenge_index_frequency_is_half(rule):
    counts = Counter()
    sessions = 20_000
    for seed in range(sessions):
        s = run_until(P.new_session(SessionConfig(n=20, seed=seed, designated_rule=rule)), Phase.CHALLENGED)
        counts.update(s.challenge)
    for i in range(20):
        assert abs(counts[i] / sessions - 0.5) <= 0.01


def test_fixed_rule_never_challenges_coin_pair():
    counts = Counter()
    sessions = 20_000
    for seed in range(sessions):
        s = run_until(P.new_session(SessionConfig(n=20, seed=seed)), Phase.CHALLENGED)
        counts.update(s.challenge)
    assert counts[0] == 0
    for i in range(1, 20):
        assert abs(counts[i] / sessions - 10 / 19) <= 0.01


class _BadChallenge(BobStrategy):
    def __init__(self, picks):
        object.__setattr__(self, "picks", picks)

    def choose_challenge(self, view, candidates, k):
        return self.picks


@pytest.mark.parametrize("picks", [[1], [1, 1], [1, 2, 3], [1, 99]])
def test_malformed_challenge_aborts(picks):
    s = P.new_session(SessionConfig(n=4, seed=1), bob=_BadChallenge(picks))
    P.step_prepare_lock_send(s)
    P.step_challenge(s)
    assert s.phase is Phase.ABORTED
    assert "CHALLENGE" in s.abort_reason
    res = P.session_result(s)
    assert res.aborted and res.outcome_bit is None


def test_challenging_the_fixed_coin_pair_aborts():
    res = P.run_full_session(SessionConfig(n=4, seed=1), bob=_BadChallenge([0, 1]))
    assert res.aborted


# --- step_unlock_subset ------------------------------------------------------------

@given(seeds)
@settings(max_examples=30)
def test_unlocked_challenged_pairs_are_singlets(seed):
    s = run_until(P.new_session(SessionConfig(n=20, seed=seed)), Phase.SUBSET_UNLOCKED)
    for i in s.challenge:
        assert s.pairs[i].joint_state.allclose(SINGLET, 1e-12)


def test_premeasured_pairs_stay_product_after_unlock():
    s = run_until(P.new_session(SessionConfig(n=20, seed=9), bob=BobPremeasureAll(0)), Phase.SUBSET_UNLOCKED)
    for i in s.challenge:
        assert s.pairs[i].joint_state.is_product()


def test_product_pairs_stay_product_after_unlock():
    s = run_until(P.new_session(SessionConfig(n=20, seed=4), alice=AliceMixedProduct(0.5)), Phase.SUBSET_UNLOCKED)
    products = s.alice_view.memo["products"]
    assert products
    one_one = PureTwoQubitState.product(1, 1)
    for i in products:
        assert s.pairs[i].joint_state.equals_up_to_phase(one_one)


# --- step_verification_exchange ---------------------------------------------------------

def test_honest_verification_results_opposite():
    s = run_until(P.new_session(SessionConfig(n=20, seed=2)), Phase.RESULTS_EXCHANGED)
    for i in s.challenge:
        assert s.pairs[i].alice_result is not s.pairs[i].bob_result
        assert s.pairs[i].verification_axis is not None
    for i in s.final_indices:
        assert s.pairs[i].verification_axis is None


def test_honest_axes_are_sphere_uniform():
    vecs = []
    seed = 0
    while len(vecs) < 10_000:
        s = run_until(P.new_session(SessionConfig(n=20, seed=seed)), Phase.RESULTS_EXCHANGED)
        vecs += [s.pairs[i].verification_axis.as_tuple() for i in s.challenge]
        seed += 1
    v = np.array(vecs[:10_000])
    assert np.linalg.norm(v.mean(axis=0)) < 0.05
    # second moment of a uniform direction is I/3
    np.testing.assert_allclose(v.T @ v / len(v), np.eye(3) / 3, atol=0.02)


class _NoAxis(BobStrategy):
    def choose_axis(self, view, index):
        return None


class _NoResult(BobStrategy):
    def report_result(self, view, index, axis):
        return None


@pytest.mark.parametrize("bob", [_NoAxis(), _NoResult()])
def test_missing_axis_or_result_aborts(bob):
    res = P.run_full_session(SessionConfig(n=4, seed=1), bob=bob)
    assert res.aborted and "malformed" in res.abort_reason


# --- step_verify ----------------------------------------------------------------------

@given(seeds, st.sampled_from([2, 4, 20]))
@settings(max_examples=30)
def test_honest_always_verifies(seed, n):
    s = run_until(P.new_session(SessionConfig(n=n, seed=seed)), Phase.VERIFIED)
    assert s.phase is Phase.VERIFIED


def test_single_mismatch_aborts():
    s = run_until(P.new_session(SessionConfig(n=20, seed=2)), Phase.RESULTS_EXCHANGED)
    i = s.challenge[3]
    s.pairs[i].bob_result = s.pairs[i].alice_result
    P.step_verify(s)
    assert s.phase is Phase.ABORTED
    assert s.transcript.records[-1].message == P.VerifyStatus(False)


def test_verification_off_passes_unconditionally():
    s = run_until(P.new_session(SessionConfig(n=20, seed=2, verification=False)), Phase.RESULTS_EXCHANGED)
    for i in s.challenge:
        s.pairs[i].bob_result = s.pairs[i].alice_result
    P.step_verify(s)
    assert s.phase is Phase.VERIFIED


def test_mixed_product_abort_rate_by_challenged_product_count():
    # per challenged |1>|1> pair the random-axis check passes with probability 1/3
    aborts, totals = Counter(), Counter()
    for seed in range(30_000):
        s = run_until(
            P.new_session(SessionConfig(n=4, seed=seed), alice=AliceMixedProduct(0.5)), Phase.VERIFIED
        )
        k = len(set(s.challenge) & s.alice_view.memo["products"])
        totals[k] += 1
        aborts[k] += s.phase is Phase.ABORTED
    for k in (0, 1, 2):
        assert abs(aborts[k] / totals[k] - (1 - (1 / 3) ** k)) <= 0.02


# --- step_final_unlock / step_final_measure -----------------------------------------------------

@pytest.mark.parametrize("bell", [BellKind.PSI_MINUS, BellKind.PSI_PLUS])
def test_final_pairs_converted(bell):
    s = run_until(P.new_session(SessionConfig(n=20, seed=8, final_bell=bell)), Phase.FINAL_UNLOCKED)
    target = make_bell(bell)
    for i in s.final_indices:
        if bell is BellKind.PSI_MINUS:
            assert s.pairs[i].joint_state.allclose(target, 1e-12)
        else:
            assert s.pairs[i].joint_state.equals_up_to_phase(target)


def test_premeasured_final_pairs_stay_product():
    s = run_until(
        P.new_session(SessionConfig(n=20, seed=8, verification=False), bob=BobPremeasureAll(1)),
        Phase.FINAL_UNLOCKED,
    )
    for i in s.final_indices:
        assert s.pairs[i].joint_state.is_product()


@given(seeds, st.sampled_from([BellKind.PSI_MINUS, BellKind.PSI_PLUS]), st.sampled_from(list(DesignatedRule)))
@settings(max_examples=40)
def test_honest_final_pairs_anticorrelated(seed, bell, rule):
    res = P.run_full_session(SessionConfig(n=20, seed=seed, final_bell=bell, designated_rule=rule))
    assert not res.aborted
    assert len(res.final_pair_bits) == 10
    assert all(a != b for _, a, b in res.final_pair_bits)
    bits = dict((i, a) for i, a, _ in res.final_pair_bits)
    assert res.outcome_bit == bits[res.designated_index]


class _PickOutside(BobStrategy):
    def choose_final_index(self, view, final_indices, own):
        return next(i for i in range(view.n) if i not in final_indices)


def test_bob_choosing_non_final_pair_aborts():
    res = P.run_full_session(SessionConfig(n=4, seed=1, designated_rule=DesignatedRule.BOB_CHOOSES), bob=_PickOutside())
    assert res.aborted and "OUTCOME_CLAIM" in res.abort_reason


# --- run_full_session invariants ----------------------------------------------------------------

EXPECTED_ORDER = [
    (P.Sender.ALICE, P.Particles),
    (P.Sender.BOB, P.Challenge),
    (P.Sender.ALICE, P.UnlockDone),
    (P.Sender.BOB, P.Axes),
    (P.Sender.BOB, P.Results),
    (P.Sender.ALICE, P.Results),
    (P.Sender.BOB, P.VerifyStatus),
    (P.Sender.ALICE, P.FinalUnlockDone),
    (P.Sender.BOB, P.OutcomeClaim),
    (P.Sender.ALICE, P.OutcomeClaim),
]


@given(seeds, st.sampled_from(list(DesignatedRule)))
@settings(max_examples=30)
def test_phase_monotonicity_and_partition(seed, rule):
    res = P.run_full_session(SessionConfig(n=20, seed=seed, designated_rule=rule))
    recs = res.transcript.records
    assert [(r.sender, type(r.message)) for r in recs] == EXPECTED_ORDER
    assert [r.seq for r in recs] == list(range(len(recs)))
    challenge = set(recs[1].message.indices)
    final = {i for i, _, _ in res.final_pair_bits}
    assert len(challenge) == len(final) == 10
    assert challenge | final == set(range(20)) and not challenge & final


def test_run_is_deterministic():
    a = P.run_full_session(SessionConfig(n=20, seed=42))
    b = P.run_full_session(SessionConfig(n=20, seed=42))
    assert encode_transcript(a.transcript) == encode_transcript(b.transcript)
    assert a.outcome_bit in (0, 1)


@given(seeds)
@settings(max_examples=30)
def test_lock_secrecy(seed):
    res = P.run_full_session(SessionConfig(n=20, seed=seed))
    tokens = set(encode_transcript(res.transcript).split())
    lock_names = {op.name for op in PauliOp} | {op.value for op in PauliOp}
    assert not tokens & lock_names
    assert not any(hasattr(r.message, "lock_op") for r in res.transcript.records)


class _OtherLocks(HonestAlice):
    """Honest Alice whose lock draws come from an unrelated stream."""

    def prepare_pair(self, view, index):
        rng = view.memo.setdefault("lock_rng", random.Random(12345))
        op = PAULI_OPS[rng.randrange(4)]
        return apply_pauli(SINGLET, Particle.A, op), op


def test_transcript_independent_of_lock_draws():
    # Bob's marginal is maximally mixed whatever the lock, so with the same
    # Bob stream everything he sees up to the final unlock is identical
    cfg = SessionConfig(n=20, seed=77)
    plain = P.new_session(cfg)
    other = P.new_session(cfg, alice=_OtherLocks())
    run_until(plain, Phase.FINAL_UNLOCKED)
    run_until(other, Phase.FINAL_UNLOCKED)
    assert [p.lock_op for p in plain.pairs] != [p.lock_op for p in other.pairs]
    assert plain.transcript.records == other.transcript.records
