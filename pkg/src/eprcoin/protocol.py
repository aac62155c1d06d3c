"""The lock/unlock EPR coin-tossing session as a phase-tagged state machine.

A session walks through

    INIT -> LOCKED_AND_SENT -> CHALLENGED -> SUBSET_UNLOCKED
         -> RESULTS_EXCHANGED -> VERIFIED -> FINAL_UNLOCKED -> DONE

with ABORTED reachable from the verification check or from any malformed
message. Each ``step_*`` function mutates the session in place and returns it;
calling a step out of order raises :class:`ProtocolOrderError`.

Parties act only through strategy hooks (see :mod:`eprcoin.adversary`) and
see the session through :class:`AliceView` / :class:`BobView`. Alice's lock
record lives in ``PairRecord.lock_op`` and no message type has a field for it.

Coin definition: the outcome is Alice's bit (UP=0, DOWN=1) on the designated
final pair. Under ``FIXED_FIRST`` the designated pair is index 0, declared
before any pair is shared; it is therefore excluded from Bob's challenge and
is always the lowest unchallenged index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from . import seeding
from .adversary import AliceStrategy, BobStrategy, HonestAlice, HonestBob
from .qstate import (
    Axis,
    BellKind,
    Particle,
    PauliOp,
    PureTwoQubitState,
    SpinOutcome,
    Z_AXIS,
    apply_pauli,
    measure_spin,
)

FIXED_DESIGNATED_INDEX = 0


class ConfigError(ValueError):
    pass


class ProtocolOrderError(RuntimeError):
    pass


class MalformedMessage(ValueError):
    pass


class DesignatedRule(Enum):
    FIXED_FIRST = "fixed"
    BOB_CHOOSES = "bob"
    PUBLIC_RANDOM = "random"


class Phase(Enum):
    INIT = 0
    LOCKED_AND_SENT = 1
    CHALLENGED = 2
    SUBSET_UNLOCKED = 3
    RESULTS_EXCHANGED = 4
    VERIFIED = 5
    FINAL_UNLOCKED = 6
    DONE = 7
    ABORTED = 8


class Sender(Enum):
    ALICE = "ALICE"
    BOB = "BOB"
    PUBLIC = "PUBLIC"


SUPPORTED_FINAL_BELLS = (BellKind.PSI_MINUS, BellKind.PSI_PLUS)


@dataclass(frozen=True)
class SessionConfig:
    n: int = 20
    seed: int = 0
    designated_rule: DesignatedRule = DesignatedRule.FIXED_FIRST
    final_bell: BellKind = BellKind.PSI_MINUS
    verification: bool = True

    def __post_init__(self):
        if not isinstance(self.n, int) or isinstance(self.n, bool):
            raise ConfigError(f"n must be an integer, got {self.n!r}")
        if self.n < 2 or self.n % 2:
            raise ConfigError(f"n must be a positive even integer >= 2, got {self.n}")
        try:
            seeding.check_seed(self.seed)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.final_bell not in SUPPORTED_FINAL_BELLS:
            raise ConfigError(f"final_bell must be PSI_MINUS or PSI_PLUS, got {self.final_bell}")

    @property
    def half(self) -> int:
        return self.n // 2

    def challenge_candidates(self) -> tuple[int, ...]:
        if self.designated_rule is DesignatedRule.FIXED_FIRST:
            return tuple(i for i in range(self.n) if i != FIXED_DESIGNATED_INDEX)
        return tuple(range(self.n))


# --- messages ---------------------------------------------------------------


@dataclass(frozen=True)
class Particles:
    n: int


@dataclass(frozen=True)
class Challenge:
    indices: tuple[int, ...]


@dataclass(frozen=True)
class UnlockDone:
    pass


@dataclass(frozen=True)
class Axes:
    entries: tuple[tuple[int, Axis], ...]


@dataclass(frozen=True)
class Results:
    entries: tuple[tuple[int, SpinOutcome], ...]


@dataclass(frozen=True)
class VerifyStatus:
    ok: bool


@dataclass(frozen=True)
class FinalUnlockDone:
    pass


@dataclass(frozen=True)
class OutcomeClaim:
    index: int
    outcome: SpinOutcome


Message = Union[
    Particles, Challenge, UnlockDone, Axes, Results, VerifyStatus, FinalUnlockDone, OutcomeClaim
]


@dataclass(frozen=True)
class Record:
    seq: int
    sender: Sender
    message: Message


@dataclass
class Transcript:
    """Public message log of one session plus its header and END line data."""

    config: SessionConfig
    alice_spec: str
    bob_spec: str
    records: list[Record] = field(default_factory=list)
    outcome: Optional[int] = None
    designated_index: Optional[int] = None
    finished: bool = False

    @property
    def session_id(self) -> str:
        return f"s{self.config.seed}"

    def append(self, sender: Sender, message: Message) -> None:
        self.records.append(Record(len(self.records), sender, message))


# --- session state ----------------------------------------------------------


@dataclass(slots=True)
class PairRecord:
    index: int
    lock_op: PauliOp = PauliOp.IDENT
    joint_state: Optional[PureTwoQubitState] = None
    in_challenge: bool = False
    verification_axis: Optional[Axis] = None
    alice_result: Optional[SpinOutcome] = None
    bob_result: Optional[SpinOutcome] = None
    alice_final: Optional[SpinOutcome] = None
    bob_final: Optional[SpinOutcome] = None


@dataclass
class SessionResult:
    outcome_bit: Optional[int]
    designated_index: Optional[int]
    transcript: Transcript
    final_pair_bits: list[tuple[int, int, int]]
    abort_reason: Optional[str] = None

    @property
    def aborted(self) -> bool:
        return self.outcome_bit is None


class SessionState:
    """Everything about one run. Confined to a single thread."""

    def __init__(self, config: SessionConfig, alice: AliceStrategy, bob: BobStrategy):
        self.config = config
        self.alice = alice
        self.bob = bob
        self.phase = Phase.INIT
        self.pairs = [PairRecord(i) for i in range(config.n)]
        self.challenge: tuple[int, ...] = ()
        self.final_indices: tuple[int, ...] = ()
        self.abort_reason: Optional[str] = None
        self.designated_index: Optional[int] = None
        self.outcome_bit: Optional[int] = None
        self.transcript = Transcript(config, alice.spec, bob.spec)
        self.alice_rng = seeding.substream(config.seed, seeding.STREAM_ALICE)
        self.bob_rng = seeding.substream(config.seed, seeding.STREAM_BOB)
        self._public_rng = None
        self.alice_view = AliceView(self)
        self.bob_view = BobView(self)

    @property
    def public_rng(self):
        # only PUBLIC_RANDOM sessions draw from it; seeding is not free
        if self._public_rng is None:
            self._public_rng = seeding.substream(self.config.seed, seeding.STREAM_PUBLIC)
        return self._public_rng

    def _abort(self, reason: str) -> None:
        self.phase = Phase.ABORTED
        self.abort_reason = reason
        self.transcript.outcome = None
        self.transcript.designated_index = None
        self.transcript.finished = True


class AliceView:
    """Alice's handle: her own particles A, her lock record, her random stream."""

    def __init__(self, session: SessionState):
        self._s = session
        self.rng = session.alice_rng
        self.n = session.config.n
        self.final_bell = session.config.final_bell
        self.memo: dict = {}

    def lock(self, index: int) -> PauliOp:
        return self._s.pairs[index].lock_op

    def apply(self, index: int, op: PauliOp) -> None:
        pair = self._s.pairs[index]
        pair.joint_state = apply_pauli(pair.joint_state, Particle.A, op)


class BobView:
    """Bob's handle: measurement access to his particles B and public data only."""

    def __init__(self, session: SessionState):
        self._s = session
        self.rng = session.bob_rng
        self.n = session.config.n
        self.half = session.config.half
        self.rule = session.config.designated_rule
        self.challenge_candidates = session.config.challenge_candidates()
        self.memo: dict = {}

    @property
    def public_records(self) -> tuple[Record, ...]:
        return tuple(self._s.transcript.records)

    def measure(self, index: int, axis: Axis) -> SpinOutcome:
        pair = self._s.pairs[index]
        outcome, pair.joint_state = measure_spin(pair.joint_state, Particle.B, axis, self.rng.random())
        return outcome


# --- steps ------------------------------------------------------------------


def new_session(
    config: SessionConfig,
    alice: Optional[AliceStrategy] = None,
    bob: Optional[BobStrategy] = None,
) -> SessionState:
    return SessionState(config, alice or HonestAlice(), bob or HonestBob())


def _require(state: SessionState, phase: Phase) -> None:
    if state.phase is not phase:
        raise ProtocolOrderError(f"step needs phase {phase.name}, session is in {state.phase.name}")


def step_prepare_lock_send(state: SessionState) -> SessionState:
    """Prepare, lock with a private Pauli per pair, send the B halves."""
    _require(state, Phase.INIT)
    view = state.alice_view
    for pair in state.pairs:
        joint, lock = state.alice.prepare_pair(view, pair.index)
        pair.joint_state = joint
        pair.lock_op = lock
    state.transcript.append(Sender.ALICE, Particles(state.config.n))
    state.phase = Phase.LOCKED_AND_SENT
    state.bob.on_receive(state.bob_view)
    return state


def validate_challenge(config: SessionConfig, indices) -> tuple[int, ...]:
    idx = tuple(indices)
    if len(idx) != config.half:
        raise MalformedMessage(f"challenge has {len(idx)} indices, expected {config.half}")
    if len(set(idx)) != len(idx):
        raise MalformedMessage("challenge contains duplicate indices")
    allowed = set(config.challenge_candidates())
    bad = [i for i in idx if i not in allowed]
    if bad:
        raise MalformedMessage(f"challenge index {bad[0]} is not allowed")
    return tuple(sorted(idx))


def step_challenge(state: SessionState) -> SessionState:
    """Bob discloses which n/2 pairs he wants checked."""
    _require(state, Phase.LOCKED_AND_SENT)
    cfg = state.config
    raw = state.bob.choose_challenge(state.bob_view, cfg.challenge_candidates(), cfg.half)
    try:
        chosen = validate_challenge(cfg, raw)
    except MalformedMessage as e:
        state._abort(f"malformed CHALLENGE: {e}")
        return state
    state.challenge = chosen
    chosen_set = set(chosen)
    state.final_indices = tuple(i for i in range(cfg.n) if i not in chosen_set)
    for i in chosen:
        state.pairs[i].in_challenge = True
    state.transcript.append(Sender.BOB, Challenge(chosen))
    state.phase = Phase.CHALLENGED
    return state


def step_unlock_subset(state: SessionState) -> SessionState:
    """Alice re-applies her lock on the challenged pairs."""
    _require(state, Phase.CHALLENGED)
    state.alice.unlock_subset(state.alice_view, state.challenge)
    state.transcript.append(Sender.ALICE, UnlockDone())
    state.phase = Phase.SUBSET_UNLOCKED
    return state


def step_verification_exchange(state: SessionState) -> SessionState:
    """Bob picks axes and measures; Alice measures along his axes and reveals."""
    _require(state, Phase.SUBSET_UNLOCKED)
    bob, view = state.bob, state.bob_view
    axes = []
    for i in state.challenge:
        a = bob.choose_axis(view, i)
        if not isinstance(a, Axis):
            state._abort(f"malformed AXES: no axis for index {i}")
            return state
        axes.append((i, a))
    bob_results = []
    for i, a in axes:
        r = bob.report_result(view, i, a)
        if not isinstance(r, SpinOutcome):
            state._abort(f"malformed RESULTS: no result for index {i}")
            return state
        bob_results.append((i, r))
    alice_results = []
    rng = state.alice_rng
    for i, a in axes:
        pair = state.pairs[i]
        r, pair.joint_state = measure_spin(pair.joint_state, Particle.A, a, rng.random())
        pair.verification_axis = a
        alice_results.append((i, r))
    for (i, rb), (_, ra) in zip(bob_results, alice_results):
        state.pairs[i].bob_result = rb
        state.pairs[i].alice_result = ra
    t = state.transcript
    t.append(Sender.BOB, Axes(tuple(axes)))
    t.append(Sender.BOB, Results(tuple(bob_results)))
    t.append(Sender.ALICE, Results(tuple(alice_results)))
    state.phase = Phase.RESULTS_EXCHANGED
    return state


def verification_passes(pairs: list[tuple[SpinOutcome, SpinOutcome]]) -> bool:
    """Strict anti-correlation: zero mismatches tolerated."""
    return all(a is not b for a, b in pairs)


def step_verify(state: SessionState) -> SessionState:
    """Bob checks the revealed results for perfect anti-correlation."""
    _require(state, Phase.RESULTS_EXCHANGED)
    if state.config.verification:
        ok = verification_passes(
            [(state.pairs[i].alice_result, state.pairs[i].bob_result) for i in state.challenge]
        )
    else:
        ok = True
    state.transcript.append(Sender.BOB, VerifyStatus(ok))
    if ok:
        state.phase = Phase.VERIFIED
    else:
        state._abort("verification failed: challenged pairs not anti-correlated")
    return state


def step_final_unlock(state: SessionState) -> SessionState:
    """Alice unlocks the remaining pairs (optionally into |Psi+>)."""
    _require(state, Phase.VERIFIED)
    state.alice.final_unlock(state.alice_view, state.final_indices, state.config.final_bell)
    state.transcript.append(Sender.ALICE, FinalUnlockDone())
    state.phase = Phase.FINAL_UNLOCKED
    return state


def designate_public_random(public_rng, final_indices: tuple[int, ...]) -> int:
    return final_indices[public_rng.randrange(len(final_indices))]


def step_final_measure(state: SessionState) -> SessionResult:
    """Both measure the final pairs along z; the designated pair is the coin."""
    _require(state, Phase.FINAL_UNLOCKED)
    cfg = state.config
    a_rng, view = state.alice_rng, state.bob_view
    for i in state.final_indices:
        pair = state.pairs[i]
        pair.alice_final, pair.joint_state = measure_spin(
            pair.joint_state, Particle.A, Z_AXIS, a_rng.random()
        )
    for i in state.final_indices:
        state.pairs[i].bob_final = view.measure(i, Z_AXIS)

    rule = cfg.designated_rule
    if rule is DesignatedRule.FIXED_FIRST:
        designated = FIXED_DESIGNATED_INDEX
    elif rule is DesignatedRule.PUBLIC_RANDOM:
        designated = designate_public_random(state.public_rng, state.final_indices)
    else:
        own = {i: state.pairs[i].bob_final for i in state.final_indices}
        designated = state.bob.choose_final_index(view, state.final_indices, own)
        if designated not in own:
            state._abort(f"malformed OUTCOME_CLAIM: index {designated!r} is not a final pair")
            return session_result(state)

    pair = state.pairs[designated]
    t = state.transcript
    t.append(Sender.BOB, OutcomeClaim(designated, pair.bob_final))
    t.append(Sender.ALICE, OutcomeClaim(designated, pair.alice_final))
    state.designated_index = designated
    state.outcome_bit = pair.alice_final.bit
    t.outcome = state.outcome_bit
    t.designated_index = designated
    t.finished = True
    state.phase = Phase.DONE
    return session_result(state)


def session_result(state: SessionState) -> SessionResult:
    if state.phase not in (Phase.DONE, Phase.ABORTED):
        raise ProtocolOrderError(f"session still running (phase {state.phase.name})")
    if state.phase is Phase.ABORTED:
        return SessionResult(None, None, state.transcript, [], state.abort_reason)
    bits = [
        (i, state.pairs[i].alice_final.bit, state.pairs[i].bob_final.bit)
        for i in state.final_indices
    ]
    return SessionResult(state.outcome_bit, state.designated_index, state.transcript, bits)


_STEPS = (
    step_prepare_lock_send,
    step_challenge,
    step_unlock_subset,
    step_verification_exchange,
    step_verify,
    step_final_unlock,
)


def run_full_session(
    config: SessionConfig,
    alice: Optional[AliceStrategy] = None,
    bob: Optional[BobStrategy] = None,
) -> SessionResult:
    state = new_session(config, alice, bob)
    for step in _STEPS:
        step(state)
        if state.phase is Phase.ABORTED:
            return session_result(state)
    return step_final_measure(state)
