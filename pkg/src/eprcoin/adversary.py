"""Party strategies: honest baselines and the cheating attacks.

A strategy is an immutable parameter object whose hook methods are called by
the protocol engine. Per-session state goes in ``view.memo``; randomness
comes from ``view.rng`` (the party's own substream). Alice's hooks get an
``AliceView`` (her particles, her lock record); Bob's hooks get a
``BobView`` (measurement of his own particles, public messages). Neither view
exposes the other party's private data.

Every strategy has a canonical text form, e.g. ``honest``,
``alice_mixed_product:0.5`` or ``bob_premeasure_unverified:target=1``; see
:func:`parse_alice` and :func:`parse_bob`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .qstate import (
    PAULI_OPS,
    SINGLET,
    Axis,
    BellKind,
    Particle,
    PauliOp,
    PureTwoQubitState,
    SpinOutcome,
    Z_AXIS,
    apply_pauli,
)

_ONE_ONE = PureTwoQubitState.product(1, 1)


class StrategyError(ValueError):
    pass


# --- Alice ------------------------------------------------------------------


@dataclass(frozen=True)
class AliceStrategy:
    """Honest behaviour; subclasses override individual hooks."""

    name = "honest"

    @property
    def spec(self) -> str:
        return self.name

    def prepare_pair(self, view, index: int) -> tuple[PureTwoQubitState, PauliOp]:
        op = PAULI_OPS[int(view.rng.random() * 4)]
        return apply_pauli(SINGLET, Particle.A, op), op

    def unlock_subset(self, view, indices) -> None:
        for i in indices:
            view.apply(i, view.lock(i))

    def final_unlock(self, view, indices, final_bell: BellKind) -> None:
        for i in indices:
            view.apply(i, view.lock(i))
            if final_bell is BellKind.PSI_PLUS:
                view.apply(i, PauliOp.Z)


@dataclass(frozen=True)
class HonestAlice(AliceStrategy):
    pass


@dataclass(frozen=True)
class NaiveAliceNoLock(AliceStrategy):
    """Shares plain singlets and never locks them."""

    name = "naive_alice_nolock"

    def prepare_pair(self, view, index):
        return SINGLET, PauliOp.IDENT


@dataclass(frozen=True)
class AliceMixedProduct(AliceStrategy):
    """Replaces each pair by |1>|1> with probability ``product_fraction``.

    Product pairs carry lock IDENT and are left untouched by both unlock
    steps; the rest are honestly locked singlets.
    """

    product_fraction: float = 0.5
    name = "alice_mixed_product"

    def __post_init__(self):
        f = self.product_fraction
        if not isinstance(f, (int, float)) or not 0.0 <= f <= 1.0:
            raise StrategyError(f"product_fraction must lie in [0, 1], got {f!r}")
        object.__setattr__(self, "product_fraction", float(f))

    @property
    def spec(self) -> str:
        return f"{self.name}:{self.product_fraction!r}"

    def prepare_pair(self, view, index):
        products = view.memo.setdefault("products", set())
        if view.rng.random() < self.product_fraction:
            products.add(index)
            return _ONE_ONE, PauliOp.IDENT
        return super().prepare_pair(view, index)

    def unlock_subset(self, view, indices):
        products = view.memo.get("products", set())
        super().unlock_subset(view, [i for i in indices if i not in products])

    def final_unlock(self, view, indices, final_bell):
        products = view.memo.get("products", set())
        super().final_unlock(view, [i for i in indices if i not in products], final_bell)


# --- Bob --------------------------------------------------------------------


@dataclass(frozen=True)
class BobStrategy:
    """Honest behaviour; subclasses override individual hooks."""

    name = "honest"
    target_bit: Optional[int] = None

    @property
    def spec(self) -> str:
        return self.name

    def on_receive(self, view) -> None:
        pass

    def choose_challenge(self, view, candidates, k: int):
        return view.rng.sample(candidates, k)

    def choose_axis(self, view, index: int) -> Axis:
        return Axis.random(view.rng)

    def report_result(self, view, index: int, axis: Axis) -> SpinOutcome:
        return view.measure(index, axis)

    def choose_final_index(self, view, final_indices, own_outcomes) -> int:
        return final_indices[view.rng.randrange(len(final_indices))]


@dataclass(frozen=True)
class HonestBob(BobStrategy):
    pass


@dataclass(frozen=True)
class _TargetedBob(BobStrategy):
    target_bit: int = 0

    def __post_init__(self):
        if self.target_bit not in (0, 1):
            raise StrategyError(f"target must be 0 or 1, got {self.target_bit!r}")

    @property
    def spec(self) -> str:
        return f"{self.name}:target={self.target_bit}"

    def _wanted(self, bob_outcome: SpinOutcome) -> bool:
        # Alice's bit is the complement of Bob's on an anti-correlated pair
        return bob_outcome.bit != self.target_bit

    def _premeasure(self, view, indices) -> None:
        z = view.memo.setdefault("z", {})
        for i in indices:
            z[i] = view.measure(i, Z_AXIS)

    def choose_final_index(self, view, final_indices, own_outcomes):
        z = view.memo.get("z", {})
        for i in final_indices:
            if i in z and self._wanted(z[i]):
                return i
        return final_indices[0]


@dataclass(frozen=True)
class BobZAxisSelect(_TargetedBob):
    """Premeasures every particle along z, then steers the check and the pick.

    The challenge takes the unwanted pairs first (lowest index first), then
    fills up with wanted ones, again lowest index first. All verification
    axes are z and the reported results are the premeasured ones.
    """

    name = "bob_zaxis_select"

    def on_receive(self, view):
        self._premeasure(view, range(view.n))

    def choose_challenge(self, view, candidates, k):
        z = view.memo["z"]
        ranked = sorted(candidates, key=lambda i: (self._wanted(z[i]), i))
        return ranked[:k]

    def choose_axis(self, view, index):
        return Z_AXIS

    def report_result(self, view, index, axis):
        return view.memo["z"][index]


@dataclass(frozen=True)
class BobPremeasureAll(_TargetedBob):
    """Measures every particle along z on receipt, then plays honestly."""

    name = "bob_premeasure_all"

    def on_receive(self, view):
        self._premeasure(view, range(view.n))

    def choose_final_index(self, view, final_indices, own_outcomes):
        return BobStrategy.choose_final_index(self, view, final_indices, own_outcomes)


@dataclass(frozen=True)
class BobPremeasureUnverified(_TargetedBob):
    """Fixes a random challenge up front and premeasures only the pairs he keeps.

    Verification runs honestly on untouched pairs, so it passes; under the
    Bob-chooses rule he then names a kept pair showing the wanted bit.
    """

    name = "bob_premeasure_unverified"

    def on_receive(self, view):
        challenge = sorted(view.rng.sample(view.challenge_candidates, view.half))
        view.memo["challenge"] = challenge
        kept = set(challenge)
        self._premeasure(view, [i for i in range(view.n) if i not in kept])

    def choose_challenge(self, view, candidates, k):
        return view.memo["challenge"]


# --- parsing ----------------------------------------------------------------

ALICE_STRATEGIES = {
    "honest": HonestAlice,
    "naive_alice_nolock": NaiveAliceNoLock,
    "alice_mixed_product": AliceMixedProduct,
}
BOB_STRATEGIES = {
    "honest": HonestBob,
    "bob_zaxis_select": BobZAxisSelect,
    "bob_premeasure_all": BobPremeasureAll,
    "bob_premeasure_unverified": BobPremeasureUnverified,
}


def _split(text: str) -> tuple[str, Optional[str], Optional[str]]:
    name, _, rest = text.strip().partition(":")
    if not rest:
        return name, None, None
    key, eq, value = rest.partition("=")
    return (name, key, value) if eq else (name, None, key)


def parse_alice(text: str) -> AliceStrategy:
    name, key, value = _split(text)
    if name not in ALICE_STRATEGIES:
        raise StrategyError(
            f"unknown Alice strategy {name!r}; valid: {', '.join(ALICE_STRATEGIES)}"
        )
    cls = ALICE_STRATEGIES[name]
    if cls is AliceMixedProduct:
        if key not in (None, "product_fraction"):
            raise StrategyError(f"unknown parameter {key!r} for {name}")
        try:
            return cls(float(value)) if value is not None else cls()
        except ValueError as e:
            raise StrategyError(f"bad product_fraction {value!r}: {e}") from None
    if value is not None:
        raise StrategyError(f"strategy {name!r} takes no parameters")
    return cls()


def parse_bob(text: str) -> BobStrategy:
    name, key, value = _split(text)
    if name not in BOB_STRATEGIES:
        raise StrategyError(f"unknown Bob strategy {name!r}; valid: {', '.join(BOB_STRATEGIES)}")
    cls = BOB_STRATEGIES[name]
    if cls is HonestBob:
        if value is not None:
            raise StrategyError("strategy 'honest' takes no parameters")
        return cls()
    if key not in (None, "target"):
        raise StrategyError(f"unknown parameter {key!r} for {name}")
    if value is None:
        return cls()
    if value not in ("0", "1"):
        raise StrategyError(f"target must be 0 or 1, got {value!r}")
    return cls(int(value))
