"""Seed derivation.

Everything random in a run hangs off one 64-bit seed. Derived seeds come from
SplitMix64 applied to ``seed + (counter + 1) * GAMMA`` (mod 2**64), where
GAMMA is the SplitMix64 increment. The counter is the trial index for
per-trial seeds and a fixed stream tag for the per-session substreams.
"""
from __future__ import annotations

import random

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15

STREAM_ALICE = 1
STREAM_BOB = 2
STREAM_PUBLIC = 3


def splitmix64(x: int) -> int:
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive(seed: int, counter: int) -> int:
    return splitmix64((seed + (counter + 1) * GAMMA) & MASK64)


def trial_seed(master_seed: int, trial: int) -> int:
    """Seed of trial ``trial`` in an experiment."""
    return derive(master_seed, trial)


def substream(seed: int, stream: int) -> random.Random:
    # 2**32 offset keeps stream tags disjoint from trial counters
    return random.Random(derive(seed, (1 << 32) + stream))


def check_seed(seed: int) -> int:
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return seed
