import functools
import math

import numpy as np
from hypothesis import strategies as st

from eprcoin.qstate import Axis, PureTwoQubitState
from eprcoin.stats import ExperimentSpec, estimate


@functools.lru_cache(maxsize=None)
def cached_estimate(spec: ExperimentSpec):
    """Several modules assert on the same 10^5-trial experiments; run each once."""
    return estimate(spec)


finite = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)


@st.composite
def axes(draw):
    v = np.array([draw(finite) for _ in range(3)])
    n = np.linalg.norm(v)
    if n < 1e-3:
        v, n = np.array([0.0, 0.0, 1.0]), 1.0
    v = v / n
    return Axis(*map(float, v))


@st.composite
def states(draw):
    v = np.array([complex(draw(finite), draw(finite)) for _ in range(4)])
    n = np.linalg.norm(v)
    if n < 1e-3:
        v, n = np.array([1, 0, 0, 0], dtype=complex), 1.0
    return PureTwoQubitState(tuple(v / n))


def sphere_axis(rng: np.random.Generator) -> Axis:
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    return Axis(*map(float, v))


def rad(deg):
    return deg * math.pi / 180


ACCEPTANCE_LINES: list[str] = []


def report(criterion: str, ok: bool, detail: str) -> bool:
    line = f"{criterion} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[0].split("-")[1].rstrip("ab"))):
            terminalreporter.write_line(line)
