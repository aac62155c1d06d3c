"""Exact two-qubit state arithmetic for EPR pairs.

Basis order is |00>, |01>, |10>, |11> with particle A (Alice's kept half)
as the left tensor factor and particle B (the transmitted half) on the right.
Amplitudes are plain Python complex numbers: four-element vectors are faster
without numpy, and the density-matrix helpers below switch to numpy where
4x4 and 2x2 matrices are actually needed.

Bit convention: spin UP along the measured axis is bit 0, DOWN is bit 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np

NORM_TOL = 1e-9
ALGEBRA_TOL = 1e-12

_S = 1.0 / math.sqrt(2.0)
# probabilities this close to 0 or 1 are rounding noise, not a selectable branch
_SNAP = 1e-15


def _snap(p: float) -> float:
    if p < _SNAP:
        return 0.0
    if p > 1.0 - _SNAP:
        return 1.0
    return p


class PreconditionError(ValueError):
    """An input violates the documented precondition of a qstate operation."""


class BellKind(Enum):
    PSI_MINUS = "psi-"
    PSI_PLUS = "psi+"
    PHI_MINUS = "phi-"
    PHI_PLUS = "phi+"


class PauliOp(Enum):
    X = "X"
    Y = "Y"
    Z = "Z"
    IDENT = "I"


PAULI_OPS = (PauliOp.X, PauliOp.Y, PauliOp.Z, PauliOp.IDENT)


class Particle(Enum):
    A = "A"
    B = "B"


class SpinOutcome(Enum):
    UP = 1
    DOWN = -1

    @property
    def bit(self) -> int:
        return 0 if self is SpinOutcome.UP else 1

    @classmethod
    def from_bit(cls, bit: int) -> "SpinOutcome":
        return cls.UP if bit == 0 else cls.DOWN

    def flipped(self) -> "SpinOutcome":
        return SpinOutcome.DOWN if self is SpinOutcome.UP else SpinOutcome.UP


@dataclass(frozen=True, slots=True)
class Axis:
    """Unit measurement direction."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for c in (self.x, self.y, self.z):
            if not math.isfinite(c):
                raise PreconditionError(f"axis component {c!r} is not finite")
        norm = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if abs(norm - 1.0) > NORM_TOL:
            raise PreconditionError(f"axis is not unit length (|a| = {norm!r})")

    @classmethod
    def _unchecked(cls, x: float, y: float, z: float) -> "Axis":
        obj = object.__new__(cls)
        object.__setattr__(obj, "x", x)
        object.__setattr__(obj, "y", y)
        object.__setattr__(obj, "z", z)
        return obj

    @classmethod
    def from_angles(cls, theta: float, phi: float = 0.0) -> "Axis":
        st = math.sin(theta)
        return cls(st * math.cos(phi), st * math.sin(phi), math.cos(theta))

    @classmethod
    def random(cls, rng) -> "Axis":
        """Uniform direction on the sphere by inverse CDF.

        ``rng`` is anything with a ``random()`` method returning floats in
        [0, 1), e.g. :class:`random.Random`.
        """
        z = 2.0 * rng.random() - 1.0
        phi = 2.0 * math.pi * rng.random()
        r = math.sqrt(max(0.0, 1.0 - z * z))
        return cls._unchecked(r * math.cos(phi), r * math.sin(phi), z)

    def dot(self, other: "Axis") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


Z_AXIS = Axis._unchecked(0.0, 0.0, 1.0)
X_AXIS = Axis._unchecked(1.0, 0.0, 0.0)
Y_AXIS = Axis._unchecked(0.0, 1.0, 0.0)


@dataclass(frozen=True, slots=True)
class PureTwoQubitState:
    """Normalized joint state of one shared pair."""

    amps: tuple[complex, complex, complex, complex]

    def __post_init__(self):
        if len(self.amps) != 4:
            raise PreconditionError("a two-qubit state needs exactly 4 amplitudes")
        amps = tuple(complex(a) for a in self.amps)
        for a in amps:
            if not (math.isfinite(a.real) and math.isfinite(a.imag)):
                raise PreconditionError(f"amplitude {a!r} is not finite")
        object.__setattr__(self, "amps", amps)
        if abs(self.norm() - 1.0) > NORM_TOL:
            raise PreconditionError(f"state is not normalized (norm = {self.norm()!r})")

    @classmethod
    def _unchecked(cls, amps) -> "PureTwoQubitState":
        obj = object.__new__(cls)
        object.__setattr__(obj, "amps", amps)
        return obj

    @classmethod
    def product(cls, bit_a: int, bit_b: int) -> "PureTwoQubitState":
        """Computational basis product state |bit_a>_A |bit_b>_B."""
        amps = [0j, 0j, 0j, 0j]
        amps[2 * bit_a + bit_b] = 1 + 0j
        return cls._unchecked(tuple(amps))

    def norm(self) -> float:
        return math.sqrt(sum(a.real * a.real + a.imag * a.imag for a in self.amps))

    def to_numpy(self) -> np.ndarray:
        return np.array(self.amps, dtype=complex)

    def equals_up_to_phase(self, other: "PureTwoQubitState", tol: float = NORM_TOL) -> bool:
        # the overlap fixes the candidate phase; then compare componentwise
        overlap = sum(b.conjugate() * a for a, b in zip(self.amps, other.amps))
        if abs(overlap) < 0.5:
            return False
        phase = overlap / abs(overlap)
        return all(abs(a - phase * b) <= tol for a, b in zip(self.amps, other.amps))

    def allclose(self, other: "PureTwoQubitState", tol: float = ALGEBRA_TOL) -> bool:
        return all(abs(a - b) <= tol for a, b in zip(self.amps, other.amps))

    def is_product(self, tol: float = 1e-9) -> bool:
        a00, a01, a10, a11 = self.amps
        return abs(a00 * a11 - a01 * a10) <= tol


def make_bell(kind: BellKind) -> PureTwoQubitState:
    s = _S
    if kind is BellKind.PSI_MINUS:
        amps = (0j, complex(s), complex(-s), 0j)
    elif kind is BellKind.PSI_PLUS:
        amps = (0j, complex(s), complex(s), 0j)
    elif kind is BellKind.PHI_MINUS:
        amps = (complex(s), 0j, 0j, complex(-s))
    else:
        amps = (complex(s), 0j, 0j, complex(s))
    return PureTwoQubitState._unchecked(amps)


SINGLET = make_bell(BellKind.PSI_MINUS)


_new_state = PureTwoQubitState._unchecked


def apply_pauli(state: PureTwoQubitState, particle: Particle, op: PauliOp) -> PureTwoQubitState:
    """Return (U x I)|psi> for particle A or (I x U)|psi> for particle B.

    Multiplication by +-i is done by swapping components, so applying the
    same operator twice reproduces the input bit for bit.
    """
    if op is PauliOp.IDENT:
        return state
    a00, a01, a10, a11 = state.amps
    if particle is Particle.A:
        if op is PauliOp.X:
            return _new_state((a10, a11, a00, a01))
        if op is PauliOp.Z:
            return _new_state((a00, a01, -a10, -a11))
        # Y|0> = i|1>, Y|1> = -i|0>
        return _new_state((
            complex(a10.imag, -a10.real), complex(a11.imag, -a11.real),
            complex(-a00.imag, a00.real), complex(-a01.imag, a01.real),
        ))
    if op is PauliOp.X:
        return _new_state((a01, a00, a11, a10))
    if op is PauliOp.Z:
        return _new_state((a00, -a01, a10, -a11))
    return _new_state((
        complex(a01.imag, -a01.real), complex(-a00.imag, a00.real),
        complex(a11.imag, -a11.real), complex(-a10.imag, a10.real),
    ))


def _check_axis(axis: Axis) -> None:
    n2 = axis.x * axis.x + axis.y * axis.y + axis.z * axis.z
    if abs(math.sqrt(n2) - 1.0) > NORM_TOL:
        raise PreconditionError(f"axis is not unit length (|a|^2 = {n2!r})")


def _project_pair(axis: Axis, sign: int, u: complex, v: complex) -> tuple[complex, complex]:
    # (I + sign * a.sigma) / 2 on the single-qubit vector (u, v)
    x, y, z = axis.x, axis.y, axis.z
    off_lo = complex(x, y)  # (x + iy)
    off_hi = complex(x, -y)  # (x - iy)
    if sign > 0:
        return (0.5 * ((1.0 + z) * u + off_hi * v), 0.5 * (off_lo * u + (1.0 - z) * v))
    return (0.5 * ((1.0 - z) * u - off_hi * v), 0.5 * (-off_lo * u + (1.0 + z) * v))


def _project(state_amps, particle: Particle, axis: Axis, sign: int):
    a00, a01, a10, a11 = state_amps
    if particle is Particle.A:
        n00, n10 = _project_pair(axis, sign, a00, a10)
        n01, n11 = _project_pair(axis, sign, a01, a11)
    else:
        n00, n01 = _project_pair(axis, sign, a00, a01)
        n10, n11 = _project_pair(axis, sign, a10, a11)
    return (n00, n01, n10, n11)


def _sqnorm(amps) -> float:
    return sum(a.real * a.real + a.imag * a.imag for a in amps)


def outcome_probability(
    state: PureTwoQubitState, particle: Particle, axis: Axis, outcome: SpinOutcome
) -> float:
    """Born-rule probability of ``outcome`` for a spin measurement of one particle."""
    _check_axis(axis)
    up = _snap(_sqnorm(_project(state.amps, particle, axis, 1)))
    return up if outcome is SpinOutcome.UP else 1.0 - up


def measure_spin(
    state: PureTwoQubitState, particle: Particle, axis: Axis, u: float
) -> tuple[SpinOutcome, PureTwoQubitState]:
    """Projective spin measurement with caller-supplied uniform ``u`` in [0, 1).

    The outcome is UP iff ``u`` is below the UP probability; the returned
    state is the renormalized projection onto the observed eigenspace.
    """
    if not 0.0 <= u < 1.0:
        raise PreconditionError(f"u must lie in [0, 1), got {u!r}")
    x, y, z = axis.x, axis.y, axis.z
    if abs(math.sqrt(x * x + y * y + z * z) - 1.0) > NORM_TOL:
        raise PreconditionError("axis is not unit length")
    a00, a01, a10, a11 = state.amps
    # hot path: (u0, v0) and (u1, v1) are the measured particle's |0>,|1>
    # components for the two basis values of the spectator particle
    if particle is Particle.A:
        u0, v0, u1, v1 = a00, a10, a01, a11
    else:
        u0, v0, u1, v1 = a00, a01, a10, a11
    if x == 0.0 and y == 0.0 and z == 1.0:
        p_up = u0.real * u0.real + u0.imag * u0.imag + u1.real * u1.real + u1.imag * u1.imag
        if u < _snap(p_up):
            s = 1.0 / math.sqrt(p_up)
            outcome, pu0, pv0, pu1, pv1 = SpinOutcome.UP, s * u0, 0j, s * u1, 0j
        else:
            s = 1.0 / math.sqrt(
                v0.real * v0.real + v0.imag * v0.imag + v1.real * v1.real + v1.imag * v1.imag
            )
            outcome, pu0, pv0, pu1, pv1 = SpinOutcome.DOWN, 0j, s * v0, 0j, s * v1
        if particle is Particle.A:
            return outcome, _new_state((pu0, pu1, pv0, pv1))
        return outcome, _new_state((pu0, pv0, pu1, pv1))
    hz = 0.5 * z
    lo = complex(0.5 * x, 0.5 * y)
    hi = complex(0.5 * x, -0.5 * y)
    # P_up = 1/2 + (a.sigma)/2; P_down = 1 - P_up
    pu0 = (0.5 + hz) * u0 + hi * v0
    pv0 = lo * u0 + (0.5 - hz) * v0
    pu1 = (0.5 + hz) * u1 + hi * v1
    pv1 = lo * u1 + (0.5 - hz) * v1
    p_up = (
        pu0.real * pu0.real + pu0.imag * pu0.imag + pv0.real * pv0.real + pv0.imag * pv0.imag
        + pu1.real * pu1.real + pu1.imag * pu1.imag + pv1.real * pv1.real + pv1.imag * pv1.imag
    )
    if u < _snap(p_up):
        outcome, p = SpinOutcome.UP, p_up
    else:
        outcome = SpinOutcome.DOWN
        pu0, pv0, pu1, pv1 = u0 - pu0, v0 - pv0, u1 - pu1, v1 - pv1
        p = (
            pu0.real * pu0.real + pu0.imag * pu0.imag + pv0.real * pv0.real + pv0.imag * pv0.imag
            + pu1.real * pu1.real + pu1.imag * pu1.imag + pv1.real * pv1.real + pv1.imag * pv1.imag
        )
    s = 1.0 / math.sqrt(p)
    if particle is Particle.A:
        amps = (s * pu0, s * pu1, s * pv0, s * pv1)
    else:
        amps = (s * pu0, s * pv0, s * pu1, s * pv1)
    return outcome, _new_state(amps)


def joint_distribution(
    state: PureTwoQubitState, axis_a: Axis, axis_b: Axis
) -> dict[tuple[SpinOutcome, SpinOutcome], float]:
    """All four joint outcome probabilities for measuring A along axis_a and B along axis_b."""
    _check_axis(axis_a)
    _check_axis(axis_b)
    out = {}
    for oa in SpinOutcome:
        pa = _project(state.amps, Particle.A, axis_a, oa.value)
        for ob in SpinOutcome:
            out[(oa, ob)] = _sqnorm(_project(pa, Particle.B, axis_b, ob.value))
    return out


def anticorrelation_probability(state: PureTwoQubitState, axis_a: Axis, axis_b: Axis) -> float:
    dist = joint_distribution(state, axis_a, axis_b)
    return sum(p for (oa, ob), p in dist.items() if oa is not ob)


# --- density matrices -------------------------------------------------------

_PAULI_MATRICES = {
    PauliOp.X: np.array([[0, 1], [1, 0]], dtype=complex),
    PauliOp.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    PauliOp.Z: np.array([[1, 0], [0, -1]], dtype=complex),
    PauliOp.IDENT: np.eye(2, dtype=complex),
}


def pauli_matrix(op: PauliOp) -> np.ndarray:
    return _PAULI_MATRICES[op].copy()


def _check_density(m: np.ndarray, dim: int) -> None:
    if m.shape != (dim, dim):
        raise PreconditionError(f"expected a {dim}x{dim} matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise PreconditionError("density matrix has non-finite entries")
    if np.max(np.abs(m - m.conj().T)) > ALGEBRA_TOL:
        raise PreconditionError("density matrix is not Hermitian")
    if abs(np.trace(m) - 1.0) > ALGEBRA_TOL:
        raise PreconditionError(f"density matrix trace is {np.trace(m)!r}, not 1")
    if np.min(np.linalg.eigvalsh(m)) < -ALGEBRA_TOL:
        raise PreconditionError("density matrix is not positive semidefinite")


@dataclass(frozen=True)
class DensityMatrix4:
    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        _check_density(m, 4)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @classmethod
    def from_state(cls, state: PureTwoQubitState) -> "DensityMatrix4":
        v = state.to_numpy()
        return cls(np.outer(v, v.conj()))

    def max_deviation(self, other: np.ndarray) -> float:
        return float(np.max(np.abs(self.entries - other)))


@dataclass(frozen=True)
class DensityMatrix2:
    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        _check_density(m, 2)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    def max_deviation(self, other: np.ndarray) -> float:
        return float(np.max(np.abs(self.entries - other)))


def uniform_pauli_mixture(kind: BellKind) -> DensityMatrix4:
    """Equal-weight average of (U x I)|bell><bell|(U x I)^dagger over all four Paulis."""
    bell = make_bell(kind).to_numpy()
    rho = np.zeros((4, 4), dtype=complex)
    for op in PAULI_OPS:
        v = np.kron(_PAULI_MATRICES[op], np.eye(2)) @ bell
        rho += 0.25 * np.outer(v, v.conj())
    return DensityMatrix4(rho)


def product_basis_mixture() -> DensityMatrix4:
    """Equal mixture of the four computational product states |01>, |10>, |00>, |11>."""
    rho = np.zeros((4, 4), dtype=complex)
    for a in (0, 1):
        for b in (0, 1):
            v = PureTwoQubitState.product(a, b).to_numpy()
            rho += 0.25 * np.outer(v, v.conj())
    return DensityMatrix4(rho)


def marginal(
    state_or_density: Union[PureTwoQubitState, DensityMatrix4], particle: Particle
) -> DensityMatrix2:
    """Reduced density matrix of ``particle`` (partial trace over the other one)."""
    if isinstance(state_or_density, PureTwoQubitState):
        rho = DensityMatrix4.from_state(state_or_density).entries
    else:
        rho = state_or_density.entries
    t = rho.reshape(2, 2, 2, 2)  # indices a, b, a', b'
    if particle is Particle.A:
        red = np.einsum("ijkj->ik", t)
    else:
        red = np.einsum("ijil->jl", t)
    return DensityMatrix2(red)


def bell_states() -> Sequence[PureTwoQubitState]:
    return [make_bell(k) for k in BellKind]
