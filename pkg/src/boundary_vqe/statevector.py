"""Noiseless statevector simulation with in-place stride kernels.

Amplitude ordering: the basis index is read as a bit string b_1 b_2 ... b_L
with site 1 the most significant bit, so site ``s`` lives at bit ``L - s``.
The dense oracle in :mod:`boundary_vqe.free_fermion` uses the same ordering
(``kron`` with site 1 leftmost).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .spin_model import Observable, UnsupportedGroupingError

MAX_QUBITS = 24
IMAG_TOLERANCE = 1e-10
RNG_NAME = "numpy.PCG64"

GATE_KINDS = ("H", "RX", "RZ", "RZZ")


class CapacityError(ValueError):
    pass


class NumericalIntegrityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class GateOp:
    """One gate. ``param``/``sign`` tie a rotation angle to a named parameter."""

    kind: str
    targets: tuple[int, ...]
    angle: float = 0.0
    param: str | None = None
    sign: int = 1

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind == "RZZ" else 1
        if len(self.targets) != arity:
            raise ValueError(f"{self.kind} acts on {arity} qubit(s), got {self.targets}")
        if arity == 2 and self.targets[0] == self.targets[1]:
            raise ValueError("RZZ needs two distinct targets")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @property
    def parametrized(self) -> bool:
        return self.kind != "H"

    def with_angle(self, angle: float) -> "GateOp":
        return GateOp(self.kind, self.targets, angle, self.param, self.sign)


@dataclass(frozen=True)
class Circuit:
    qubit_count: int
    gates: tuple[GateOp, ...]
    parameter_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        names = set(self.parameter_names)
        for g in self.gates:
            for t in g.targets:
                if not 1 <= t <= self.qubit_count:
                    raise IndexError(f"target {t} outside [1, {self.qubit_count}]")
            if g.param is not None and g.param not in names:
                raise ValueError(f"gate refers to unknown parameter {g.param!r}")

    def __len__(self) -> int:
        return len(self.gates)

    def parameter_slots(self) -> dict[str, list[tuple[int, int]]]:
        """Map parameter name -> [(gate index, sign), ...]."""
        slots: dict[str, list[tuple[int, int]]] = {n: [] for n in self.parameter_names}
        for idx, g in enumerate(self.gates):
            if g.param is not None:
                slots[g.param].append((idx, g.sign))
        return slots

    def render(self) -> str:
        lines = []
        for g in self.gates:
            targets = ",".join(str(t) for t in g.targets)
            if g.param is None:
                lines.append(f"{g.kind} {targets}")
            else:
                sign = "+" if g.sign > 0 else "-"
                lines.append(f"{g.kind} {targets} {g.param} {sign}1 angle={float(g.angle)!r}")
        return "\n".join(lines)


class StateVector:
    """Owns a complex amplitude array of length 2**qubit_count."""

    def __init__(self, amplitudes: np.ndarray, qubit_count: int | None = None):
        amplitudes = np.asarray(amplitudes, dtype=np.complex128)
        n = amplitudes.size.bit_length() - 1 if qubit_count is None else qubit_count
        if amplitudes.size != 1 << n:
            raise ValueError(f"{amplitudes.size} amplitudes do not match {n} qubits")
        self.amplitudes = amplitudes
        self.qubit_count = n

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.qubit_count)

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @classmethod
    def uniform(cls, L: int) -> "StateVector":
        return cls(np.full(1 << L, (1 << L) ** -0.5, dtype=np.complex128), L)


def init_zero(L: int) -> StateVector:
    if L < 1:
        raise ValueError("need at least one qubit")
    if L > MAX_QUBITS:
        raise CapacityError(f"{L} qubits exceeds cap of {MAX_QUBITS}")
    amps = np.zeros(1 << L, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(amps, L)


_SQRT_HALF = 2.0 ** -0.5


def _one_qubit_view(amps: np.ndarray, L: int, site: int) -> np.ndarray:
    return amps.reshape(1 << (site - 1), 2, 1 << (L - site))


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    """Apply ``gate`` to ``state`` in place and return it."""
    L = state.qubit_count
    for t in gate.targets:
        if not 1 <= t <= L:
            raise IndexError(f"target {t} outside [1, {L}]")
    amps = state.amplitudes
    kind = gate.kind
    if kind == "RZZ":
        s, t = sorted(gate.targets)
        v = amps.reshape(1 << (s - 1), 2, 1 << (t - s - 1), 2, 1 << (L - t))
        phase = np.exp(-0.5j * gate.angle)
        v[:, 0, :, 0, :] *= phase
        v[:, 1, :, 1, :] *= phase
        conj = phase.conjugate()
        v[:, 0, :, 1, :] *= conj
        v[:, 1, :, 0, :] *= conj
        return state

    v = _one_qubit_view(amps, L, gate.targets[0])
    if kind == "RZ":
        phase = np.exp(-0.5j * gate.angle)
        v[:, 0, :] *= phase
        v[:, 1, :] *= phase.conjugate()
    elif kind == "RX":
        c = np.cos(0.5 * gate.angle)
        s = -1j * np.sin(0.5 * gate.angle)
        a = v[:, 0, :].copy()
        b = v[:, 1, :]
        v[:, 0, :] = c * a + s * b
        v[:, 1, :] = s * a + c * b
    else:
        a = v[:, 0, :].copy()
        b = v[:, 1, :]
        v[:, 0, :] = (a + b) * _SQRT_HALF
        v[:, 1, :] = (a - b) * _SQRT_HALF
    return state


def apply_generator(amps: np.ndarray, L: int, gate: GateOp) -> np.ndarray:
    """Return G|amps> for the Pauli generator G of a rotation gate (copy)."""
    out = amps.copy()
    if gate.kind == "RZZ":
        s, t = sorted(gate.targets)
        v = out.reshape(1 << (s - 1), 2, 1 << (t - s - 1), 2, 1 << (L - t))
        v[:, 0, :, 1, :] *= -1
        v[:, 1, :, 0, :] *= -1
    elif gate.kind == "RZ":
        _one_qubit_view(out, L, gate.targets[0])[:, 1, :] *= -1
    elif gate.kind == "RX":
        v = _one_qubit_view(out, L, gate.targets[0])
        v[:] = v[:, ::-1, :].copy()
    else:
        raise ValueError(f"{gate.kind} has no rotation generator")
    return out


def run_circuit(circuit: Circuit, state: StateVector | None = None) -> StateVector:
    state = init_zero(circuit.qubit_count) if state is None else state
    for g in circuit.gates:
        apply_gate(state, g)
    return state


def inverse(gate: GateOp) -> GateOp:
    return gate if gate.kind == "H" else gate.with_angle(-gate.angle)


# ---------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class CompiledObservable:
    """Observable as ``out[j] = sum_m vec_m[j] * psi[j ^ m]`` over flip masks m."""

    masks: tuple[int, ...]
    vectors: tuple[np.ndarray, ...]
    offset: float
    qubit_count: int

    def apply(self, amps: np.ndarray) -> np.ndarray:
        idx = _indices(self.qubit_count)
        out = np.zeros_like(amps)
        for m, vec in zip(self.masks, self.vectors):
            if m == 0:
                out += vec * amps
            else:
                out += vec * amps[idx ^ m]
        return out


@lru_cache(maxsize=32)
def _indices(L: int) -> np.ndarray:
    return np.arange(1 << L, dtype=np.int64)


@lru_cache(maxsize=32)
def _site_bits(L: int) -> np.ndarray:
    """bits[s-1][j] = occupation bit of site s in basis index j."""
    idx = _indices(L)
    return np.stack([(idx >> (L - s)) & 1 for s in range(1, L + 1)])


def _term_phase(bits: np.ndarray, factors, L: int) -> tuple[int, np.ndarray]:
    """Flip mask and phase vector ph with P|i> = ph[i] |i ^ mask>."""
    mask = 0
    phase = np.ones(1 << L, dtype=np.complex128)
    for site, kind in factors:
        b = bits[site - 1]
        if kind in ("X", "Y"):
            mask |= 1 << (L - site)
        if kind == "Z":
            phase *= 1 - 2 * b
        elif kind == "Y":
            phase *= 1j * (1 - 2 * b)
    return mask, phase


_COMPILED: dict[int, tuple[Observable, CompiledObservable]] = {}


def compile_observable(observable: Observable) -> CompiledObservable:
    key = id(observable)
    hit = _COMPILED.get(key)
    if hit is not None and hit[0] is observable:
        return hit[1]
    L = observable.length
    bits = _site_bits(L)
    idx = _indices(L)
    vectors: dict[int, np.ndarray] = {}
    for term in observable.terms:
        mask, phase = _term_phase(bits, term.factors, L)
        # (P psi)[j] = ph[j ^ mask] psi[j ^ mask]
        contribution = term.coefficient * (phase if mask == 0 else phase[idx ^ mask])
        if mask in vectors:
            vectors[mask] = vectors[mask] + contribution
        else:
            vectors[mask] = contribution
    masks = tuple(sorted(vectors))
    compiled = CompiledObservable(masks, tuple(vectors[m] for m in masks),
                                  observable.constant_offset, L)
    if len(_COMPILED) > 64:
        _COMPILED.clear()
    _COMPILED[key] = (observable, compiled)
    return compiled


def _checked_real(value: complex) -> float:
    if abs(value.imag) > IMAG_TOLERANCE:
        raise NumericalIntegrityError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def expectation(state: StateVector, observable: Observable) -> float:
    """<psi|O|psi> for a normalized state."""
    if observable.length != state.qubit_count:
        raise ValueError(
            f"observable on {observable.length} sites, state on {state.qubit_count} qubits"
        )
    compiled = compile_observable(observable)
    amps = state.amplitudes
    value = np.vdot(amps, compiled.apply(amps))
    return _checked_real(value) + compiled.offset


def _parity_eigenvalues(samples: np.ndarray, L: int, factors) -> np.ndarray:
    ev = np.ones(samples.shape, dtype=np.int8)
    for site, _ in factors:
        ev *= (1 - 2 * ((samples >> (L - site)) & 1)).astype(np.int8)
    return ev


def sample_expectation(state: StateVector, observable: Observable, shots: int,
                       seed: int | np.random.Generator | None = None) -> float:
    """Shot-based estimate using one Z-basis and one X-basis measurement setting.

    Each non-empty group is measured with ``shots`` samples drawn from a
    ``numpy.random.Generator`` (PCG64) seeded by ``seed``.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if observable.length != state.qubit_count:
        raise ValueError("observable and state sizes differ")
    groups = observable.grouped()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    L = state.qubit_count
    total = observable.constant_offset
    for basis in ("Z", "X"):
        terms = groups[basis]
        if not terms:
            continue
        measured = state
        if basis == "X":
            measured = state.copy()
            for s in range(1, L + 1):
                apply_gate(measured, GateOp("H", (s,)))
        probs = measured.probabilities()
        probs = probs / probs.sum()
        samples = rng.choice(probs.size, size=shots, p=probs)
        for t in terms:
            total += t.coefficient * float(_parity_eigenvalues(samples, L, t.factors).mean())
    return total


def random_state(L: int, rng: np.random.Generator) -> StateVector:
    amps = rng.normal(size=1 << L) + 1j * rng.normal(size=1 << L)
    amps /= np.linalg.norm(amps)
    return StateVector(amps, L)


def apply_circuit_gates(state: StateVector, gates: Sequence[GateOp]) -> StateVector:
    for g in gates:
        apply_gate(state, g)
    return state
