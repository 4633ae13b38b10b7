"""Small statevector emulator: gates, Born-rule sampling, probability-to-angle.

Bit ordering: qubit 0 is the most significant bit of the amplitude index, so
character ``q`` of an outcome bitstring is the value measured on qubit ``q``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rng import RngStream

MAX_QUBITS = 10
NORM_TOL = 1e-10


class QuantumError(ValueError):
    """Invalid quantum state, gate, or measurement request."""


@dataclass(frozen=True, eq=False)
class QuantumState:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if not isinstance(self.num_qubits, int) or not 1 <= self.num_qubits <= MAX_QUBITS:
            raise QuantumError(f"num_qubits must be in 1..{MAX_QUBITS}, got {self.num_qubits!r}")
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.shape[0] != 2**self.num_qubits:
            raise QuantumError(
                f"expected {2**self.num_qubits} amplitudes for {self.num_qubits} qubits, got {amps.shape[0]}"
            )
        if not np.all(np.isfinite(amps)):
            raise QuantumError("amplitudes must be finite")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise QuantumError(f"state is not normalized (|psi|^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @functools.cached_property
    def _cdf(self) -> np.ndarray:
        probs = self.probabilities()
        return np.cumsum(probs / probs.sum())


@dataclass(frozen=True)
class GateOp:
    """One gate. ``name`` is one of H, X, RX, RY, RZ, CNOT."""

    name: str
    angle: float | None = None
    control: int | None = None
    target: int | None = None

    def __post_init__(self):
        name = self.name.upper()
        object.__setattr__(self, "name", name)
        if name not in _FIXED and name not in _ROTATIONS and name != "CNOT":
            raise QuantumError(f"unknown gate {self.name!r}")
        if name in _ROTATIONS:
            if self.angle is None or not math.isfinite(self.angle):
                raise QuantumError(f"{name} needs a finite angle, got {self.angle!r}")
        if name == "CNOT":
            if self.control is None or self.target is None:
                raise QuantumError("CNOT needs control and target qubits")
            if self.control == self.target:
                raise QuantumError("CNOT control and target must differ")

    def matrix(self) -> np.ndarray:
        if self.name in _FIXED:
            return _FIXED[self.name]
        if self.name in _ROTATIONS:
            return _ROTATIONS[self.name](self.angle)
        raise QuantumError("CNOT has no single-qubit matrix")


def H() -> GateOp:
    return GateOp("H")


def X() -> GateOp:
    return GateOp("X")


def Rx(angle: float) -> GateOp:
    return GateOp("RX", angle=angle)


def Ry(angle: float) -> GateOp:
    return GateOp("RY", angle=angle)


def Rz(angle: float) -> GateOp:
    return GateOp("RZ", angle=angle)


def CNOT(control: int, target: int) -> GateOp:
    return GateOp("CNOT", control=control, target=target)


_S = 1 / math.sqrt(2)
_FIXED = {
    "H": np.array([[_S, _S], [_S, -_S]], dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
}


def _rx(t: float) -> np.ndarray:
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def _ry(t: float) -> np.ndarray:
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def _rz(t: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * t), 0], [0, np.exp(0.5j * t)]], dtype=np.complex128)


_ROTATIONS = {"RX": _rx, "RY": _ry, "RZ": _rz}


def new_state(num_qubits: int) -> QuantumState:
    """Return the all-zero basis state on ``num_qubits`` qubits."""
    if not isinstance(num_qubits, int) or not 1 <= num_qubits <= MAX_QUBITS:
        raise QuantumError(f"num_qubits must be in 1..{MAX_QUBITS}, got {num_qubits!r}")
    amps = np.zeros(2**num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return QuantumState(num_qubits, amps)


def _check_qubit(state: QuantumState, q: int) -> int:
    if not isinstance(q, (int, np.integer)) or not 0 <= q < state.num_qubits:
        raise QuantumError(f"qubit index {q!r} out of range for {state.num_qubits} qubits")
    return int(q)


def apply_gate(
    state: QuantumState, gate: GateOp, targets: int | Sequence[int] | None = None
) -> QuantumState:
    """Apply ``gate`` and return the new state.

    Single-qubit gates act on every qubit in ``targets`` (default qubit 0).
    CNOT carries its own control/target and ignores ``targets``.
    """
    n = state.num_qubits
    psi = state.amplitudes.reshape([2] * n)
    if gate.name == "CNOT":
        c = _check_qubit(state, gate.control)
        t = _check_qubit(state, gate.target)
        out = psi.copy()
        sel = [slice(None)] * n
        sel[c] = 1
        sub = out[tuple(sel)]
        # once qubit c is fixed, later axes shift down by one
        t_axis = t if t < c else t - 1
        out[tuple(sel)] = np.flip(sub, axis=t_axis)
        return QuantumState(n, out.reshape(-1))

    if targets is None:
        targets = (0,)
    elif isinstance(targets, (int, np.integer)):
        targets = (targets,)
    m = gate.matrix()
    if n == 1:
        for q in targets:
            _check_qubit(state, q)
        out = state.amplitudes
        for _ in targets:
            out = m @ out
        return QuantumState(1, out)
    out = psi
    for q in targets:
        q = _check_qubit(state, q)
        out = np.moveaxis(np.tensordot(m, out, axes=([1], [q])), 0, q)
    return QuantumState(n, np.ascontiguousarray(out).reshape(-1))


def probability_of_one(state: QuantumState, qubit: int = 0) -> float:
    """Marginal probability of reading 1 on ``qubit``."""
    q = _check_qubit(state, qubit)
    probs = state.probabilities().reshape([2] * state.num_qubits)
    return float(np.take(probs, 1, axis=q).sum())


def rx_angle_for_probability(p: float) -> float:
    """Rx angle whose rotation of |0> measures 1 with probability ``p``."""
    if not isinstance(p, (int, float, np.floating, np.integer)) or not math.isfinite(p):
        raise QuantumError(f"probability must be a finite number, got {p!r}")
    if not 0.0 <= p <= 1.0:
        raise QuantumError(f"probability must lie in [0, 1], got {p!r}")
    return math.acos(-2.0 * p + 1.0)


@functools.lru_cache(maxsize=4096)
def prepare_rx(p: float) -> QuantumState:
    """One qubit rotated so that P(1) = p. States are immutable, so cached."""
    return apply_gate(new_state(1), Rx(rx_angle_for_probability(p)))


def _born(state: QuantumState) -> np.ndarray:
    probs = state.probabilities()
    return probs / probs.sum()


def _bitstring(index: int, n: int) -> str:
    return format(index, f"0{n}b")


def measure_once(state: QuantumState, rng: RngStream) -> str:
    """Sample one outcome; the state itself is left untouched."""
    cdf = state._cdf
    u = rng.random()
    idx = int(np.searchsorted(cdf, u, side="right"))
    # guard against cdf[-1] rounding below 1
    idx = min(idx, cdf.shape[0] - 1)
    while state.amplitudes[idx] == 0 and idx > 0:
        idx -= 1
    return _bitstring(idx, state.num_qubits)


def measure_shots(state: QuantumState, shots: int, rng: RngStream) -> dict[str, int]:
    """Counts of each observed outcome over ``shots`` independent preparations."""
    if not isinstance(shots, (int, np.integer)) or shots < 1:
        raise QuantumError(f"shots must be a positive integer, got {shots!r}")
    counts = rng.multinomial(int(shots), _born(state))
    return {
        _bitstring(i, state.num_qubits): int(c) for i, c in enumerate(counts) if c > 0
    }


def count_ones(counts: dict[str, int], qubit: int = 0) -> int:
    return sum(c for bits, c in counts.items() if bits[qubit] == "1")
