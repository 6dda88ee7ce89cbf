"""Statevector simulation of parameterized quantum circuits.

Conventions (pinned so numerical tests are exact):

* ``RX(t) = exp(-i t X / 2)``, ``RY(t) = exp(-i t Y / 2)``,
  ``RZ(t) = exp(-i t Z / 2)``; the phase gate is
  ``PHASE(l) = diag(1, exp(i l))``.
* Qubit 0 is the most significant bit of the basis index, i.e. for a
  2-qubit state the amplitudes are ordered ``|00>, |01>, |10>, |11>``
  with qubit 0 leftmost.
* Everything is exact double-precision statevector arithmetic; there is
  no shot sampling and no noise.

Circuits are immutable gate lists.  Parametric gates take their angle
from a literal value, from a feature slot (classical data encoded at run
time) or from a weight slot (trainable), optionally through a fixed
angle map such as the pairwise interaction used by the ZZ feature map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class CircuitError(ValueError):
    """Structurally invalid circuit or gate (bad indices, bad kinds)."""


class BindingError(ValueError):
    """Angle binding failed (missing angle, wrong feature/weight length)."""


GATE_KINDS = ("H", "RX", "RY", "RZ", "PHASE", "CNOT", "CRZ")
PARAMETRIC_KINDS = frozenset({"RX", "RY", "RZ", "PHASE", "CRZ"})

FEATURE = "feature"
WEIGHT = "weight"


# --------------------------------------------------------------------------
# Angle sources
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LiteralAngle:
    """A fixed angle, independent of any slot."""

    value: float

    def resolve(self, features, weights):
        return self.value

    def partials(self, features, weights):
        return ()


@dataclass(frozen=True)
class SlotAngle:
    """Angle proportional to one slot value: ``angle = coeff * s``."""

    kind: str
    index: int
    coeff: float = 1.0

    def resolve(self, features, weights):
        s = features if self.kind == FEATURE else weights
        return self.coeff * s[self.index]

    def partials(self, features, weights):
        return ((self.kind, self.index, self.coeff),)


@dataclass(frozen=True)
class PairInteractionAngle:
    """Pairwise interaction angle ``2 * (pi - s_i) * (pi - s_j)``."""

    kind: str
    i: int
    j: int

    def resolve(self, features, weights):
        s = features if self.kind == FEATURE else weights
        return 2.0 * (math.pi - s[self.i]) * (math.pi - s[self.j])

    def partials(self, features, weights):
        s = features if self.kind == FEATURE else weights
        return (
            (self.kind, self.i, -2.0 * (math.pi - s[self.j])),
            (self.kind, self.j, -2.0 * (math.pi - s[self.i])),
        )


AngleSource = LiteralAngle | SlotAngle | PairInteractionAngle


def _slots_of(source) -> tuple[tuple[str, int], ...]:
    if isinstance(source, SlotAngle):
        return ((source.kind, source.index),)
    if isinstance(source, PairInteractionAngle):
        return ((source.kind, source.i), (source.kind, source.j))
    return ()


# --------------------------------------------------------------------------
# Gates and circuits
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Gate:
    """One gate: a kind, its target qubits and (if parametric) an angle source.

    ``targets`` is ``(qubit,)`` for single-qubit gates and
    ``(control, target)`` for CNOT / CRZ.
    """

    kind: str
    targets: tuple[int, ...]
    angle: AngleSource | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        n_targets = 2 if self.kind in ("CNOT", "CRZ") else 1
        if len(self.targets) != n_targets:
            raise CircuitError(f"{self.kind} takes {n_targets} qubit(s), got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise CircuitError(f"{self.kind} control and target must differ: {self.targets}")
        if (self.kind in PARAMETRIC_KINDS) != (self.angle is not None):
            raise CircuitError(f"{self.kind} angle source mismatch")


@dataclass(frozen=True)
class ParameterizedCircuit:
    """Immutable ordered gate list with feature and weight slots."""

    num_qubits: int
    ops: tuple[Gate, ...]
    num_feature_slots: int = 0
    num_weight_slots: int = 0

    def __post_init__(self):
        if self.num_qubits < 1:
            raise CircuitError("circuit needs at least one qubit")
        object.__setattr__(self, "ops", tuple(self.ops))
        for g in self.ops:
            for q in g.targets:
                if not 0 <= q < self.num_qubits:
                    raise CircuitError(f"gate {g.kind} targets qubit {q} outside 0..{self.num_qubits - 1}")
            if g.angle is not None:
                for kind, idx in _slots_of(g.angle):
                    count = self.num_feature_slots if kind == FEATURE else self.num_weight_slots
                    if not 0 <= idx < count:
                        raise CircuitError(f"gate {g.kind} references {kind} slot {idx} of {count}")

    @property
    def num_gates(self) -> int:
        return len(self.ops)


def compose(first: ParameterizedCircuit, second: ParameterizedCircuit) -> ParameterizedCircuit:
    """Circuit applying ``first`` then ``second``; slot indices of ``second`` are offset."""
    if first.num_qubits != second.num_qubits:
        raise CircuitError("composed circuits must share num_qubits")
    df, dw = first.num_feature_slots, first.num_weight_slots

    def shift(src):
        if isinstance(src, SlotAngle):
            off = df if src.kind == FEATURE else dw
            return SlotAngle(src.kind, src.index + off, src.coeff)
        if isinstance(src, PairInteractionAngle):
            off = df if src.kind == FEATURE else dw
            return PairInteractionAngle(src.kind, src.i + off, src.j + off)
        return src

    shifted = tuple(
        Gate(g.kind, g.targets, shift(g.angle) if g.angle is not None else None)
        for g in second.ops
    )
    return ParameterizedCircuit(
        num_qubits=first.num_qubits,
        ops=first.ops + shifted,
        num_feature_slots=df + second.num_feature_slots,
        num_weight_slots=dw + second.num_weight_slots,
    )


def bind_angles(circuit: ParameterizedCircuit, features, weights) -> np.ndarray:
    """Per-gate bound angles as a float array (NaN for fixed gates)."""
    features = np.asarray(features, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if features.shape != (circuit.num_feature_slots,):
        raise BindingError(
            f"expected {circuit.num_feature_slots} features, got shape {features.shape}"
        )
    if weights.shape != (circuit.num_weight_slots,):
        raise BindingError(
            f"expected {circuit.num_weight_slots} weights, got shape {weights.shape}"
        )
    angles = np.full(len(circuit.ops), np.nan)
    for i, g in enumerate(circuit.ops):
        if g.angle is not None:
            angles[i] = g.angle.resolve(features, weights)
    return angles


# --------------------------------------------------------------------------
# States
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StateVector:
    """Complex amplitudes over the 2^n computational basis states."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if self.num_qubits < 1:
            raise CircuitError("state needs at least one qubit")
        if amps.shape != (2 ** self.num_qubits,):
            raise CircuitError(
                f"state of {self.num_qubits} qubits needs {2 ** self.num_qubits} amplitudes"
            )
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > 1e-10:
            raise CircuitError(f"state not normalized: sum |a_i|^2 = {norm!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)


def zero_state(num_qubits: int) -> StateVector:
    amps = np.zeros(2 ** num_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(num_qubits, amps)


# --------------------------------------------------------------------------
# Kernels (arrays may carry a leading batch axis)
# --------------------------------------------------------------------------
# Amplitudes are kept as (..., 2**n) complex arrays.  Qubit q occupies axis
# q of the (..., 2, ..., 2) view because qubit 0 is the MSB of the index.

def _apply_dense1(arr, n, q, m00, m01, m10, m11):
    batch = arr.shape[:-1]
    view = arr.reshape(batch + (1 << q, 2, -1))
    a, b = view[..., 0, :], view[..., 1, :]
    out = np.empty_like(view)
    out[..., 0, :] = m00 * a + m01 * b
    out[..., 1, :] = m10 * a + m11 * b
    return out.reshape(batch + (-1,))


def _apply_diag1(arr, n, q, d0, d1):
    batch = arr.shape[:-1]
    view = arr.reshape(batch + (1 << q, 2, -1)).copy()
    view[..., 0, :] *= d0
    view[..., 1, :] *= d1
    return view.reshape(batch + (-1,))


def _apply_cnot(arr, n, control, target):
    batch = arr.shape[:-1]
    nb = len(batch)
    view = arr.reshape(batch + (2,) * n).copy()
    sel = (slice(None),) * nb + tuple(
        1 if i == control else slice(None) for i in range(n)
    )
    # target axis index inside the control=1 slice
    t_axis = nb + target - (1 if control < target else 0)
    view[sel] = np.flip(view[sel], axis=t_axis)
    return view.reshape(batch + (-1,))


def _apply_crz(arr, n, control, target, phase0, phase1):
    batch = arr.shape[:-1]
    nb = len(batch)
    view = arr.reshape(batch + (2,) * n).copy()
    if isinstance(phase0, np.ndarray) and phase0.ndim > 0:
        # per-row phases; selected block keeps n-2 free qubit axes
        shape = phase0.shape[:1] + (1,) * (n - 2)
        phase0 = phase0.reshape(shape)
        phase1 = phase1.reshape(shape)

    def sel(tbit):
        return (slice(None),) * nb + tuple(
            1 if i == control else (tbit if i == target else slice(None))
            for i in range(n)
        )

    view[sel(0)] *= phase0
    view[sel(1)] *= phase1
    return view.reshape(batch + (-1,))


_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def _apply_one(arr, n, gate: Gate, angle: float):
    """Apply one gate to a (2**n,) or (B, 2**n) amplitude array."""
    kind = gate.kind
    if kind == "H":
        q = gate.targets[0]
        return _apply_dense1(arr, n, q, _INV_SQRT2, _INV_SQRT2, _INV_SQRT2, -_INV_SQRT2)
    if kind == "RX":
        q = gate.targets[0]
        c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
        return _apply_dense1(arr, n, q, c, -1j * s, -1j * s, c)
    if kind == "RY":
        q = gate.targets[0]
        c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
        return _apply_dense1(arr, n, q, c, -s, s, c)
    if kind == "RZ":
        q = gate.targets[0]
        p = np.exp(-0.5j * angle)
        return _apply_diag1(arr, n, q, p, np.conj(p))
    if kind == "PHASE":
        q = gate.targets[0]
        return _apply_diag1(arr, n, q, 1.0, np.exp(1j * angle))
    if kind == "CNOT":
        return _apply_cnot(arr, n, *gate.targets)
    if kind == "CRZ":
        p = np.exp(-0.5j * angle)
        return _apply_crz(arr, n, *gate.targets, p, np.conj(p))
    raise CircuitError(f"unknown gate kind {kind!r}")


def _apply_one_batch(arr, n, gate: Gate, angles: np.ndarray):
    """Like :func:`_apply_one` with a per-row angle for a (B, 2**n) batch."""
    kind = gate.kind
    if kind in ("H", "CNOT"):
        return _apply_one(arr, n, gate, 0.0)
    col = angles[:, None, None]  # broadcasts over the (batch, block, 2, rest) views
    if kind == "RX":
        c, s = np.cos(col / 2.0), np.sin(col / 2.0)
        return _apply_dense1(arr, n, gate.targets[0], c, -1j * s, -1j * s, c)
    if kind == "RY":
        c, s = np.cos(col / 2.0), np.sin(col / 2.0)
        return _apply_dense1(arr, n, gate.targets[0], c, -s, s, c)
    if kind == "RZ":
        p = np.exp(-0.5j * col)
        return _apply_diag1(arr, n, gate.targets[0], p, np.conj(p))
    if kind == "PHASE":
        return _apply_diag1(arr, n, gate.targets[0], 1.0, np.exp(1j * col))
    if kind == "CRZ":
        p = np.exp(-0.5j * angles)
        return _apply_crz(arr, n, *gate.targets, p, np.conj(p))
    raise CircuitError(f"unknown gate kind {kind!r}")


# --------------------------------------------------------------------------
# Execution
# --------------------------------------------------------------------------

def apply_gate(state: StateVector, gate: Gate, bound_angle: float | None = None) -> StateVector:
    """Apply a single gate; ``bound_angle`` is required iff the gate is parametric."""
    for q in gate.targets:
        if not 0 <= q < state.num_qubits:
            raise CircuitError(f"gate {gate.kind} targets qubit {q} of a {state.num_qubits}-qubit state")
    parametric = gate.kind in PARAMETRIC_KINDS
    if parametric and bound_angle is None:
        raise BindingError(f"{gate.kind} needs a bound angle")
    if not parametric and bound_angle is not None:
        raise BindingError(f"{gate.kind} takes no angle")
    arr = _apply_one(np.array(state.amplitudes), state.num_qubits, gate,
                     0.0 if bound_angle is None else float(bound_angle))
    return StateVector(state.num_qubits, arr)


def run_circuit(circuit: ParameterizedCircuit, features=(), weights=()) -> StateVector:
    """Exact statevector after the circuit acts on |0...0> with the given bindings."""
    angles = bind_angles(circuit, features, weights)
    arr = np.zeros(2 ** circuit.num_qubits, dtype=complex)
    arr[0] = 1.0
    n = circuit.num_qubits
    for g, a in zip(circuit.ops, angles):
        arr = _apply_one(arr, n, g, a)
    return StateVector(n, arr)


def run_bound_batch(circuit: ParameterizedCircuit, angle_rows: np.ndarray) -> np.ndarray:
    """Run one circuit under many per-gate angle bindings at once.

    ``angle_rows`` has shape (B, num_gates); columns for fixed gates are
    ignored.  Returns the (B, 2**n) amplitudes.  This is the kernel behind
    batched parameter-shift evaluation.
    """
    angle_rows = np.asarray(angle_rows, dtype=float)
    if angle_rows.ndim != 2 or angle_rows.shape[1] != len(circuit.ops):
        raise BindingError("angle_rows must be (batch, num_gates)")
    n = circuit.num_qubits
    arr = np.zeros((angle_rows.shape[0], 2 ** n), dtype=complex)
    arr[:, 0] = 1.0
    for i, g in enumerate(circuit.ops):
        arr = _apply_one_batch(arr, n, g, angle_rows[:, i])
    return arr


# --------------------------------------------------------------------------
# Circuit builders
# --------------------------------------------------------------------------

def _check_rotation(rotation: str):
    if rotation not in ("RX", "RY", "RZ"):
        raise CircuitError(f"rotation must be RX, RY or RZ, got {rotation!r}")


def angle_embedding(num_qubits: int, rotation: str = "RX") -> ParameterizedCircuit:
    """One rotation per qubit whose angle is the raw feature value."""
    _check_rotation(rotation)
    ops = tuple(Gate(rotation, (q,), SlotAngle(FEATURE, q)) for q in range(num_qubits))
    return ParameterizedCircuit(num_qubits, ops, num_feature_slots=num_qubits)


def zz_feature_map(num_qubits: int, reps: int = 1) -> ParameterizedCircuit:
    """Hadamard layer, per-qubit phases P(2*v_j), then CNOT-phase-CNOT pair terms.

    The pairwise phase on qubit j is ``2 * (pi - v_i) * (pi - v_j)`` and the
    pairs are visited in the order (0,1), (0,2), ..., (0,n-1), (1,2), ...
    """
    if reps < 1:
        raise CircuitError("reps must be >= 1")
    ops: list[Gate] = []
    for _ in range(reps):
        for q in range(num_qubits):
            ops.append(Gate("H", (q,)))
        for q in range(num_qubits):
            ops.append(Gate("PHASE", (q,), SlotAngle(FEATURE, q, coeff=2.0)))
        for i in range(num_qubits):
            for j in range(i + 1, num_qubits):
                ops.append(Gate("CNOT", (i, j)))
                ops.append(Gate("PHASE", (j,), PairInteractionAngle(FEATURE, i, j)))
                ops.append(Gate("CNOT", (i, j)))
    return ParameterizedCircuit(num_qubits, tuple(ops), num_feature_slots=num_qubits)


def _cnot_ring(num_qubits: int) -> list[Gate]:
    ring = [Gate("CNOT", (q, q + 1)) for q in range(num_qubits - 1)]
    ring.append(Gate("CNOT", (num_qubits - 1, 0)))
    return ring


def basic_entangler_layers(num_qubits: int, num_layers: int, rotation: str = "RX") -> ParameterizedCircuit:
    """Per layer: one rotation per qubit, then a closed CNOT ring.

    Weight slot of the rotation on qubit q in layer l is ``l * n + q``.
    A single qubit gets rotations only (no ring).
    """
    _check_rotation(rotation)
    if num_layers < 1:
        raise CircuitError("num_layers must be >= 1")
    ops: list[Gate] = []
    for layer in range(num_layers):
        for q in range(num_qubits):
            ops.append(Gate(rotation, (q,), SlotAngle(WEIGHT, layer * num_qubits + q)))
        if num_qubits >= 2:
            ops.extend(_cnot_ring(num_qubits))
    return ParameterizedCircuit(num_qubits, tuple(ops),
                                num_weight_slots=num_layers * num_qubits)


def n_local(num_qubits: int, num_layers: int) -> ParameterizedCircuit:
    """RY rotations plus a CNOT ring per layer, with a final RY rotation layer.

    Dropping the trailing rotation layer reproduces
    ``basic_entangler_layers(num_qubits, num_layers, "RY")`` gate for gate.
    """
    if num_layers < 1:
        raise CircuitError("num_layers must be >= 1")
    ops: list[Gate] = []
    for layer in range(num_layers):
        for q in range(num_qubits):
            ops.append(Gate("RY", (q,), SlotAngle(WEIGHT, layer * num_qubits + q)))
        if num_qubits >= 2:
            ops.extend(_cnot_ring(num_qubits))
    for q in range(num_qubits):
        ops.append(Gate("RY", (q,), SlotAngle(WEIGHT, num_layers * num_qubits + q)))
    return ParameterizedCircuit(num_qubits, tuple(ops),
                                num_weight_slots=(num_layers + 1) * num_qubits)


# --------------------------------------------------------------------------
# Measurement primitives
# --------------------------------------------------------------------------

def sampler_probabilities(state: StateVector) -> np.ndarray:
    """Computational-basis probabilities |<k|psi>|^2."""
    return np.abs(state.amplitudes) ** 2


def pauli_z_expectation(state: StateVector, qubit: int) -> float:
    """<Z_q>: probability mass with bit q = 0 minus mass with bit q = 1."""
    if not 0 <= qubit < state.num_qubits:
        raise CircuitError(f"qubit {qubit} out of range for {state.num_qubits}-qubit state")
    return float(all_z_from_amplitudes(state.amplitudes[None, :], state.num_qubits)[0, qubit])


def measure_all_z(state: StateVector) -> np.ndarray:
    """Vector of <Z_q> for every qubit, qubit 0 first."""
    return all_z_from_amplitudes(state.amplitudes[None, :], state.num_qubits)[0]


def all_z_from_amplitudes(amps: np.ndarray, num_qubits: int) -> np.ndarray:
    """Per-qubit <Z> for a (B, 2**n) amplitude batch; returns (B, n) floats."""
    probs = np.abs(amps) ** 2
    batch = probs.shape[0]
    probs = probs.reshape((batch,) + (2,) * num_qubits)
    out = np.empty((batch, num_qubits))
    for q in range(num_qubits):
        axes = tuple(i + 1 for i in range(num_qubits) if i != q)
        marg = probs.sum(axis=axes) if axes else probs
        out[:, q] = marg[:, 0] - marg[:, 1]
    return out
