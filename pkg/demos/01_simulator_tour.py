"""Tour of the statevector simulator: gates, feature maps, measurements.

Run with ``python3 demos/01_simulator_tour.py``.
"""

import numpy as np

from qtft.quantum_sim import (
    Gate,
    angle_embedding,
    apply_gate,
    basic_entangler_layers,
    measure_all_z,
    n_local,
    pauli_z_expectation,
    run_circuit,
    sampler_probabilities,
    zero_state,
    zz_feature_map,
)

np.set_printoptions(precision=4, suppress=True)

print("== Single gates ==")
plus = apply_gate(zero_state(1), Gate("H", (0,)))
print("H|0>              :", plus.amplitudes)
bell = apply_gate(apply_gate(zero_state(2), Gate("H", (0,))), Gate("CNOT", (0, 1)))
print("CNOT(H|0> x |0>)  :", bell.amplitudes, " <- Bell state")
print("per-qubit <Z>     :", measure_all_z(bell))
print("basis probabilities:", sampler_probabilities(bell))

print("\n== Angle embedding ==")
circ = angle_embedding(1, "RY")
for theta in (0.0, np.pi / 3, np.pi / 2, np.pi):
    z = pauli_z_expectation(run_circuit(circ, [theta], []), 0)
    print(f"RY({theta:5.3f})|0>: <Z> = {z:+.4f}   cos(theta) = {np.cos(theta):+.4f}")

print("\n== ZZ feature map (2 qubits) ==")
zz = zz_feature_map(2)
print("gate sequence:", [(g.kind, g.targets) for g in zz.ops])
state = run_circuit(zz, [0.3, -0.7], [])
print("amplitudes for v = (0.3, -0.7):", state.amplitudes)

print("\n== Variational ansaetze ==")
be = basic_entangler_layers(3, 2, "RY")
nl = n_local(3, 2)
print(f"basic entangler: {be.num_weight_slots} trainable angles, {be.num_gates} gates")
print(f"n-local        : {nl.num_weight_slots} trainable angles, {nl.num_gates} gates")
print("n-local minus its final rotation layer reproduces the basic entangler:",
      nl.ops[:len(be.ops)] == be.ops)

rng = np.random.default_rng(0)
weights = rng.uniform(-np.pi, np.pi, nl.num_weight_slots)
print("random n-local <Z>:", measure_all_z(run_circuit(nl, [], weights)))
