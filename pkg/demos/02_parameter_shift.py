"""Parameter-shift gradients next to finite differences on one circuit block.

Run with ``python3 demos/02_parameter_shift.py``.
"""

import numpy as np

from qtft.grad import param, quantum_forward, backward, sgd_step, pinball, shift_rule_jacobians
from qtft.quantum_sim import (
    angle_embedding,
    basic_entangler_layers,
    compose,
    measure_all_z,
    run_circuit,
)

rng = np.random.default_rng(7)
circ = compose(angle_embedding(2, "RX"), basic_entangler_layers(2, 2, "RY"))
features = rng.uniform(-1, 1, 2)
weights = rng.uniform(-np.pi, np.pi, 4)

print("circuit: RX angle embedding -> 2 basic entangler layers, 2 qubits")
print("features:", features, " weights:", weights)

jf, jw = shift_rule_jacobians(circ, features, weights)
h = 1e-5
print("\nslot  qubit  parameter-shift   finite-difference")
for s in range(4):
    plus, minus = weights.copy(), weights.copy()
    plus[s] += h
    minus[s] -= h
    fd = (measure_all_z(run_circuit(circ, features, plus))
          - measure_all_z(run_circuit(circ, features, minus))) / (2 * h)
    for q in range(2):
        print(f"w{s}    Z_{q}    {jw[s, q]:+.10f}     {fd[q]:+.10f}")

print("\n== Training one block to hit a target expectation vector ==")
target = np.array([0.2, -0.4])
theta = param(weights.copy())
for step in range(60):
    loss = pinball(target, quantum_forward(circ, param(features), theta), 0.5)
    if step % 10 == 0:
        print(f"step {step:3d}: loss {float(loss.value[0]):.6f}")
    backward(loss)
    sgd_step([theta], 0.3)
final = measure_all_z(run_circuit(circ, features, theta.value))
print("reached <Z> =", np.round(final, 4), " target =", target)
