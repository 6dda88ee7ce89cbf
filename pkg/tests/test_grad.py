import math

import numpy as np
import pytest

import oracles
from qtft import grad
from qtft.quantum_sim import (
    WEIGHT,
    CircuitError,
    Gate,
    LiteralAngle,
    ParameterizedCircuit,
    SlotAngle,
    angle_embedding,
    basic_entangler_layers,
    compose,
    measure_all_z,
    run_circuit,
    zz_feature_map,
)
from qtft.grad import (
    Node,
    backward,
    param,
    param_shift_partial,
    quantum_forward,
    sgd_step,
    shift_rule_jacobians,
)


def scalar(node):
    return float(node.value.reshape(-1)[0])


# ---------------------------------------------------------------- tape basics

def test_square_gradient():
    x = param([3.0])
    loss = grad.mul(x, x)
    backward(loss)
    np.testing.assert_allclose(x.grad, [6.0], atol=0)


def test_sigmoid_gradient_at_zero():
    x = param([0.0])
    backward(grad.sigmoid(x))
    np.testing.assert_allclose(x.grad, [0.25], atol=1e-15)


def test_two_sgd_steps_on_square():
    x = param([1.0])
    for _ in range(2):
        backward(grad.mul(x, x))
        sgd_step([x], 0.1)
    assert scalar(x) == pytest.approx(0.64, abs=1e-15)


def test_sgd_step_definition():
    x = param([1.0])
    x.grad = np.array([0.5])
    sgd_step([x], 0.1)
    assert scalar(x) == pytest.approx(0.95, abs=0)
    assert x.grad is None
    sgd_step([x], 0.1)  # zero grad leaves the value alone
    assert scalar(x) == pytest.approx(0.95, abs=0)


def test_backward_rejects_non_scalar():
    x = param([1.0, 2.0])
    with pytest.raises(ValueError):
        backward(grad.mul(x, x))


def test_fanout_accumulates():
    x = param([2.0])
    loss = grad.add(grad.mul(x, x), grad.scale(x, 3.0))  # x^2 + 3x -> 2x + 3
    backward(loss)
    np.testing.assert_allclose(x.grad, [7.0], atol=1e-15)


def test_gradient_linearity():
    x = param(np.array([0.3, -0.7, 1.1]))
    la = grad.mean_all(grad.mul(x, x))
    backward(la)
    ga = x.grad.copy()
    x.grad = None
    lb = grad.mean_all(grad.elu(x))
    backward(lb)
    gb = x.grad.copy()
    x.grad = None
    backward(grad.add(grad.mean_all(grad.mul(x, x)), grad.mean_all(grad.elu(x))))
    np.testing.assert_allclose(x.grad, ga + gb, atol=1e-12)


def test_bit_identical_determinism():
    def run():
        x = param(np.array([0.25, -1.5]))
        w = param(np.array([[0.3, -0.2], [0.7, 0.1]]))
        loss = grad.pinball(np.array([0.1, 0.2]),
                            grad.layer_norm(grad.elu(grad.matvec(w, x))), 0.3)
        backward(loss)
        return x.grad.copy(), w.grad.copy()

    (xa, wa), (xb, wb) = run(), run()
    assert np.array_equal(xa, xb) and np.array_equal(wa, wb)


# ------------------------------------------------------- classical op checks

@pytest.mark.parametrize("op", [grad.elu, grad.sigmoid, grad.tanh, grad.softmax,
                                grad.layer_norm])
def test_elementwise_ops_match_finite_differences(op, rng):
    x0 = rng.uniform(-2, 2, 5)
    x = param(x0)
    backward(grad.mean_all(op(x)))

    def f(v):
        return float(grad.mean_all(op(Node(v))).value[0])

    fd = oracles.central_difference(f, x0)
    assert oracles.grads_close(x.grad, fd)


def test_matrix_ops_match_finite_differences(rng):
    a0 = rng.uniform(-1, 1, (3, 2))
    b0 = rng.uniform(-1, 1, (2, 4))
    a, b = param(a0), param(b0)
    out = grad.softmax_rows(grad.matmul(a, b))
    backward(grad.mean_all(grad.row(out, 1)))

    def f_a(flat):
        m = grad.matmul(Node(flat.reshape(3, 2)), Node(b0))
        return float(grad.mean_all(grad.row(grad.softmax_rows(m), 1)).value[0])

    fd = oracles.central_difference(f_a, a0.reshape(-1))
    assert oracles.grads_close(a.grad.reshape(-1), fd)


def test_pinball_gradient(rng):
    y = rng.uniform(-1, 1, 6)
    p0 = rng.uniform(-1, 1, 6)
    p = param(p0)
    backward(grad.pinball(y, p, 0.7))

    def f(v):
        e = y - v
        return float(np.maximum(-0.3 * e, 0.7 * e).mean())

    fd = oracles.central_difference(f, p0)
    assert oracles.grads_close(p.grad, fd)


# ------------------------------------------------------------ parameter shift

def test_param_shift_ry_trivial_points():
    circ = ParameterizedCircuit(1, (Gate("RY", (0,), SlotAngle(WEIGHT, 0)),),
                                num_weight_slots=1)
    assert param_shift_partial(circ, [], [0.0], 0, "weight", 0) == pytest.approx(0.0, abs=1e-15)
    assert param_shift_partial(circ, [], [math.pi / 2], 0, "weight", 0) == pytest.approx(-1.0, abs=1e-12)


def test_param_shift_unused_slot_is_zero():
    circ = ParameterizedCircuit(1, (Gate("RY", (0,), SlotAngle(WEIGHT, 0)),),
                                num_weight_slots=3)
    assert param_shift_partial(circ, [], [0.3, 0.4, 0.5], 0, "weight", 2) == 0.0


def test_param_shift_matches_finite_difference(rng):
    for _ in range(8):
        circ, feats, wts = oracles.random_circuit(rng, max_qubits=3, max_depth=10)
        if any(g.kind == "CRZ" and not isinstance(g.angle, LiteralAngle)
               for g in circ.ops if g.angle is not None):
            continue
        q = int(rng.integers(0, circ.num_qubits))
        for slot in range(circ.num_weight_slots):
            got = param_shift_partial(circ, feats, wts, q, "weight", slot)

            def f(w):
                return measure_all_z(run_circuit(circ, feats, w))[q]

            fd = oracles.central_difference(f, wts)[slot]
            assert abs(got - fd) < 1e-5


def test_param_shift_rejects_crz_slots():
    circ = ParameterizedCircuit(2, (Gate("CRZ", (0, 1), SlotAngle(WEIGHT, 0)),),
                                num_weight_slots=1)
    with pytest.raises(CircuitError):
        param_shift_partial(circ, [], [0.5], 0, "weight", 0)


def test_param_shift_exact_via_richardson(rng):
    # two-term rule vs Richardson-extrapolated differences on 1-2 qubit circuits
    for n in (1, 2):
        enc = zz_feature_map(n)
        circ = compose(enc, basic_entangler_layers(n, 1, "RY"))
        feats = rng.uniform(-1, 1, n)
        wts = rng.uniform(-math.pi, math.pi, n)
        jf, jw = shift_rule_jacobians(circ, feats, wts)
        for q in range(n):
            def fw(w):
                return measure_all_z(run_circuit(circ, feats, w))[q]

            def ff(f):
                return measure_all_z(run_circuit(circ, f, wts))[q]

            for s in range(n):
                assert abs(jw[s, q] - oracles.richardson_difference(fw, wts, s)) < 1e-8
                assert abs(jf[s, q] - oracles.richardson_difference(ff, feats, s)) < 1e-8


# ------------------------------------------------------------- quantum nodes

def test_quantum_forward_identity_point():
    circ = angle_embedding(3, "RX")
    f = param(np.zeros(3))
    w = param(np.zeros(0))
    qn = quantum_forward(circ, f, w)
    np.testing.assert_allclose(qn.value, [1.0, 1.0, 1.0], atol=0)
    backward(grad.mean_all(qn))
    np.testing.assert_allclose(f.grad, np.zeros(3), atol=1e-15)


def test_quantum_forward_full_jacobian(rng):
    circ = compose(angle_embedding(2, "RX"), basic_entangler_layers(2, 2, "RY"))
    feats = rng.uniform(-1, 1, 2)
    wts = rng.uniform(-math.pi, math.pi, 4)
    jf, jw = shift_rule_jacobians(circ, feats, wts)
    for q in range(2):
        def fw(w):
            return measure_all_z(run_circuit(circ, feats, w))[q]

        def ff(f):
            return measure_all_z(run_circuit(circ, f, wts))[q]

        assert oracles.grads_close(jw[:, q], oracles.central_difference(fw, wts))
        assert oracles.grads_close(jf[:, q], oracles.central_difference(ff, feats))


def test_light_cone_excluded_weight_has_zero_gradient():
    # RY(w0) on qubit 1, no entanglement: <Z_0> cannot depend on w0
    circ = ParameterizedCircuit(2, (Gate("RY", (1,), SlotAngle(WEIGHT, 0)),),
                                num_weight_slots=1)
    assert param_shift_partial(circ, [], [1.234], 0, "weight", 0) == pytest.approx(0.0, abs=1e-15)


def test_quantum_node_invariants(rng):
    circ = compose(zz_feature_map(3), basic_entangler_layers(3, 2, "RY"))
    qn = quantum_forward(circ, param(rng.uniform(-1, 1, 3)),
                         param(rng.uniform(-math.pi, math.pi, 6)))
    assert qn.value.shape == (3,)
    assert np.all(np.abs(qn.value) <= 1 + 1e-12)
    assert qn.circuit is circ


# -------------------------------------------------- hybrid graph gradient check

def _random_hybrid_graph(rng):
    """Dense -> ELU -> quantum block -> sigmoid/softmax/layer-norm -> pinball."""
    n = int(rng.integers(2, 5))
    layers = int(rng.integers(1, 4))
    d_in = int(rng.integers(2, 5))
    enc = angle_embedding(n, "RX") if rng.random() < 0.5 else zz_feature_map(n)
    circ = compose(enc, basic_entangler_layers(n, layers, "RY"))
    leaves = {
        "W": param(rng.uniform(-1, 1, (n, d_in))),
        "b": param(rng.uniform(-1, 1, n)),
        "theta": param(rng.uniform(-math.pi, math.pi, circ.num_weight_slots)),
        "V": param(rng.uniform(-1, 1, (n, n))),
    }
    x0 = rng.uniform(-1, 1, d_in)
    y0 = rng.uniform(-1, 1, n)
    q = float(rng.uniform(0.2, 0.8))

    def loss_fn():
        h = grad.elu(grad.add(grad.matvec(leaves["W"], Node(x0)), leaves["b"]))
        z = quantum_forward(circ, h, leaves["theta"])
        mixed = grad.matvec(leaves["V"], z)
        out = grad.layer_norm(grad.add(grad.sigmoid(mixed), grad.softmax(mixed)))
        return grad.pinball(y0, out, q)

    return leaves, loss_fn


def test_hybrid_graphs_match_finite_differences():
    rng = np.random.default_rng(777)
    checked = 0
    for _ in range(100):
        leaves, loss_fn = _random_hybrid_graph(rng)
        loss = loss_fn()
        backward(loss)
        analytic = {k: v.grad.copy() if v.grad is not None else np.zeros_like(v.value)
                    for k, v in leaves.items()}
        for v in leaves.values():
            v.grad = None
        for name, leaf in leaves.items():
            base = leaf.value.copy()

            def f(flat, leaf=leaf, base=base):
                leaf.value = flat.reshape(base.shape)
                out = float(loss_fn().value[0])
                leaf.value = base
                return out

            assert oracles.verify_gradient(f, base.reshape(-1), analytic[name]), \
                f"leaf {name} disagrees with finite differences"
            checked += 1
    assert checked == 400
