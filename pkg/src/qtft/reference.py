"""Slow reference evaluations used by the gradcheck diagnostics.

The circuit reference builds each gate's full 2^n x 2^n matrix from its
definition (elementwise over basis indices, qubit 0 as the most
significant bit) and multiplies, so it exercises none of the simulator's
tensor kernels.  Gradients are probed with central finite differences.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .quantum_sim import ParameterizedCircuit, bind_angles


def _bit(index: int, qubit: int, n: int) -> int:
    return (index >> (n - 1 - qubit)) & 1


def dense_gate_matrix(kind: str, targets: tuple[int, ...], angle: float, n: int) -> np.ndarray:
    """Full-space matrix of one gate, built entry by entry."""
    dim = 2 ** n
    u = np.zeros((dim, dim), dtype=complex)
    if kind in ("H", "RX", "RY", "RZ", "PHASE"):
        q = targets[0]
        if kind == "H":
            m = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
        elif kind == "RX":
            c, s = math.cos(angle / 2), math.sin(angle / 2)
            m = np.array([[c, -1j * s], [-1j * s, c]])
        elif kind == "RY":
            c, s = math.cos(angle / 2), math.sin(angle / 2)
            m = np.array([[c, -s], [s, c]], dtype=complex)
        elif kind == "RZ":
            m = np.diag([cmath.exp(-0.5j * angle), cmath.exp(0.5j * angle)])
        else:
            m = np.diag([1.0, cmath.exp(1j * angle)])
        for i in range(dim):
            for j in range(dim):
                if (i ^ j) & ~(1 << (n - 1 - q)) == 0:
                    u[i, j] = m[_bit(i, q, n), _bit(j, q, n)]
        return u
    if kind == "CNOT":
        control, target = targets
        for j in range(dim):
            i = j ^ (1 << (n - 1 - target)) if _bit(j, control, n) else j
            u[i, j] = 1.0
        return u
    if kind == "CRZ":
        control, target = targets
        for j in range(dim):
            if _bit(j, control, n):
                sign = 1.0 if _bit(j, target, n) else -1.0
                u[j, j] = cmath.exp(0.5j * sign * angle)
            else:
                u[j, j] = 1.0
        return u
    raise ValueError(f"unknown gate kind {kind!r}")


def dense_run(circuit: ParameterizedCircuit, features=(), weights=()) -> np.ndarray:
    """Amplitudes of the circuit acting on |0...0> via dense matrix products."""
    angles = bind_angles(circuit, features, weights)
    state = np.zeros(2 ** circuit.num_qubits, dtype=complex)
    state[0] = 1.0
    for g, a in zip(circuit.ops, angles):
        state = dense_gate_matrix(g.kind, g.targets, 0.0 if np.isnan(a) else a,
                                  circuit.num_qubits) @ state
    return state


def central_difference(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central finite-difference gradient of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        out.flat[i] = (f(xp) - f(xm)) / (2 * h)
    return out


def grad_deviation(analytic: np.ndarray, numeric: np.ndarray,
                   abs_tol: float = 1e-5, rel_tol: float = 1e-4) -> float:
    """Worst excess of |analytic - numeric| over max(abs_tol, rel_tol*|numeric|).

    Values <= 1 mean every coordinate is inside tolerance.
    """
    analytic = np.asarray(analytic, dtype=float).reshape(-1)
    numeric = np.asarray(numeric, dtype=float).reshape(-1)
    denom = np.maximum(abs_tol, rel_tol * np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0
