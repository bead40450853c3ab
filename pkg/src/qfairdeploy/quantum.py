"""Complex linear algebra for circuits: gate semantics, noiseless statevector
and density-matrix evolution, the depolarizing channel, measurement, and the
distance metrics used by the fairness analysis.

All functions are pure; arrays returned are freshly allocated. Basis-index
convention follows circuits.py (qubit 0 = most significant bit).
"""
from __future__ import annotations

import math

import numpy as np

from .circuits import Circuit, Gate, GateKind

STATEVECTOR_QUBIT_CAP = 12
DENSITY_QUBIT_CAP = 8

_INV_SQRT2 = 1.0 / math.sqrt(2.0)

_FIXED_1Q = {
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    GateKind.Z: np.array([[1, 0], [0, -1]], dtype=complex),
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=complex) * _INV_SQRT2,
}

_CNOT = np.array(
    [[1, 0, 0, 0],
     [0, 1, 0, 0],
     [0, 0, 0, 1],
     [0, 0, 1, 0]],
    dtype=complex,
)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array(
        [[c, -np.exp(1j * lam) * s],
         [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]],
        dtype=complex,
    )


def gate_matrix(g: Gate) -> np.ndarray:
    """Unitary of a single gate on its own qubits (2x2 or 4x4)."""
    k = g.kind
    if k in _FIXED_1Q:
        return _FIXED_1Q[k]
    if k is GateKind.RX:
        t = g.params[0] / 2.0
        return np.array([[math.cos(t), -1j * math.sin(t)], [-1j * math.sin(t), math.cos(t)]])
    if k is GateKind.RY:
        t = g.params[0] / 2.0
        return np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]], dtype=complex)
    if k is GateKind.RZ:
        t = g.params[0] / 2.0
        return np.array([[np.exp(-1j * t), 0], [0, np.exp(1j * t)]])
    if k is GateKind.U2:
        return u3_matrix(math.pi / 2.0, *g.params)
    if k is GateKind.U3:
        return u3_matrix(*g.params)
    if k is GateKind.CNOT:
        return _CNOT
    if k is GateKind.RZZ:
        t = g.params[0] / 2.0
        e_m, e_p = np.exp(-1j * t), np.exp(1j * t)
        return np.diag([e_m, e_p, e_p, e_m])
    raise ValueError(f"no matrix for {k}")


def zero_state(num_qubits: int) -> np.ndarray:
    state = np.zeros(2**num_qubits, dtype=complex)
    state[0] = 1.0
    return state


def _apply_matrix(tensor: np.ndarray, mat: np.ndarray, axes: tuple[int, ...], n_axes: int) -> np.ndarray:
    """Apply `mat` (2^k x 2^k) to the given axes of a [2]*n_axes tensor."""
    k = len(axes)
    m = mat.reshape([2] * (2 * k))
    # tensordot contracts mat's column indices with the state's target axes,
    # placing the result's row indices first; move them back.
    out = np.tensordot(m, tensor, axes=(tuple(range(k, 2 * k)), axes))
    return np.moveaxis(out, tuple(range(k)), axes)


def apply_gate(state: np.ndarray, g: Gate) -> np.ndarray:
    """Act with a gate on a statevector; qubit validity checked by caller shape."""
    n = int(round(math.log2(state.shape[0])))
    if any(q >= n for q in g.qubits):
        raise ValueError(f"gate {g} out of range for {n} qubits")
    tensor = state.reshape([2] * n)
    tensor = _apply_matrix(tensor, gate_matrix(g), g.qubits, n)
    return tensor.reshape(-1)


def simulate_state(circuit: Circuit, initial: np.ndarray | None = None) -> np.ndarray:
    """Noiseless statevector after the circuit, starting from |0...0> by default."""
    if circuit.num_qubits > STATEVECTOR_QUBIT_CAP:
        raise ValueError(f"{circuit.num_qubits} qubits exceeds the {STATEVECTOR_QUBIT_CAP}-qubit cap")
    state = zero_state(circuit.num_qubits) if initial is None else np.asarray(initial, dtype=complex).copy()
    if state.shape != (2**circuit.num_qubits,):
        raise ValueError("initial state dimension mismatch")
    n = circuit.num_qubits
    tensor = state.reshape([2] * n)
    for g in circuit.gates:
        tensor = _apply_matrix(tensor, gate_matrix(g), g.qubits, n)
    return tensor.reshape(-1)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Full unitary of the circuit (right-to-left product of gate matrices)."""
    n = circuit.num_qubits
    if n > STATEVECTOR_QUBIT_CAP:
        raise ValueError(f"{n} qubits exceeds the {STATEVECTOR_QUBIT_CAP}-qubit cap")
    dim = 2**n
    # evolve all basis columns at once: row index split into qubit axes
    u = np.eye(dim, dtype=complex).reshape([2] * n + [dim])
    for g in circuit.gates:
        u = _apply_matrix(u, gate_matrix(g), g.qubits, n)
    return u.reshape(dim, dim)


# --- density matrices and channels ------------------------------------------


def pure_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    return np.outer(state, state.conj())


def evolve_density(rho: np.ndarray, g: Gate, num_qubits: int) -> np.ndarray:
    """rho -> G rho G^dagger with G embedded on the gate's qubits."""
    t = rho.reshape([2] * (2 * num_qubits))
    m = gate_matrix(g)
    t = _apply_matrix(t, m, g.qubits, 2 * num_qubits)
    col_axes = tuple(q + num_qubits for q in g.qubits)
    t = _apply_matrix(t, m.conj(), col_axes, 2 * num_qubits)
    dim = 2**num_qubits
    return t.reshape(dim, dim)


def depolarize(rho: np.ndarray, p: float) -> np.ndarray:
    """Mix toward the maximally mixed state: (1-p) rho + p I/2^n."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing rate {p} outside [0, 1]")
    dim = rho.shape[0]
    return (1.0 - p) * rho + (p / dim) * np.eye(dim, dtype=complex)


def validate_density(rho: np.ndarray, tol: float = 1e-9) -> None:
    """Raise unless rho is Hermitian, unit-trace, and positive within tol."""
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise ValueError("density matrix not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError("density matrix trace != 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("density matrix has a negative eigenvalue")


def assert_unitary(u: np.ndarray, tol: float = 1e-9) -> None:
    dim = u.shape[0]
    if np.abs(u.conj().T @ u - np.eye(dim)).max() > tol:
        raise ValueError("matrix is not unitary within tolerance")


# --- measurement -------------------------------------------------------------


def _marginal(probs_full: np.ndarray, qubits: tuple[int, ...], num_qubits: int) -> np.ndarray:
    """Marginal over `qubits`, outcome bits ordered as listed (first = MSB)."""
    t = probs_full.reshape([2] * num_qubits)
    keep = list(qubits)
    drop = tuple(i for i in range(num_qubits) if i not in keep)
    if drop:
        t = t.sum(axis=drop)
    # after summing, remaining axes are the kept qubits in ascending order
    order = [sorted(keep).index(q) for q in keep]
    return t.transpose(order).reshape(-1)


def _check_qubit_subset(qubits, num_qubits) -> tuple[int, ...]:
    qs = tuple(qubits)
    if not qs:
        raise ValueError("empty qubit list")
    if len(set(qs)) != len(qs) or any(q < 0 or q >= num_qubits for q in qs):
        raise ValueError(f"invalid qubit subset {qs} for {num_qubits} qubits")
    return qs


def measure(
    state: np.ndarray,
    qubits,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Outcome distribution over the listed qubits.

    `state` may be a statevector (1-d) or a density matrix (2-d). With
    shots=None the exact Born-rule marginal is returned; otherwise empirical
    frequencies from `shots` samples drawn with `rng`.
    """
    state = np.asarray(state)
    if state.ndim == 1:
        n = int(round(math.log2(state.shape[0])))
        probs_full = np.abs(state) ** 2
    elif state.ndim == 2:
        n = int(round(math.log2(state.shape[0])))
        probs_full = np.real(np.diag(state)).copy()
    else:
        raise ValueError("state must be a vector or a square matrix")
    qs = _check_qubit_subset(qubits, n)
    probs = _marginal(probs_full, qs, n)
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    if shots is None:
        return probs
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if rng is None:
        raise ValueError("shot sampling needs an explicit rng")
    outcomes = rng.choice(probs.size, size=shots, p=probs)
    counts = np.bincount(outcomes, minlength=probs.size)
    return counts / float(shots)


# --- distances ----------------------------------------------------------------


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """(1/2) * sum of absolute eigenvalues of (a - b) for density matrices."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch in trace_distance")
    return 0.5 * float(np.abs(np.linalg.eigvalsh(a - b)).sum())


def trace_distance_pure(psi: np.ndarray, phi: np.ndarray) -> float:
    """Trace distance between pure states: sqrt(1 - |<psi|phi>|^2)."""
    if psi.shape != phi.shape:
        raise ValueError("dimension mismatch in trace_distance_pure")
    overlap = abs(np.vdot(psi, phi)) ** 2
    return math.sqrt(max(0.0, 1.0 - overlap))


def total_variation(d1: np.ndarray, d2: np.ndarray) -> float:
    """(1/2) * sum |d1_k - d2_k| over a shared outcome space."""
    d1, d2 = np.asarray(d1, dtype=float), np.asarray(d2, dtype=float)
    if d1.shape != d2.shape:
        raise ValueError("outcome spaces differ in total_variation")
    return 0.5 * float(np.abs(d1 - d2).sum())
