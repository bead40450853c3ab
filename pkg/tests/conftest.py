import numpy as np
import pytest

from qfairdeploy.circuits import Circuit, Gate, GateKind


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-ish random unitary via QR with phase fixing."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_circuit(rng: np.random.Generator, num_qubits: int, num_gates: int) -> Circuit:
    """Random mix of 1-qubit rotations and CNOTs."""
    gates = []
    for _ in range(num_gates):
        if num_qubits >= 2 and rng.uniform() < 0.4:
            q1, q2 = rng.choice(num_qubits, size=2, replace=False)
            gates.append(Gate(GateKind.CNOT, (int(q1), int(q2))))
        else:
            kind = rng.choice([GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.U3, GateKind.H])
            q = int(rng.integers(0, num_qubits))
            nparams = {GateKind.U3: 3, GateKind.H: 0}.get(kind, 1)
            params = tuple(rng.uniform(0, 2 * np.pi, size=nparams))
            gates.append(Gate(kind, (q,), params))
    return Circuit(num_qubits, tuple(gates))


def random_state(rng: np.random.Generator, num_qubits: int) -> np.ndarray:
    v = rng.normal(size=2**num_qubits) + 1j * rng.normal(size=2**num_qubits)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
