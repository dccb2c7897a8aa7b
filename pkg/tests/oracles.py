"""Independent reference implementations used to pin expected test values.

Everything here is written against the declared conventions only (qubit 0 =
least significant basis bit, gates apply in list order) and deliberately
avoids the package's tensor-contraction code path: full operators are built
entry by entry from explicit bit arithmetic.
"""

import math

import numpy as np

from orq.circuit import Circuit, Gate, GateKind

SQ = 1.0 / math.sqrt(2.0)


def ref_matrix_1q(g: Gate) -> np.ndarray:
    k = g.kind
    if k is GateKind.H:
        return np.array([[SQ, SQ], [SQ, -SQ]], dtype=complex)
    if k is GateKind.X:
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if k is GateKind.Y:
        return np.array([[0, -1j], [1j, 0]], dtype=complex)
    if k is GateKind.Z:
        return np.diag([1.0, -1.0]).astype(complex)
    if k is GateKind.S:
        return np.diag([1.0, 1j]).astype(complex)
    if k is GateKind.SDG:
        return np.diag([1.0, -1j]).astype(complex)
    if k is GateKind.T:
        return np.diag([1.0, np.exp(1j * math.pi / 4)]).astype(complex)
    if k is GateKind.TDG:
        return np.diag([1.0, np.exp(-1j * math.pi / 4)]).astype(complex)
    if k is GateKind.SX:
        return 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex)
    if k is GateKind.RX:
        (a,) = g.params
        c, s = math.cos(a / 2), math.sin(a / 2)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if k is GateKind.RY:
        (a,) = g.params
        c, s = math.cos(a / 2), math.sin(a / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if k is GateKind.RZ:
        (a,) = g.params
        return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)]).astype(complex)
    if k is GateKind.U3:
        t, p, l = g.params
        c, s = math.cos(t / 2), math.sin(t / 2)
        return np.array(
            [[c, -np.exp(1j * l) * s], [np.exp(1j * p) * s, np.exp(1j * (p + l)) * c]],
            dtype=complex,
        )
    raise ValueError(k)


def ref_embed(g: Gate, n: int) -> np.ndarray:
    """Full 2^n operator for one gate, built from explicit bit arithmetic."""
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=complex)
    if g.kind is GateKind.CX:
        c, t = g.qubits
        for i in range(dim):
            j = i ^ (1 << t) if (i >> c) & 1 else i
            out[j, i] = 1.0
        return out
    if g.kind is GateKind.SWAP:
        a, b = g.qubits
        for i in range(dim):
            ba, bb = (i >> a) & 1, (i >> b) & 1
            j = i
            if ba != bb:
                j = i ^ (1 << a) ^ (1 << b)
            out[j, i] = 1.0
        return out
    m = ref_matrix_1q(g)
    q = g.qubits[0]
    for i in range(dim):
        bi = (i >> q) & 1
        for bo in range(2):
            j = (i & ~(1 << q)) | (bo << q)
            out[j, i] = m[bo, bi]
    return out


def ref_unitary(c: Circuit) -> np.ndarray:
    u = np.eye(1 << c.num_qubits, dtype=complex)
    for g in c.gates:
        u = ref_embed(g, c.num_qubits) @ u
    return u


def trace_phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - |tr(u^dagger v)| / dim: 0 iff u = phase * v."""
    return 1.0 - abs(np.trace(u.conj().T @ v)) / u.shape[0]


def phase_aligned_equal(u: np.ndarray, v: np.ndarray, tol: float = 1e-9) -> bool:
    """Entrywise equality after aligning on the largest element of v."""
    if u.shape != v.shape:
        return False
    idx = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    if abs(v[idx]) < 1e-12:
        return bool(np.max(np.abs(u)) < tol)
    phase = u[idx] / v[idx]
    if abs(abs(phase) - 1.0) > tol:
        return False
    return bool(np.max(np.abs(u - phase * v)) <= tol)


_KINDS_1Q = [
    GateKind.H, GateKind.X, GateKind.Y, GateKind.Z, GateKind.S, GateKind.SDG,
    GateKind.T, GateKind.TDG, GateKind.SX, GateKind.RX, GateKind.RY, GateKind.RZ,
    GateKind.U3,
]


def random_circuit(rng, n: int, num_gates: int, kinds=None, two_q=(GateKind.CX, GateKind.SWAP)) -> Circuit:
    """Seeded random circuit over the full alphabet (or a restricted one)."""
    kinds_1q = [k for k in (kinds or _KINDS_1Q) if k.num_qubits == 1]
    kinds_2q = [k for k in (kinds or two_q) if k.num_qubits == 2]
    gates = []
    for _ in range(num_gates):
        use_2q = n >= 2 and kinds_2q and rng.random() < 0.35
        if use_2q:
            k = kinds_2q[rng.integers(0, len(kinds_2q))]
            a, b = rng.choice(n, size=2, replace=False)
            gates.append(Gate(k, (int(a), int(b))))
        else:
            k = kinds_1q[rng.integers(0, len(kinds_1q))]
            q = int(rng.integers(0, n))
            params = tuple(rng.uniform(0.0, 4.0 * math.pi) for _ in range(k.num_params))
            gates.append(Gate(k, (q,), params))
    return Circuit(n, tuple(gates))
