"""Gate-list circuit IR with derived metrics and dense unitaries.

Contains:
- GateKind: the supported gate alphabet
- Gate: immutable gate instance (kind, qubits, params)
- Circuit: immutable gate list over a fixed qubit count
- depth / metrics: ASAP layering and counting
- unitary / equiv_up_to_phase: dense simulation (n <= 10) and
  global-phase-invariant comparison

Bit convention: qubit 0 is the least significant bit of the basis index.
Angles are canonicalized into [0, 4*pi) at construction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

QUBIT_CAP = 10
TWO_TURNS = 4.0 * math.pi


class QubitCapExceeded(Exception):
    """Dense simulation requested above the qubit cap."""


class DimensionMismatch(Exception):
    """Operands of an equivalence check have different shapes."""


class NonUnitaryInput(Exception):
    """A matrix that must be unitary is not, within tolerance."""


class GateKind(enum.Enum):
    H = "h"
    X = "x"
    Y = "y"
    Z = "z"
    S = "s"
    SDG = "sdg"
    T = "t"
    TDG = "tdg"
    SX = "sx"
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    U3 = "u3"
    CX = "cx"
    SWAP = "swap"

    @property
    def num_qubits(self) -> int:
        return 2 if self in (GateKind.CX, GateKind.SWAP) else 1

    @property
    def num_params(self) -> int:
        if self is GateKind.U3:
            return 3
        if self in (GateKind.RX, GateKind.RY, GateKind.RZ):
            return 1
        return 0


def canonical_angle(a: float) -> float:
    """Map an angle into [0, 4*pi). Rotations here are 4*pi periodic."""
    if not math.isfinite(a):
        raise ValueError(f"angle must be finite, got {a!r}")
    a = math.fmod(a, TWO_TURNS)
    if a < 0.0:
        a += TWO_TURNS
    if a >= TWO_TURNS:  # fmod rounding at the boundary
        a -= TWO_TURNS
    return a


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != self.kind.num_qubits:
            raise ValueError(f"{self.kind.value} takes {self.kind.num_qubits} qubits, got {len(self.qubits)}")
        if any(q < 0 for q in self.qubits):
            raise ValueError(f"negative qubit index in {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"{self.kind.value} operands must be distinct, got {self.qubits}")
        if len(self.params) != self.kind.num_params:
            raise ValueError(f"{self.kind.value} takes {self.kind.num_params} params, got {len(self.params)}")
        object.__setattr__(self, "params", tuple(canonical_angle(float(p)) for p in self.params))

    # one-line constructors
    @classmethod
    def h(cls, q: int) -> "Gate": return cls(GateKind.H, (q,))
    @classmethod
    def x(cls, q: int) -> "Gate": return cls(GateKind.X, (q,))
    @classmethod
    def y(cls, q: int) -> "Gate": return cls(GateKind.Y, (q,))
    @classmethod
    def z(cls, q: int) -> "Gate": return cls(GateKind.Z, (q,))
    @classmethod
    def s(cls, q: int) -> "Gate": return cls(GateKind.S, (q,))
    @classmethod
    def sdg(cls, q: int) -> "Gate": return cls(GateKind.SDG, (q,))
    @classmethod
    def t(cls, q: int) -> "Gate": return cls(GateKind.T, (q,))
    @classmethod
    def tdg(cls, q: int) -> "Gate": return cls(GateKind.TDG, (q,))
    @classmethod
    def sx(cls, q: int) -> "Gate": return cls(GateKind.SX, (q,))
    @classmethod
    def rx(cls, q: int, a: float) -> "Gate": return cls(GateKind.RX, (q,), (a,))
    @classmethod
    def ry(cls, q: int, a: float) -> "Gate": return cls(GateKind.RY, (q,), (a,))
    @classmethod
    def rz(cls, q: int, a: float) -> "Gate": return cls(GateKind.RZ, (q,), (a,))
    @classmethod
    def u3(cls, q: int, theta: float, phi: float, lam: float) -> "Gate":
        return cls(GateKind.U3, (q,), (theta, phi, lam))
    @classmethod
    def cx(cls, control: int, target: int) -> "Gate": return cls(GateKind.CX, (control, target))
    @classmethod
    def swap(cls, a: int, b: int) -> "Gate": return cls(GateKind.SWAP, (a, b))


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.num_qubits < 1:
            raise ValueError(f"num_qubits must be positive, got {self.num_qubits}")
        for g in self.gates:
            if any(q >= self.num_qubits for q in g.qubits):
                raise ValueError(f"gate {g.kind.value} on {g.qubits} exceeds register of {self.num_qubits}")

    def __len__(self) -> int:
        return len(self.gates)

    def with_gates(self, gates) -> "Circuit":
        return Circuit(self.num_qubits, tuple(gates))

    def appended(self, *gates: Gate) -> "Circuit":
        return Circuit(self.num_qubits, self.gates + tuple(gates))


@dataclass(frozen=True)
class Metrics:
    depth: int
    total_gates: int
    counts_by_kind: dict[GateKind, int] = field(compare=False)
    cx_count: int = 0
    two_qubit_count: int = 0


def depth(c: Circuit) -> int:
    """Longest dependency chain under ASAP layering."""
    level = [0] * c.num_qubits
    for g in c.gates:
        layer = max(level[q] for q in g.qubits) + 1
        for q in g.qubits:
            level[q] = layer
    return max(level, default=0)


def metrics(c: Circuit) -> Metrics:
    counts: dict[GateKind, int] = {}
    cx = two = 0
    for g in c.gates:
        counts[g.kind] = counts.get(g.kind, 0) + 1
        if g.kind is GateKind.CX:
            cx += 1
        if g.kind.num_qubits == 2:
            two += 1
    return Metrics(
        depth=depth(c),
        total_gates=len(c.gates),
        counts_by_kind=counts,
        cx_count=cx,
        two_qubit_count=two,
    )


_INV_SQRT2 = 1.0 / math.sqrt(2.0)

_FIXED_1Q: dict[GateKind, np.ndarray] = {
    GateKind.H: np.array([[_INV_SQRT2, _INV_SQRT2], [_INV_SQRT2, -_INV_SQRT2]], dtype=complex),
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    GateKind.Z: np.array([[1, 0], [0, -1]], dtype=complex),
    GateKind.S: np.array([[1, 0], [0, 1j]], dtype=complex),
    GateKind.SDG: np.array([[1, 0], [0, -1j]], dtype=complex),
    GateKind.T: np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=complex),
    GateKind.TDG: np.array([[1, 0], [0, np.exp(-1j * math.pi / 4)]], dtype=complex),
    GateKind.SX: 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex),
}

# sub-basis index for 2q matrices: first operand is the LSB
_CX_MAT = np.array(
    [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
)
_SWAP_MAT = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


def gate_matrix(g: Gate) -> np.ndarray:
    """Gate unitary in its own sub-basis (first operand = least significant bit)."""
    k = g.kind
    if k in _FIXED_1Q:
        return _FIXED_1Q[k].copy()
    if k is GateKind.RZ:
        (a,) = g.params
        return np.array([[np.exp(-0.5j * a), 0], [0, np.exp(0.5j * a)]], dtype=complex)
    if k is GateKind.RX:
        (a,) = g.params
        c, s = math.cos(a / 2), math.sin(a / 2)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if k is GateKind.RY:
        (a,) = g.params
        c, s = math.cos(a / 2), math.sin(a / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if k is GateKind.U3:
        t, p, l = g.params
        c, s = math.cos(t / 2), math.sin(t / 2)
        return np.array(
            [[c, -np.exp(1j * l) * s], [np.exp(1j * p) * s, np.exp(1j * (p + l)) * c]],
            dtype=complex,
        )
    if k is GateKind.CX:
        return _CX_MAT.copy()
    if k is GateKind.SWAP:
        return _SWAP_MAT.copy()
    raise ValueError(f"no matrix for {k}")


def _apply_to_matrix(u: np.ndarray, m: np.ndarray, qubits: tuple[int, ...], n: int) -> np.ndarray:
    """Left-multiply the embedded gate onto u without forming the full 2^n operator."""
    k = len(qubits)
    # row index axes: axis (n-1-q) carries the bit of qubit q
    tens = u.reshape((2,) * n + (u.shape[1],))
    axes = [n - 1 - q for q in qubits]
    # m sub-index has first operand as LSB: reshape to per-qubit axes,
    # output axes ordered to match `axes` (qubits[0] first)
    mk = m.reshape((2,) * (2 * k))
    if k == 1:
        out = np.tensordot(mk, tens, axes=([1], axes))
        out = np.moveaxis(out, 0, axes[0])
    else:
        # m indices: (out_q1, out_q0, in_q1, in_q0) after reshape of (t*2+c) packing
        mk = mk.transpose(1, 0, 3, 2)  # -> (out_q0, out_q1, in_q0, in_q1)
        out = np.tensordot(mk, tens, axes=([2, 3], axes))
        out = np.moveaxis(out, [0, 1], axes)
    return out.reshape(u.shape)


def unitary(c: Circuit) -> np.ndarray:
    """Dense circuit unitary. Gates apply in list order."""
    if c.num_qubits > QUBIT_CAP:
        raise QubitCapExceeded(f"{c.num_qubits} qubits exceeds cap of {QUBIT_CAP}")
    dim = 1 << c.num_qubits
    u = np.eye(dim, dtype=complex)
    for g in c.gates:
        u = _apply_to_matrix(u, gate_matrix(g), g.qubits, c.num_qubits)
    return u


def equiv_up_to_phase(u: np.ndarray, v: np.ndarray, tol: float = 1e-8) -> bool:
    """Global-phase-invariant comparison: 1 - |tr(u^dag v)| / d <= tol."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape or u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DimensionMismatch(f"shapes {u.shape} vs {v.shape}")
    d = u.shape[0]
    return 1.0 - abs(np.trace(u.conj().T @ v)) / d <= tol


def is_unitary(m: np.ndarray, tol: float = 1e-9) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) <= tol)
