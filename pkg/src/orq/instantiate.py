"""Native gate-set translation via parameterized templates.

Every non-native 1-qubit gate is reduced to U3 Euler angles, then expanded
into one of two supported native families:

  family A: {RZ, SX}   five-element RZ.SX.RZ.SX.RZ ladder
  family B: {RX, RZ}   same ladder with RX(pi/2) in place of SX

with shorter tiers when the U3 theta makes them exact (diagonal -> one RZ,
half-turn theta -> three elements). The angle-shift constants are verified by
a per-family registration self-test on first use, and every expanded gate is
re-checked against its target matrix; a failed check falls back to a numeric
solve of the same pattern. Global phase is accumulated as one scalar, never
materialized as a gate.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .backend import DeviceProfile
from .circuit import Circuit, Gate, GateKind, NonUnitaryInput, gate_matrix
from .numopt import minimize_multistart

_TOL = 1e-12
_PI = math.pi
_TWO_PI = 2.0 * math.pi


class UnsupportedNativeSet(Exception):
    """Profile's native set is outside the two supported 1q families or lacks CX."""


class ToleranceNotReached(Exception):
    def __init__(self, distance: float):
        super().__init__(f"best distance {distance:.3e} above tolerance")
        self.distance = distance


def zyz_decompose(u: np.ndarray) -> tuple[float, float, float]:
    """Angles (theta, phi, lam) with U3(theta, phi, lam) = u up to global phase.

    Canonical branch: theta in [0, pi]; lam = 0 when theta is 0 or pi.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise NonUnitaryInput("expected a 2x2 matrix")
    if np.max(np.abs(u @ u.conj().T - np.eye(2))) > 1e-9:
        raise NonUnitaryInput("matrix is not unitary within 1e-9")
    a00, a10 = abs(u[0, 0]), abs(u[1, 0])
    theta = 2.0 * math.atan2(a10, a00)
    if a10 < _TOL:  # diagonal: phases live in phi, lam = 0
        return 0.0, cmath.phase(u[1, 1] / u[0, 0]) % _TWO_PI, 0.0
    if a00 < _TOL:  # anti-diagonal
        return _PI, cmath.phase(-u[1, 0] / u[0, 1]) % _TWO_PI, 0.0
    g = cmath.phase(u[0, 0])
    phi = (cmath.phase(u[1, 0]) - g) % _TWO_PI
    lam = (cmath.phase(-u[0, 1]) - g) % _TWO_PI
    return theta, phi, lam


@dataclass(frozen=True)
class NativeTemplate:
    target: str
    native_sequence: tuple[tuple[str, str], ...]  # (gate kind, angle description)
    solver: str


_FAMILY_A = "rz_sx"
_FAMILY_B = "rx_rz"


def native_templates(family: str) -> list[NativeTemplate]:
    half = "sx" if family == _FAMILY_A else "rx(pi/2)"
    return [
        NativeTemplate("u3 diagonal", (("rz", "phi+lam"),), "analytic"),
        NativeTemplate("u3 half-turn", (("rz", "lam-pi/2"), (half, ""), ("rz", "phi+pi/2")), "analytic"),
        NativeTemplate("u3 generic",
                       (("rz", "lam"), (half, ""), ("rz", "theta+pi"), (half, ""), ("rz", "phi+pi")),
                       "analytic"),
        NativeTemplate("sx", ((half, ""),), "analytic"),
        NativeTemplate("swap", (("cx", ""), ("cx", "reversed"), ("cx", "")), "analytic"),
    ]


def _pick_family(p: DeviceProfile) -> str:
    natives = p.native_gates
    if GateKind.CX not in natives:
        raise UnsupportedNativeSet("CX must be native; SWAP alone cannot express it")
    if GateKind.RZ in natives and GateKind.SX in natives:
        return _FAMILY_A
    if GateKind.RX in natives and GateKind.RZ in natives:
        return _FAMILY_B
    raise UnsupportedNativeSet("1q natives must include {rz, sx} or {rx, rz}")


def _half_gate(q: int, family: str) -> Gate:
    return Gate.sx(q) if family == _FAMILY_A else Gate.rx(q, _PI / 2)


def _expand_u3(q: int, theta: float, phi: float, lam: float, family: str) -> list[Gate]:
    """Native sequence for U3(theta, phi, lam) on qubit q, first gate applied first."""
    t = theta % _TWO_PI
    if t < _TOL or _TWO_PI - t < _TOL:
        return [Gate.rz(q, phi + lam)]
    if abs(t - _PI / 2) < _TOL:
        return [Gate.rz(q, lam - _PI / 2), _half_gate(q, family), Gate.rz(q, phi + _PI / 2)]
    if abs(t - 3 * _PI / 2) < _TOL:
        # U3(3pi/2, phi, lam) = -U3(pi/2, phi+pi, lam+pi)
        return [Gate.rz(q, lam + _PI / 2), _half_gate(q, family), Gate.rz(q, phi + 3 * _PI / 2)]
    return [Gate.rz(q, lam), _half_gate(q, family), Gate.rz(q, theta + _PI),
            _half_gate(q, family), Gate.rz(q, phi + _PI)]


def _seq_matrix_1q(gates: Sequence[Gate]) -> np.ndarray:
    m = np.eye(2, dtype=complex)
    for g in gates:
        m = gate_matrix(g) @ m
    return m


def _phase_if_proportional(seq_m: np.ndarray, target_m: np.ndarray, d: int) -> complex | None:
    s = np.vdot(seq_m, target_m) / d  # tr(seq^dagger target) / d
    if abs(abs(s) - 1.0) > 1e-9:
        return None
    return s / abs(s)


_VERIFIED_FAMILIES: set[str] = set()


def _verify_family(family: str) -> None:
    if family in _VERIFIED_FAMILIES:
        return
    thetas = (0.0, _PI / 2, 1.234, _PI, 3 * _PI / 2, _TWO_PI, 3.9)
    for theta in thetas:
        for phi in (0.0, 0.7, 4.0):
            for lam in (0.0, 2.1):
                target = gate_matrix(Gate.u3(0, theta, phi, lam))
                seq = _expand_u3(0, theta, phi, lam, family)
                if _phase_if_proportional(_seq_matrix_1q(seq), target, 2) is None:
                    raise AssertionError(f"native template self-test failed for {family}")
    swap_seq = (Gate.cx(0, 1), Gate.cx(1, 0), Gate.cx(0, 1))
    from .circuit import unitary
    if np.max(np.abs(unitary(Circuit(2, swap_seq)) - gate_matrix(Gate.swap(0, 1)))) > 1e-12:
        raise AssertionError("native template self-test failed for swap")
    _VERIFIED_FAMILIES.add(family)


def instantiate_numeric(pattern: Sequence[tuple[GateKind, tuple[int, ...], tuple[float | None, ...]]],
                        target: np.ndarray, tol: float = 1e-7, seed: int = 0,
                        restarts: int = 8, max_iters: int = 500) -> np.ndarray:
    """Solve the free angles of a native pattern so it matches target up to phase.

    Pattern elements are (kind, qubits, params) with None marking a free angle.
    Raises ToleranceNotReached (carrying the best distance) when the pattern
    cannot represent the target within tol.
    """
    target = np.asarray(target, dtype=complex)
    if target.shape == (2, 2):
        n = 1
    elif target.shape == (4, 4):
        n = 2
    else:
        raise ValueError("target must be 2x2 or 4x4")
    d = target.shape[0]
    free: list[tuple[int, int]] = []
    for gi, (_, qubits, params) in enumerate(pattern):
        if any(q >= n for q in qubits):
            raise ValueError("pattern qubit out of range for target size")
        for pi_, v in enumerate(params):
            if v is None:
                free.append((gi, pi_))

    def build(vec: np.ndarray) -> np.ndarray:
        filled = []
        at = 0
        for gi, (kind, qubits, params) in enumerate(pattern):
            vals = []
            for pi_, v in enumerate(params):
                if v is None:
                    vals.append(float(vec[at]))
                    at += 1
                else:
                    vals.append(v)
            filled.append(Gate(kind, qubits, tuple(vals)))
        from .circuit import unitary
        return unitary(Circuit(n, tuple(filled)))

    def f_batch(batch: np.ndarray) -> np.ndarray:
        out = np.empty(batch.shape[0])
        for i in range(batch.shape[0]):
            m = build(batch[i])
            out[i] = 1.0 - abs(np.vdot(m, target)) / d
        return out

    res = minimize_multistart(f_batch, len(free), restarts=restarts,
                              max_iters=max_iters, tol=tol, seed=seed)
    if res.value > tol:
        raise ToleranceNotReached(res.value)
    return res.params


def _numeric_fallback_1q(q: int, target_m: np.ndarray, family: str, seed: int) -> list[Gate]:
    kind_half = GateKind.SX if family == _FAMILY_A else GateKind.RX
    half_params: tuple[float | None, ...] = () if family == _FAMILY_A else (_PI / 2,)
    pattern = [
        (GateKind.RZ, (0,), (None,)),
        (kind_half, (0,), half_params),
        (GateKind.RZ, (0,), (None,)),
        (kind_half, (0,), half_params),
        (GateKind.RZ, (0,), (None,)),
    ]
    params = instantiate_numeric(pattern, target_m, tol=1e-9, seed=seed)
    out = []
    at = 0
    for kind, _, ps in pattern:
        vals = tuple(float(params[at + i]) if v is None else v for i, v in enumerate(ps))
        at += sum(1 for v in ps if v is None)
        out.append(Gate(kind, (q,), vals))
    return out


def _merge_rotations(gates: Sequence[Gate]) -> tuple[list[Gate], complex]:
    """Merge chain-adjacent same-axis rotations until fixpoint; dropping an
    identity rotation can make two more rotations adjacent, so one pass is
    not enough. Every pass strictly shrinks the list or leaves it unchanged."""
    out = list(gates)
    phase = 1.0 + 0.0j
    while True:
        merged, p = _merge_rotations_once(out)
        phase *= p
        if merged == out:
            return merged, phase
        out = merged


def _merge_rotations_once(gates: Sequence[Gate]) -> tuple[list[Gate], complex]:
    """Merge same-axis rotations in place (at the earlier slot, preserving
    list order) and drop rotations that became identity up to phase."""
    mergeable = (GateKind.RZ, GateKind.RX, GateKind.RY)
    slots: list[Gate | None] = []
    last_on: dict[int, int] = {}
    for g in gates:
        if len(g.qubits) == 1 and g.kind in mergeable:
            q = g.qubits[0]
            j = last_on.get(q)
            if j is not None and slots[j] is not None and slots[j].kind is g.kind:
                slots[j] = Gate(g.kind, (q,), (slots[j].params[0] + g.params[0],))
                continue
        slots.append(g)
        for q in g.qubits:
            last_on[q] = len(slots) - 1

    out: list[Gate] = []
    phase = 1.0 + 0.0j
    for g in slots:
        if g.kind in mergeable:
            m = gate_matrix(g)
            tr = m[0, 0] + m[1, 1]
            if 1.0 - abs(tr) / 2.0 < _TOL:
                phase *= tr / abs(tr)
                continue
        out.append(g)
    return out, phase


def translate_with_phase(c: Circuit, p: DeviceProfile, merge: bool = True) -> tuple[Circuit, complex]:
    """Translate to the native set; unitary(c) = phase * unitary(result)."""
    family = _pick_family(p)
    _verify_family(family)
    natives = p.native_gates
    out: list[Gate] = []
    phase = 1.0 + 0.0j
    for gi, g in enumerate(c.gates):
        if g.kind in natives:
            out.append(g)
            continue
        if g.kind is GateKind.SWAP:
            a, b = g.qubits
            out.extend((Gate.cx(a, b), Gate.cx(b, a), Gate.cx(a, b)))
            continue
        if g.kind is GateKind.CX:
            raise UnsupportedNativeSet("CX must be native; SWAP alone cannot express it")
        q = g.qubits[0]
        target_m = gate_matrix(g)
        if g.kind is GateKind.SX and family == _FAMILY_B:
            seq = [Gate.rx(q, _PI / 2)]
        else:
            if g.kind is GateKind.U3:
                theta, phi, lam = g.params
            else:
                theta, phi, lam = zyz_decompose(target_m)
            seq = _expand_u3(q, theta, phi, lam, family)
        g_phase = _phase_if_proportional(_seq_matrix_1q(seq), target_m, 2)
        if g_phase is None:  # analytic tier missed; solve the pattern numerically
            seq = _numeric_fallback_1q(q, target_m, family, seed=gi)
            g_phase = _phase_if_proportional(_seq_matrix_1q(seq), target_m, 2)
            if g_phase is None:
                raise AssertionError("numeric fallback produced a non-matching sequence")
        phase *= g_phase
        out.extend(seq)
    if merge:
        out, merge_phase = _merge_rotations(out)
        phase *= merge_phase
    for g in out:
        if g.kind not in natives:
            raise AssertionError(f"non-native {g.kind.value} survived translation")
    return c.with_gates(out), phase


def translate_to_native(c: Circuit, p: DeviceProfile, merge: bool = True) -> Circuit:
    return translate_with_phase(c, p, merge)[0]
