"""Device profiles, feasibility checking and fidelity estimation.

A profile is loaded from JSON with keys: name, num_qubits, coupling,
native_gates, default_err_1q, default_err_2q and optional err_1q / err_2q
overrides. Coupling is undirected; 2-qubit error keys are "i-j" with i < j.
Fidelity is the product of per-gate survival probabilities (1 - err).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources

from .circuit import Circuit, GateKind


class ProfileError(Exception):
    """Profile JSON violates the schema; message names the offending field."""


class QubitOutOfRange(Exception):
    """Circuit references a qubit the device does not have."""


_MNEMONICS = {k.value: k for k in GateKind}


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    num_qubits: int
    coupling: frozenset[tuple[int, int]]  # normalized i < j
    native_gates: frozenset[GateKind]
    default_err_1q: float
    default_err_2q: float
    err_1q: dict[GateKind, float] = field(default_factory=dict, compare=False)
    err_2q: dict[tuple[int, int], float] = field(default_factory=dict, compare=False)

    def coupled(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.coupling


class ViolationKind(enum.Enum):
    INSUFFICIENT_QUBITS = "InsufficientQubits"
    NON_NATIVE_GATE = "NonNativeGate"
    UNCOUPLED_PAIR = "UncoupledPair"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    detail: str


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple[Violation, ...]


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ProfileError(msg)


def _check_prob(value, path: str) -> float:
    _require(isinstance(value, (int, float)) and not isinstance(value, bool), f"{path}: expected number")
    v = float(value)
    _require(0.0 <= v < 1.0, f"{path}: probability {v} out of range [0, 1)")
    return v


def load_profile(source: str) -> DeviceProfile:
    """Parse profile JSON text. Raises ProfileError naming the bad field."""
    try:
        raw = json.loads(source)
    except json.JSONDecodeError as e:
        raise ProfileError(f"invalid JSON: {e}") from e
    _require(isinstance(raw, dict), "top level: expected object")

    allowed = {"name", "num_qubits", "coupling", "native_gates", "default_err_1q", "default_err_2q", "err_1q", "err_2q"}
    for key in raw:
        _require(key in allowed, f"{key}: unknown field")
    for key in ("name", "num_qubits", "coupling", "native_gates", "default_err_1q", "default_err_2q"):
        _require(key in raw, f"{key}: missing required field")

    _require(isinstance(raw["name"], str) and raw["name"], "name: expected non-empty string")
    _require(isinstance(raw["num_qubits"], int) and not isinstance(raw["num_qubits"], bool), "num_qubits: expected integer")
    n = raw["num_qubits"]
    _require(n >= 1, f"num_qubits: must be >= 1, got {n}")

    _require(isinstance(raw["coupling"], list), "coupling: expected list of pairs")
    coupling: set[tuple[int, int]] = set()
    for idx, edge in enumerate(raw["coupling"]):
        path = f"coupling[{idx}]"
        _require(isinstance(edge, list) and len(edge) == 2, f"{path}: expected [i, j]")
        i, j = edge
        _require(isinstance(i, int) and isinstance(j, int), f"{path}: expected integer qubits")
        _require(0 <= i < n and 0 <= j < n, f"{path}: qubit out of range for {n}-qubit device")
        _require(i != j, f"{path}: self-coupling")
        coupling.add((min(i, j), max(i, j)))

    _require(isinstance(raw["native_gates"], list) and raw["native_gates"], "native_gates: expected non-empty list")
    native: set[GateKind] = set()
    for idx, nm in enumerate(raw["native_gates"]):
        path = f"native_gates[{idx}]"
        _require(isinstance(nm, str), f"{path}: expected string")
        kind = _MNEMONICS.get(nm.lower())
        _require(kind is not None, f"{path}: unknown gate {nm!r}")
        native.add(kind)

    d1 = _check_prob(raw["default_err_1q"], "default_err_1q")
    d2 = _check_prob(raw["default_err_2q"], "default_err_2q")

    err_1q: dict[GateKind, float] = {}
    for nm, v in (raw.get("err_1q") or {}).items():
        path = f"err_1q[{nm!r}]"
        kind = _MNEMONICS.get(str(nm).lower())
        _require(kind is not None, f"{path}: unknown gate")
        _require(kind.num_qubits == 1, f"{path}: not a 1-qubit gate")
        err_1q[kind] = _check_prob(v, path)

    err_2q: dict[tuple[int, int], float] = {}
    for key, v in (raw.get("err_2q") or {}).items():
        path = f"err_2q[{key!r}]"
        parts = str(key).split("-")
        _require(len(parts) == 2 and all(s.isdigit() for s in parts), f"{path}: expected 'i-j' key")
        i, j = int(parts[0]), int(parts[1])
        _require(i < j, f"{path}: expected i < j")
        _require(j < n, f"{path}: qubit out of range for {n}-qubit device")
        err_2q[(i, j)] = _check_prob(v, path)

    return DeviceProfile(
        name=raw["name"],
        num_qubits=n,
        coupling=frozenset(coupling),
        native_gates=frozenset(native),
        default_err_1q=d1,
        default_err_2q=d2,
        err_1q=err_1q,
        err_2q=err_2q,
    )


BUNDLED_PROFILES = ("line5", "tee7", "grid9")


def load_bundled_profile(name: str) -> DeviceProfile:
    if name not in BUNDLED_PROFILES:
        raise ProfileError(f"no bundled profile {name!r}; have {', '.join(BUNDLED_PROFILES)}")
    text = resources.files("orq.profiles").joinpath(f"{name}.json").read_text()
    return load_profile(text)


def estimate_fidelity(c: Circuit, p: DeviceProfile) -> float:
    """Product of (1 - err) over gates. Uncoupled pairs still use the default rate."""
    f = 1.0
    for g in c.gates:
        if any(q >= p.num_qubits for q in g.qubits):
            raise QubitOutOfRange(f"gate on {g.qubits} exceeds device of {p.num_qubits} qubits")
        if g.kind.num_qubits == 1:
            f *= 1.0 - p.err_1q.get(g.kind, p.default_err_1q)
        else:
            edge = (min(g.qubits), max(g.qubits))
            f *= 1.0 - p.err_2q.get(edge, p.default_err_2q)
    return f


def check_feasibility(c: Circuit, p: DeviceProfile) -> FeasibilityReport:
    violations: list[Violation] = []
    if c.num_qubits > p.num_qubits:
        violations.append(Violation(
            ViolationKind.INSUFFICIENT_QUBITS,
            f"circuit needs {c.num_qubits} qubits, device has {p.num_qubits}",
        ))
    seen_kinds: set[GateKind] = set()
    for g in c.gates:
        if g.kind not in p.native_gates and g.kind not in seen_kinds:
            seen_kinds.add(g.kind)
            violations.append(Violation(
                ViolationKind.NON_NATIVE_GATE,
                f"{g.kind.value} not in native set",
            ))
    for i, g in enumerate(c.gates):
        if g.kind.num_qubits == 2 and not p.coupled(*g.qubits):
            a, b = min(g.qubits), max(g.qubits)
            violations.append(Violation(
                ViolationKind.UNCOUPLED_PAIR,
                f"gate {i}: ({a}, {b}) not a coupling edge",
            ))
    return FeasibilityReport(feasible=not violations, violations=tuple(violations))
