"""Peephole rewrite engine with a learned rule-selection policy.

Rule catalog (verified unitary-preserving at registration, tol 1e-10):
  R1  H.H -> (nothing)            R7  S.S -> Z
  R2  X.X -> (nothing)            R8  H.X.H -> Z
  R3  CX.CX -> (nothing)          R9  H.Z.H -> X
  R4  RZ(a).RZ(b) -> RZ(a+b)      R10 zero-angle RX/RY/RZ -> (nothing)
  R5  RX(a).RX(b) -> RX(a+b)      R11 CX.X(ctrl).CX -> X.X
  R6  T.T -> S                    R12 commute-then-cancel (one-step lookahead)

Gates form a match window when they are consecutive in the subsequence of
gates touching the head gate's qubit support; replacing such a window at its
first index never reorders non-commuting gates, which a per-pair notion of
adjacency does not guarantee for multi-qubit windows (R11). R12 transposes a
list-adjacent commuting pair that shares a qubit, and only when the swap
enables an R1-R10 site that was not available before; the enabled rule is
applied in the same step, so every applied site strictly reduces gate count
and greedy rewriting terminates. Transpositions of gates with disjoint
supports never change any match window, so nothing is lost by requiring a
shared qubit.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .circuit import Circuit, Gate, GateKind, canonical_angle, equiv_up_to_phase, metrics, unitary

_ZERO_ANGLE_TOL = 1e-12
_TWO_TURNS = 4.0 * math.pi


class StaleSite(Exception):
    """Site no longer matches the circuit it is being applied to."""


def _is_zero_angle(a: float) -> bool:
    return a < _ZERO_ANGLE_TOL or _TWO_TURNS - a < _ZERO_ANGLE_TOL


@dataclass(frozen=True)
class RewriteSite:
    rule_id: str
    gate_indices: tuple[int, ...]


@dataclass(frozen=True)
class RewriteRule:
    rule_id: str
    arity: int  # distinct qubits a match touches
    head: Callable[[Gate], bool]
    rest: tuple[Callable[[Gate, Gate], bool], ...]  # each sees (window head, candidate)
    produce: Callable[[tuple[Gate, ...]], tuple[Gate, ...]]
    checks: tuple[tuple[tuple[Gate, ...], int], ...]  # (fragment, qubit count) self-tests

    @property
    def window(self) -> int:
        return 1 + len(self.rest)


def _same(kind: GateKind) -> Callable[[Gate, Gate], bool]:
    return lambda g0, g: g.kind is kind and g.qubits == g0.qubits


def _merge_rotation(kind: GateKind):
    def produce(w: tuple[Gate, ...]) -> tuple[Gate, ...]:
        total = canonical_angle(w[0].params[0] + w[1].params[0])
        return (Gate(kind, w[0].qubits, (total,)),)
    return produce


_RULES: list[RewriteRule] = [
    RewriteRule(
        "R1", 1,
        head=lambda g: g.kind is GateKind.H,
        rest=(_same(GateKind.H),),
        produce=lambda w: (),
        checks=(((Gate.h(0), Gate.h(0)), 1),),
    ),
    RewriteRule(
        "R2", 1,
        head=lambda g: g.kind is GateKind.X,
        rest=(_same(GateKind.X),),
        produce=lambda w: (),
        checks=(((Gate.x(0), Gate.x(0)), 1),),
    ),
    RewriteRule(
        "R3", 2,
        head=lambda g: g.kind is GateKind.CX,
        rest=(lambda g0, g: g.kind is GateKind.CX and g.qubits == g0.qubits,),
        produce=lambda w: (),
        checks=(((Gate.cx(0, 1), Gate.cx(0, 1)), 2),),
    ),
    RewriteRule(
        "R4", 1,
        head=lambda g: g.kind is GateKind.RZ,
        rest=(_same(GateKind.RZ),),
        produce=_merge_rotation(GateKind.RZ),
        checks=(
            ((Gate.rz(0, 0.4), Gate.rz(0, 1.1)), 1),
            ((Gate.rz(0, 0.4), Gate.rz(0, -0.4)), 1),
        ),
    ),
    RewriteRule(
        "R5", 1,
        head=lambda g: g.kind is GateKind.RX,
        rest=(_same(GateKind.RX),),
        produce=_merge_rotation(GateKind.RX),
        checks=(((Gate.rx(0, 2.0), Gate.rx(0, 0.7)), 1),),
    ),
    RewriteRule(
        "R6", 1,
        head=lambda g: g.kind is GateKind.T,
        rest=(_same(GateKind.T),),
        produce=lambda w: (Gate.s(w[0].qubits[0]),),
        checks=(((Gate.t(0), Gate.t(0)), 1),),
    ),
    RewriteRule(
        "R7", 1,
        head=lambda g: g.kind is GateKind.S,
        rest=(_same(GateKind.S),),
        produce=lambda w: (Gate.z(w[0].qubits[0]),),
        checks=(((Gate.s(0), Gate.s(0)), 1),),
    ),
    RewriteRule(
        "R8", 1,
        head=lambda g: g.kind is GateKind.H,
        rest=(_same(GateKind.X), _same(GateKind.H)),
        produce=lambda w: (Gate.z(w[0].qubits[0]),),
        checks=(((Gate.h(0), Gate.x(0), Gate.h(0)), 1),),
    ),
    RewriteRule(
        "R9", 1,
        head=lambda g: g.kind is GateKind.H,
        rest=(_same(GateKind.Z), _same(GateKind.H)),
        produce=lambda w: (Gate.x(w[0].qubits[0]),),
        checks=(((Gate.h(0), Gate.z(0), Gate.h(0)), 1),),
    ),
    RewriteRule(
        "R10", 1,
        head=lambda g: g.kind in (GateKind.RX, GateKind.RY, GateKind.RZ) and _is_zero_angle(g.params[0]),
        rest=(),
        produce=lambda w: (),
        checks=(
            ((Gate.rz(0, 0.0),), 1),
            ((Gate.rx(0, 0.0),), 1),
            ((Gate.ry(0, 0.0),), 1),
        ),
    ),
    RewriteRule(
        "R11", 2,
        head=lambda g: g.kind is GateKind.CX,
        rest=(
            lambda g0, g: g.kind is GateKind.X and g.qubits == (g0.qubits[0],),
            lambda g0, g: g.kind is GateKind.CX and g.qubits == g0.qubits,
        ),
        produce=lambda w: (Gate.x(w[0].qubits[0]), Gate.x(w[0].qubits[1])),
        checks=(((Gate.cx(0, 1), Gate.x(0), Gate.cx(0, 1)), 2),),
    ),
]

R12_ID = "R12"

# R12 has no structural window matcher: find_sites locates it by commuting-pair
# lookahead, apply_site transposes the pair and applies the rule it enables.
_R12_RULE = RewriteRule(
    R12_ID, 2,
    head=lambda g: False,
    rest=(),
    produce=lambda w: w,
    checks=(((Gate.rz(0, 0.3), Gate.t(0), Gate.rz(0, -0.3)), 1),),
)

RULE_IDS: tuple[str, ...] = tuple(r.rule_id for r in _RULES) + (R12_ID,)
_RULE_BY_ID = {r.rule_id: r for r in _RULES}
# rules R12 may enable (R11 deliberately excluded)
_R12_TARGETS = tuple(r for r in _RULES if r.rule_id != "R11")


def rule_catalog() -> list[RewriteRule]:
    return list(_RULES) + [_R12_RULE]


def _qubit_positions(gates: Sequence[Gate], num_qubits: int) -> list[list[int]]:
    pos: list[list[int]] = [[] for _ in range(num_qubits)]
    for i, g in enumerate(gates):
        for q in g.qubits:
            pos[q].append(i)
    return pos


def _next_on_support(pos: list[list[int]], support: tuple[int, ...], after: int) -> int | None:
    best: int | None = None
    for q in support:
        lst = pos[q]
        k = bisect_right(lst, after)
        if k < len(lst) and (best is None or lst[k] < best):
            best = lst[k]
    return best


def _match_rule(rule: RewriteRule, gates: Sequence[Gate], pos, start: int) -> tuple[int, ...] | None:
    g0 = gates[start]
    if not rule.head(g0):
        return None
    indices = [start]
    at = start
    for pred in rule.rest:
        nxt = _next_on_support(pos, g0.qubits, at)
        if nxt is None or not pred(g0, gates[nxt]):
            return None
        indices.append(nxt)
        at = nxt
    return tuple(indices)


_commute_cache: dict[tuple, bool] = {}


def _commutes(a: Gate, b: Gate) -> bool:
    qubits = sorted(set(a.qubits) | set(b.qubits))
    remap = {q: i for i, q in enumerate(qubits)}
    qa = tuple(remap[q] for q in a.qubits)
    qb = tuple(remap[q] for q in b.qubits)
    key = (a.kind, qa, a.params, b.kind, qb, b.params)
    hit = _commute_cache.get(key)
    if hit is not None:
        return hit
    n = len(qubits)
    ga, gb = Gate(a.kind, qa, a.params), Gate(b.kind, qb, b.params)
    ab = unitary(Circuit(n, (ga, gb)))
    ba = unitary(Circuit(n, (gb, ga)))
    out = bool(np.max(np.abs(ab - ba)) < 1e-12)
    if len(_commute_cache) > 200_000:
        _commute_cache.clear()
    _commute_cache[key] = out
    return out


def _plain_sites(gates: Sequence[Gate], pos) -> list[RewriteSite]:
    found: list[RewriteSite] = []
    for start in range(len(gates)):
        for rule in _RULES:
            idx = _match_rule(rule, gates, pos, start)
            if idx is not None:
                found.append(RewriteSite(rule.rule_id, idx))
    return found


def _sites_touching(gates: Sequence[Gate], pos, touched: tuple[int, ...]) -> list[RewriteSite]:
    """R1-R10 sites whose window includes a touched position.

    Window members chain through shared qubits, so every head lies within two
    backward steps of a member along some member's own qubits.
    """
    starts = set(touched)
    frontier = set(touched)
    for _ in range(2):
        prev: set[int] = set()
        for p in frontier:
            for q in gates[p].qubits:
                lst = pos[q]
                k = bisect_left(lst, p)
                if k > 0:
                    prev.add(lst[k - 1])
        starts |= prev
        frontier = prev
    hit = set(touched)
    found: list[RewriteSite] = []
    for start in sorted(starts):
        for rule in _R12_TARGETS:
            idx = _match_rule(rule, gates, pos, start)
            if idx is not None and set(idx) & hit:
                found.append(RewriteSite(rule.rule_id, idx))
    return found


def _r12_enabled_site(gates: list[Gate], num_qubits: int, i: int,
                      pos=None) -> RewriteSite | None:
    """Swap gates[i], gates[i+1]; first R1-R10 site the swap newly enables."""
    if pos is None:
        pos = _qubit_positions(gates, num_qubits)
    before = {(s.rule_id, s.gate_indices) for s in _sites_touching(gates, pos, (i, i + 1))}
    swapped = list(gates)
    swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
    spos = _qubit_positions(swapped, num_qubits)
    after = _sites_touching(swapped, spos, (i, i + 1))
    for s in sorted(after, key=lambda s: (s.gate_indices[0], s.rule_id)):
        if (s.rule_id, s.gate_indices) not in before:
            return s
    return None


def find_sites(c: Circuit) -> list[RewriteSite]:
    """All applicable sites, ordered by first gate index then rule id."""
    gates = list(c.gates)
    pos = _qubit_positions(gates, c.num_qubits)
    sites = _plain_sites(gates, pos)
    for i in range(len(gates) - 1):
        a, b = gates[i], gates[i + 1]
        if not set(a.qubits) & set(b.qubits):
            continue
        if not _commutes(a, b):
            continue
        if _r12_enabled_site(gates, c.num_qubits, i, pos) is not None:
            sites.append(RewriteSite(R12_ID, (i, i + 1)))
    sites.sort(key=lambda s: (s.gate_indices[0], s.rule_id))
    return sites


def _splice(gates: list[Gate], indices: tuple[int, ...], replacement: tuple[Gate, ...]) -> list[Gate]:
    drop = set(indices)
    out: list[Gate] = []
    for i, g in enumerate(gates):
        if i == indices[0]:
            out.extend(replacement)
        if i not in drop:
            out.append(g)
    return out


def apply_site(c: Circuit, site: RewriteSite) -> Circuit:
    """Apply a site after re-matching it. Raises StaleSite when it no longer holds."""
    gates = list(c.gates)
    if site.rule_id == R12_ID:
        i = site.gate_indices[0]
        if site.gate_indices != (i, i + 1) or i + 1 >= len(gates):
            raise StaleSite(f"{site.rule_id} at {site.gate_indices}")
        a, b = gates[i], gates[i + 1]
        if not (set(a.qubits) & set(b.qubits)) or not _commutes(a, b):
            raise StaleSite(f"{site.rule_id} at {site.gate_indices}")
        enabled = _r12_enabled_site(gates, c.num_qubits, i)
        if enabled is None:
            raise StaleSite(f"{site.rule_id} at {site.gate_indices}")
        gates[i], gates[i + 1] = gates[i + 1], gates[i]
        rule = _RULE_BY_ID[enabled.rule_id]
        window = tuple(gates[j] for j in enabled.gate_indices)
        return c.with_gates(_splice(gates, enabled.gate_indices, rule.produce(window)))

    rule = _RULE_BY_ID.get(site.rule_id)
    if rule is None:
        raise StaleSite(f"unknown rule {site.rule_id}")
    start = site.gate_indices[0]
    if start >= len(gates):
        raise StaleSite(f"{site.rule_id} at {site.gate_indices}")
    pos = _qubit_positions(gates, c.num_qubits)
    if _match_rule(rule, gates, pos, start) != site.gate_indices:
        raise StaleSite(f"{site.rule_id} at {site.gate_indices}")
    window = tuple(gates[j] for j in site.gate_indices)
    return c.with_gates(_splice(gates, site.gate_indices, rule.produce(window)))


def rewrite_greedy(c: Circuit, max_steps: int = 10_000) -> Circuit:
    """Apply the first available site repeatedly."""
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    for _ in range(max_steps):
        sites = find_sites(c)
        if not sites:
            break
        c = apply_site(c, sites[0])
    return c


# --- learned rule selection ----------------------------------------------

@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.05
    decay_episodes: int = 200

    def value(self, episode: int) -> float:
        if self.decay_episodes <= 0:
            return self.end
        frac = min(1.0, episode / self.decay_episodes)
        return self.start + (self.end - self.start) * frac


@dataclass(frozen=True)
class RewardWeights:
    gates: float = 1.0
    cx: float = 2.0
    depth: float = 0.5
    step_cost: float = 0.1


@dataclass(frozen=True)
class RewriteHyper:
    episodes: int = 300
    alpha: float = 0.2
    gamma: float = 0.95
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    max_steps: int = 64
    rewards: RewardWeights = field(default_factory=RewardWeights)


@dataclass
class RewritePolicy:
    q: dict[str, list[float]]
    hyper: RewriteHyper
    seed: int

    def values(self, key: str) -> list[float]:
        return self.q.get(key, [0.0] * len(RULE_IDS))

    def to_json(self) -> str:
        payload = {
            "kind": "rewrite",
            "actions": list(RULE_IDS),
            "features": ["gate_bucket:log2", "cx_bucket:log2", "depth_bucket:log2", "site_mask"],
            "q": {k: list(v) for k, v in sorted(self.q.items())},
            "hyper": {
                "episodes": self.hyper.episodes,
                "alpha": self.hyper.alpha,
                "gamma": self.hyper.gamma,
                "epsilon": [self.hyper.epsilon.start, self.hyper.epsilon.end,
                            self.hyper.epsilon.decay_episodes],
                "max_steps": self.hyper.max_steps,
                "rewards": [self.hyper.rewards.gates, self.hyper.rewards.cx,
                            self.hyper.rewards.depth, self.hyper.rewards.step_cost],
            },
            "seed": self.seed,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RewritePolicy":
        raw = json.loads(text)
        if raw.get("kind") != "rewrite":
            raise ValueError("not a rewrite policy file")
        h = raw["hyper"]
        hyper = RewriteHyper(
            episodes=h["episodes"],
            alpha=h["alpha"],
            gamma=h["gamma"],
            epsilon=EpsilonSchedule(*h["epsilon"]),
            max_steps=h["max_steps"],
            rewards=RewardWeights(*h["rewards"]),
        )
        return cls(q={k: [float(x) for x in v] for k, v in raw["q"].items()},
                   hyper=hyper, seed=int(raw["seed"]))


def state_key(c: Circuit, sites: list[RewriteSite]) -> str:
    m = metrics(c)
    mask = 0
    for s in sites:
        mask |= 1 << RULE_IDS.index(s.rule_id)
    return f"g{m.total_gates.bit_length()}c{m.cx_count.bit_length()}d{m.depth.bit_length()}m{mask}"


def _first_site_for(sites: list[RewriteSite], rule_id: str) -> RewriteSite | None:
    for s in sites:
        if s.rule_id == rule_id:
            return s
    return None


def _reward(before: Circuit, after: Circuit, w: RewardWeights) -> float:
    mb, ma = metrics(before), metrics(after)
    return (
        w.gates * (mb.total_gates - ma.total_gates)
        + w.cx * (mb.cx_count - ma.cx_count)
        + w.depth * (mb.depth - ma.depth)
        - w.step_cost
    )


def train_rewrite_policy(corpus: Sequence[Circuit], hyper: RewriteHyper | None = None,
                         seed: int = 0) -> RewritePolicy:
    """Tabular Q-learning over rule choices. Deterministic for a fixed seed."""
    if not corpus:
        raise ValueError("empty corpus")
    hyper = hyper or RewriteHyper()
    if not 0.0 < hyper.alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    if not 0.0 <= hyper.gamma <= 1.0:
        raise ValueError("gamma must be in [0, 1]")
    if hyper.episodes < 1:
        raise ValueError("episodes must be >= 1")
    rng = np.random.default_rng(seed)
    q: dict[str, list[float]] = {}
    zeros = [0.0] * len(RULE_IDS)

    for ep in range(hyper.episodes):
        c = corpus[ep % len(corpus)]
        eps = hyper.epsilon.value(ep)
        sites = find_sites(c)
        for _ in range(hyper.max_steps):
            if not sites:
                break
            key = state_key(c, sites)
            vals = q.setdefault(key, list(zeros))
            if rng.random() < eps:
                action = int(rng.integers(0, len(RULE_IDS)))
            else:
                action = int(np.argmax(vals))
            site = _first_site_for(sites, RULE_IDS[action])
            nxt = c if site is None else apply_site(c, site)
            r = _reward(c, nxt, hyper.rewards)
            nxt_sites = find_sites(nxt) if site is not None else sites
            if nxt_sites:
                target = r + hyper.gamma * max(q.get(state_key(nxt, nxt_sites), zeros))
            else:
                target = r
            vals[action] += hyper.alpha * (target - vals[action])
            c, sites = nxt, nxt_sites
    return RewritePolicy(q=q, hyper=hyper, seed=seed)


def rewrite_rl(c: Circuit, policy: RewritePolicy, budget: int = 64) -> Circuit:
    """Greedy-by-policy episode; returns the best (fewest-gate) circuit seen."""
    if budget < 0:
        raise ValueError("budget must be >= 0")
    best = c
    for _ in range(budget):
        sites = find_sites(c)
        if not sites:
            break
        vals = policy.values(state_key(c, sites))
        site = _first_site_for(sites, RULE_IDS[int(np.argmax(vals))])
        if site is None:
            break  # deterministic no-op would repeat until budget ran out
        c = apply_site(c, site)
        if len(c.gates) < len(best.gates):
            best = c
    return best


def _verify_rules() -> None:
    for rule in _RULES:
        for gates, n in rule.checks:
            before = Circuit(n, gates)
            after = Circuit(n, rule.produce(gates))
            if not equiv_up_to_phase(unitary(before), unitary(after), 1e-10):
                raise AssertionError(f"rule {rule.rule_id} fails its self-test")
    for gates, n in _R12_RULE.checks:
        c = Circuit(n, gates)
        sites = [s for s in find_sites(c) if s.rule_id == R12_ID]
        if not sites:
            raise AssertionError("rule R12 self-test fragment has no R12 site")
        if not equiv_up_to_phase(unitary(c), unitary(apply_site(c, sites[0])), 1e-10):
            raise AssertionError("rule R12 fails its self-test")


_verify_rules()
