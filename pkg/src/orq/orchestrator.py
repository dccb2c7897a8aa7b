"""Pass-selection MDP: a tabular Q-learned policy picks which optimizer runs next.

An episode holds the current circuit plus the features the policy sees: metric
ratios against the episode's initial circuit, estimated fidelity, the last
action, and whether translation has happened. Rewards are drops in the
scalar cost J minus a fixed per-action charge, so the learned policy trades
pass runtime against expected improvement. Pass results are cached by
(action, circuit) and pass seeds derive from (base seed, circuit content),
which makes results independent of the order states are visited in.
"""

from __future__ import annotations

import enum
import hashlib
import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .backend import DeviceProfile, estimate_fidelity
from .circuit import Circuit, metrics
from .instantiate import UnsupportedNativeSet, translate_to_native
from .resynth import resynth_pass
from .rewrite import EpsilonSchedule, RewritePolicy, rewrite_greedy, rewrite_rl


class OrchestratorAction(enum.Enum):
    RUN_REWRITE = "rewrite"
    RUN_RESYNTH = "resynth"
    RUN_INSTANTIATE = "instantiate"
    STOP = "stop"


ACTIONS: tuple[OrchestratorAction, ...] = tuple(OrchestratorAction)
_ACTION_INDEX = {a: i for i, a in enumerate(ACTIONS)}

_RATIO_EDGES = (0.25, 0.5, 0.75, 1.0)
_FIDELITY_EDGES = (0.9, 0.99, 0.999)


@dataclass(frozen=True)
class CostWeights:
    w_depth: float = 1.0
    w_gates: float = 1.0
    w_cx: float = 2.0
    w_fid: float = 4.0

    def __post_init__(self):
        ws = (self.w_depth, self.w_gates, self.w_cx, self.w_fid)
        if any(w < 0 for w in ws):
            raise ValueError("weights must be non-negative")
        if not any(w > 0 for w in ws):
            raise ValueError("at least one weight must be positive")


def cost(c: Circuit, c0: Circuit, p: DeviceProfile, w: CostWeights) -> float:
    """Weighted metric ratios against the episode start, plus infidelity.

    Terms whose initial metric is zero are skipped (nothing to normalize by);
    the CX term instead clamps its denominator to one so removing the last
    CX still pays off.
    """
    m, m0 = metrics(c), metrics(c0)
    j = w.w_fid * (1.0 - estimate_fidelity(c, p))
    if m0.depth >= 1:
        j += w.w_depth * (m.depth / m0.depth)
    if m0.total_gates >= 1:
        j += w.w_gates * (m.total_gates / m0.total_gates)
    j += w.w_cx * (m.cx_count / max(m0.cx_count, 1))
    return j


def _ratio_bin(x: float) -> int:
    for i, edge in enumerate(_RATIO_EDGES):
        if x < edge:
            return i
    return len(_RATIO_EDGES)


def _fidelity_bin(f: float) -> int:
    for i, edge in enumerate(_FIDELITY_EDGES):
        if f < edge:
            return i
    return len(_FIDELITY_EDGES)


@dataclass
class OrchestratorEpisode:
    c0: Circuit
    current: Circuit
    p: DeviceProfile
    w: CostWeights
    rewrite_policy: RewritePolicy | None
    seed: int
    action_cost: float = 0.02
    max_steps: int = 8
    rewrite_budget: int = 64
    steps: int = 0
    last_action: OrchestratorAction | None = None
    translated: bool = False
    done: bool = False
    run_counts: dict[OrchestratorAction, int] = field(
        default_factory=lambda: {a: 0 for a in ACTIONS})
    cache: dict = field(default_factory=dict)


def new_episode(c: Circuit, p: DeviceProfile, w: CostWeights | None = None,
                rewrite_policy: RewritePolicy | None = None, seed: int = 0,
                action_cost: float = 0.02, max_steps: int = 8,
                rewrite_budget: int = 64, cache: dict | None = None) -> OrchestratorEpisode:
    return OrchestratorEpisode(
        c0=c, current=c, p=p, w=w if w is not None else CostWeights(),
        rewrite_policy=rewrite_policy, seed=seed, action_cost=action_cost,
        max_steps=max_steps, rewrite_budget=rewrite_budget,
        cache=cache if cache is not None else {})


def state_key(ep: OrchestratorEpisode) -> str:
    m, m0 = metrics(ep.current), metrics(ep.c0)
    gb = _ratio_bin(m.total_gates / max(m0.total_gates, 1))
    cb = _ratio_bin(m.cx_count / max(m0.cx_count, 1))
    db = _ratio_bin(m.depth / max(m0.depth, 1))
    fb = _fidelity_bin(estimate_fidelity(ep.current, ep.p))
    la = "n" if ep.last_action is None else str(_ACTION_INDEX[ep.last_action])
    return f"g{gb}c{cb}d{db}f{fb}l{la}t{int(ep.translated)}"


def _pass_seed(base: int, action: OrchestratorAction, c: Circuit) -> int:
    text = f"{base}:{action.value}:" + ";".join(
        f"{g.kind.value},{g.qubits},{g.params}" for g in c.gates)
    return zlib.crc32(text.encode())


def _apply_action(ep: OrchestratorEpisode, action: OrchestratorAction) -> tuple[Circuit, bool]:
    """Run the pass for action on the episode circuit. Returns (result,
    whether a translation completed). Results are memoized per content; a
    shared cache is only valid across episodes with the same sub-policy."""
    key = (action, ep.seed, ep.current.num_qubits, ep.current.gates)
    hit = ep.cache.get(key)
    if hit is not None:
        return hit
    c = ep.current
    if action is OrchestratorAction.RUN_REWRITE:
        if ep.rewrite_policy is not None:
            out = (rewrite_rl(c, ep.rewrite_policy, budget=ep.rewrite_budget), False)
        else:
            out = (rewrite_greedy(c, max_steps=ep.rewrite_budget), False)
    elif action is OrchestratorAction.RUN_RESYNTH:
        out = (resynth_pass(c, seed=_pass_seed(ep.seed, action, c)), False)
    elif action is OrchestratorAction.RUN_INSTANTIATE:
        try:
            out = (translate_to_native(c, ep.p), True)
        except UnsupportedNativeSet:
            out = (c, False)
    else:
        raise ValueError("Stop does not run a pass")
    ep.cache[key] = out
    return out


@dataclass(frozen=True)
class StepResult:
    next_state: str
    reward: float
    done: bool


def step(ep: OrchestratorEpisode, action: OrchestratorAction) -> StepResult:
    """Apply one action; reward is the cost drop minus the action charge."""
    if ep.done:
        raise ValueError("episode is done")
    if action is OrchestratorAction.STOP:
        reward = 0.0
        ep.done = True
    else:
        before = cost(ep.current, ep.c0, ep.p, ep.w)
        nxt, translated = _apply_action(ep, action)
        ep.current = nxt
        ep.translated = ep.translated or translated
        reward = before - cost(nxt, ep.c0, ep.p, ep.w) - ep.action_cost
    ep.steps += 1
    ep.run_counts[action] += 1
    ep.last_action = action
    if ep.steps >= ep.max_steps:
        ep.done = True
    return StepResult(state_key(ep), reward, ep.done)


@dataclass(frozen=True)
class OrchestratorHyper:
    episodes: int = 300
    alpha: float = 0.2
    gamma: float = 0.95
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    max_steps: int = 8
    action_cost: float = 0.02
    rewrite_budget: int = 64


@dataclass(frozen=True)
class TrainLogRow:
    episode: int
    reward: float
    final_j: float


@dataclass
class OrchestratorPolicy:
    q: dict[str, list[float]]
    weights: CostWeights
    hyper: OrchestratorHyper
    seed: int
    corpus_hash: str
    rewrite_policy: RewritePolicy | None

    def values(self, key: str) -> list[float]:
        return self.q.get(key, [0.0] * len(ACTIONS))

    def to_json(self) -> str:
        payload = {
            "kind": "orchestrator",
            "actions": [a.value for a in ACTIONS],
            "discretization": {
                "features": ["gate_ratio", "cx_ratio", "depth_ratio",
                             "est_fidelity", "last_action", "translated_flag"],
                "ratio_edges": list(_RATIO_EDGES),
                "fidelity_edges": list(_FIDELITY_EDGES),
            },
            "q": {k: list(v) for k, v in sorted(self.q.items())},
            "weights": {
                "w_depth": self.weights.w_depth,
                "w_gates": self.weights.w_gates,
                "w_cx": self.weights.w_cx,
                "w_fid": self.weights.w_fid,
            },
            "hyper": {
                "episodes": self.hyper.episodes,
                "alpha": self.hyper.alpha,
                "gamma": self.hyper.gamma,
                "epsilon": {
                    "start": self.hyper.epsilon.start,
                    "end": self.hyper.epsilon.end,
                    "decay_episodes": self.hyper.epsilon.decay_episodes,
                },
                "max_steps": self.hyper.max_steps,
                "action_cost": self.hyper.action_cost,
                "rewrite_budget": self.hyper.rewrite_budget,
            },
            "seed": self.seed,
            "corpus_hash": self.corpus_hash,
            "rewrite_policy": (None if self.rewrite_policy is None
                               else json.loads(self.rewrite_policy.to_json())),
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "OrchestratorPolicy":
        raw = json.loads(text)
        if raw.get("kind") != "orchestrator":
            raise ValueError(f"not an orchestrator policy file: kind={raw.get('kind')!r}")
        h = raw["hyper"]
        hyper = OrchestratorHyper(
            episodes=h["episodes"], alpha=h["alpha"], gamma=h["gamma"],
            epsilon=EpsilonSchedule(**h["epsilon"]), max_steps=h["max_steps"],
            action_cost=h["action_cost"], rewrite_budget=h["rewrite_budget"])
        rp = raw.get("rewrite_policy")
        return cls(
            q={k: list(map(float, v)) for k, v in raw["q"].items()},
            weights=CostWeights(**raw["weights"]),
            hyper=hyper,
            seed=raw["seed"],
            corpus_hash=raw["corpus_hash"],
            rewrite_policy=None if rp is None else RewritePolicy.from_json(json.dumps(rp)),
        )


def corpus_hash(corpus: list[Circuit]) -> str:
    blob = "|".join(
        f"{c.num_qubits}:" + ";".join(
            f"{g.kind.value},{g.qubits},{g.params}" for g in c.gates)
        for c in corpus)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _greedy_action(values: list[float]) -> int:
    return min(range(len(values)), key=lambda i: (-values[i], i))


def train_orchestrator(corpus: list[Circuit], p: DeviceProfile,
                       w: CostWeights | None = None,
                       hyper: OrchestratorHyper | None = None,
                       seed: int = 0,
                       rewrite_policy: RewritePolicy | None = None,
                       ) -> tuple[OrchestratorPolicy, list[TrainLogRow]]:
    """Q-learning over step(); circuits are taken round-robin from the corpus."""
    if not corpus:
        raise ValueError("corpus must be non-empty")
    w = w if w is not None else CostWeights()
    hyper = hyper if hyper is not None else OrchestratorHyper()
    if not 0.0 < hyper.alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    if not 0.0 <= hyper.gamma <= 1.0:
        raise ValueError("gamma must be in [0, 1]")
    if hyper.episodes < 1 or hyper.max_steps < 1:
        raise ValueError("episodes and max_steps must be >= 1")

    rng = np.random.default_rng(seed)
    q: dict[str, list[float]] = {}
    cache: dict = {}
    log: list[TrainLogRow] = []
    for ep_i in range(hyper.episodes):
        c0 = corpus[ep_i % len(corpus)]
        ep = new_episode(c0, p, w, rewrite_policy=rewrite_policy, seed=seed,
                         action_cost=hyper.action_cost, max_steps=hyper.max_steps,
                         rewrite_budget=hyper.rewrite_budget, cache=cache)
        s = state_key(ep)
        eps = hyper.epsilon.value(ep_i)
        total = 0.0
        while not ep.done:
            if rng.random() < eps:
                ai = int(rng.integers(0, len(ACTIONS)))
            else:
                ai = _greedy_action(q.get(s, [0.0] * len(ACTIONS)))
            res = step(ep, ACTIONS[ai])
            total += res.reward
            row = q.setdefault(s, [0.0] * len(ACTIONS))
            future = 0.0 if res.done else max(q.get(res.next_state, [0.0] * len(ACTIONS)))
            row[ai] += hyper.alpha * (res.reward + hyper.gamma * future - row[ai])
            s = res.next_state
        log.append(TrainLogRow(ep_i, total, cost(ep.current, c0, p, w)))
    policy = OrchestratorPolicy(q=q, weights=w, hyper=hyper, seed=seed,
                                corpus_hash=corpus_hash(corpus),
                                rewrite_policy=rewrite_policy)
    return policy, log


def orchestrate(c: Circuit, p: DeviceProfile, policy: OrchestratorPolicy,
                w: CostWeights | None = None, max_steps: int | None = None,
                seed: int = 0, cache: dict | None = None,
                ) -> tuple[Circuit, list[tuple[str, float]]]:
    """Greedy rollout returning the best-J circuit visited plus the trace."""
    w = w if w is not None else policy.weights
    max_steps = max_steps if max_steps is not None else policy.hyper.max_steps
    if not c.gates:
        return c, [(OrchestratorAction.STOP.value, cost(c, c, p, w))]
    ep = new_episode(c, p, w, rewrite_policy=policy.rewrite_policy, seed=seed,
                     action_cost=policy.hyper.action_cost, max_steps=max_steps,
                     rewrite_budget=policy.hyper.rewrite_budget, cache=cache)
    best_c, best_j = c, cost(c, c, p, w)
    trace: list[tuple[str, float]] = []
    while not ep.done:
        a = ACTIONS[_greedy_action(policy.values(state_key(ep)))]
        step(ep, a)
        j = cost(ep.current, c, p, w)
        trace.append((a.value, j))
        if j < best_j:
            best_c, best_j = ep.current, j
    return best_c, trace
