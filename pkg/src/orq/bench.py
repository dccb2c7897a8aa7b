"""Benchmark generators, end-to-end pipelines, and the report table.

A pipeline run is: optimization stage (one of six strategies), routing onto
the device, final native translation, then verification: device feasibility
always, unitary equivalence whenever the input is small enough to simulate.
A run that fails verification raises instead of reporting: that signals a
defect in a pass, not bad user input.

Reports keep three metric sets: the input, the optimization output (what
reduction percentages are measured on), and the routed+translated output
(what actually ships, and what the report's own QASM re-parses to). Wall
times are measured into every report but serialized as 0.0 unless asked
for, so emitted artifacts are byte-reproducible.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass

import numpy as np

from .backend import DeviceProfile, estimate_fidelity
from .circuit import Circuit, Gate, Metrics, metrics
from .instantiate import UnsupportedNativeSet, translate_to_native
from .orchestrator import (
    ACTIONS,
    CostWeights,
    OrchestratorAction,
    OrchestratorHyper,
    OrchestratorPolicy,
    _pass_seed,
    cost,
    new_episode,
    orchestrate,
    step,
    train_orchestrator,
)
from .qasm import emit
from .resynth import resynth_pass
from .rewrite import EpsilonSchedule, RewritePolicy, rewrite_greedy, rewrite_rl
from .route import Layout, permuted_equivalence, route, verify_routed

_TWO_PI = 2.0 * math.pi

PIPELINES = ("orchestrated", "rewrite_only", "resynth_only",
             "instantiate_only", "fixed_sequence", "random_policy")

SUITES = ("qaoa", "vqe", "adder", "cliffordt", "all")


class PipelineVerificationError(Exception):
    """A pipeline produced output that fails feasibility or equivalence."""


@dataclass(frozen=True)
class BenchCase:
    circuit_id: str
    spec: str
    circuit: Circuit


@dataclass(frozen=True)
class OptimizationReport:
    pipeline: str
    profile: str
    seed: int
    input_metrics: Metrics
    optimized_metrics: Metrics
    output_metrics: Metrics
    fidelity_before: float
    fidelity_after: float
    final_j: float
    trace: tuple[tuple[str, float], ...]
    layout: Layout
    timings: dict[str, float]
    output_circuit: Circuit


@dataclass(frozen=True)
class BenchResult:
    rows: tuple[dict, ...]
    csv_text: str
    json_text: str


def _ring_edges(n: int) -> list[tuple[int, int]]:
    return sorted({(min(i, (i + 1) % n), max(i, (i + 1) % n)) for i in range(n)})


def gen_qaoa(n: int, p_layers: int, graph: str = "ring", seed: int = 0) -> Circuit:
    """H on every qubit; per layer, a [CX, RZ, CX] gadget on each graph edge
    with that layer's angle, then RX on every qubit."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if p_layers < 1:
        raise ValueError("p_layers must be >= 1")
    if graph == "ring":
        edges = _ring_edges(n)
    elif graph == "complete":
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    else:
        raise ValueError(f"unknown graph {graph!r}")
    rng = np.random.default_rng(seed)
    gates = [Gate.h(q) for q in range(n)]
    for _ in range(p_layers):
        gamma = rng.uniform(0.0, _TWO_PI)
        for a, b in edges:
            gates += [Gate.cx(a, b), Gate.rz(b, gamma), Gate.cx(a, b)]
        beta = rng.uniform(0.0, _TWO_PI)
        gates += [Gate.rx(q, beta) for q in range(n)]
    return Circuit(n, tuple(gates))


def gen_vqe_ansatz(n: int, layers: int, seed: int = 0) -> Circuit:
    """Per layer: RY then RZ on each qubit with fresh angles, then a CX
    ladder down the register."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if layers < 1:
        raise ValueError("layers must be >= 1")
    rng = np.random.default_rng(seed)
    gates = []
    for _ in range(layers):
        gates += [Gate.ry(q, rng.uniform(0.0, _TWO_PI)) for q in range(n)]
        gates += [Gate.rz(q, rng.uniform(0.0, _TWO_PI)) for q in range(n)]
        gates += [Gate.cx(q, q + 1) for q in range(n - 1)]
    return Circuit(n, tuple(gates))


def _ccx(x: int, y: int, t: int) -> tuple[Gate, ...]:
    """Toffoli as the standard 2H + 6CX + 7T/Tdg sequence (exact)."""
    return (
        Gate.h(t), Gate.cx(y, t), Gate.tdg(t), Gate.cx(x, t), Gate.t(t),
        Gate.cx(y, t), Gate.tdg(t), Gate.cx(x, t), Gate.t(y), Gate.t(t),
        Gate.h(t), Gate.cx(x, y), Gate.t(x), Gate.tdg(y), Gate.cx(x, y),
    )


def gen_adder(bits: int) -> Circuit:
    """Ripple-carry adder |a, b> -> |a, a+b> with each Toffoli expanded.

    Wire order: carry-in ancilla, a register, b register, carry-out. The b
    register plus the carry-out wire hold the (bits+1)-bit sum.
    """
    if not 1 <= bits <= 3:
        raise ValueError("bits must be in 1..3")
    a = [1 + i for i in range(bits)]
    b = [1 + bits + i for i in range(bits)]
    z = 2 * bits + 1
    carries = [0] + a[:-1]
    gates: list[Gate] = []
    for i in range(bits):
        c, bi, ai = carries[i], b[i], a[i]
        gates += [Gate.cx(ai, bi), Gate.cx(ai, c), *_ccx(c, bi, ai)]
    gates.append(Gate.cx(a[-1], z))
    for i in reversed(range(bits)):
        c, bi, ai = carries[i], b[i], a[i]
        gates += [*_ccx(c, bi, ai), Gate.cx(ai, c), Gate.cx(c, bi)]
    return Circuit(2 * bits + 2, tuple(gates))


def gen_clifford_t(n: int, depth_target: int, seed: int = 0) -> Circuit:
    """Uniform draws from {H, S, T, CX} until the ASAP depth reaches target."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if depth_target < 0:
        raise ValueError("depth_target must be >= 0")
    rng = np.random.default_rng(seed)
    one_q = (Gate.h, Gate.s, Gate.t)
    gates: list[Gate] = []
    level = [0] * n
    depth = 0
    while depth < depth_target:
        pick = int(rng.integers(0, 4 if n >= 2 else 3))
        if pick == 3:
            a = int(rng.integers(0, n))
            b = int(rng.integers(0, n - 1))
            b += b >= a
            g = Gate.cx(a, b)
        else:
            g = one_q[pick](int(rng.integers(0, n)))
        gates.append(g)
        layer = max(level[q] for q in g.qubits) + 1
        for q in g.qubits:
            level[q] = layer
        depth = max(depth, layer)
    return Circuit(n, tuple(gates))


def inject_redundancy(c: Circuit, rate: float, seed: int = 0) -> Circuit:
    """Before each gate, with the given probability, insert one identity
    pair: H pair, X pair, CX pair on a random edge, or RZ(phi)RZ(-phi)."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must be in [0, 1]")
    rng = np.random.default_rng(seed)
    n = c.num_qubits
    out: list[Gate] = []
    for g in c.gates:
        if rng.random() < rate:
            pick = int(rng.integers(0, 4))
            if pick == 2 and n < 2:
                pick = 0
            if pick == 0:
                q = int(rng.integers(0, n))
                out += [Gate.h(q), Gate.h(q)]
            elif pick == 1:
                q = int(rng.integers(0, n))
                out += [Gate.x(q), Gate.x(q)]
            elif pick == 2:
                a = int(rng.integers(0, n))
                b = int(rng.integers(0, n - 1))
                b += b >= a
                out += [Gate.cx(a, b), Gate.cx(a, b)]
            else:
                q = int(rng.integers(0, n))
                phi = rng.uniform(0.0, _TWO_PI)
                out += [Gate.rz(q, phi), Gate.rz(q, -phi)]
        out.append(g)
    return Circuit(n, tuple(out))


def make_suite(name: str, seed: int = 0) -> list[BenchCase]:
    """Fixed case lists per suite; every case records its generator call."""
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
    if name == "all":
        out = []
        for part in ("qaoa", "vqe", "adder", "cliffordt"):
            out += make_suite(part, seed)
        return out
    cases = []
    if name == "qaoa":
        for i, (n, p, graph) in enumerate(
                [(2, 1, "ring"), (3, 1, "ring"), (3, 2, "ring"),
                 (4, 1, "ring"), (4, 2, "complete")]):
            spec = f"gen_qaoa(n={n}, p_layers={p}, graph={graph!r}, seed={seed + i})"
            cases.append(BenchCase(f"qaoa_n{n}_p{p}_{graph}", spec,
                                   gen_qaoa(n, p, graph, seed=seed + i)))
    elif name == "vqe":
        for i, (n, l) in enumerate([(2, 1), (3, 1), (3, 2), (4, 1), (4, 2)]):
            spec = f"gen_vqe_ansatz(n={n}, layers={l}, seed={seed + i})"
            cases.append(BenchCase(f"vqe_n{n}_l{l}", spec,
                                   gen_vqe_ansatz(n, l, seed=seed + i)))
    elif name == "adder":
        for bits in (1, 2, 3):
            cases.append(BenchCase(f"adder_b{bits}", f"gen_adder(bits={bits})",
                                   gen_adder(bits)))
    else:
        for i, (n, d) in enumerate([(3, 12), (3, 20), (4, 12), (4, 20)]):
            spec = f"gen_clifford_t(n={n}, depth_target={d}, seed={seed + i})"
            cases.append(BenchCase(f"cliffordt_n{n}_d{d}", spec,
                                   gen_clifford_t(n, d, seed=seed + i)))
    return cases


def default_orchestrator_policy(p: DeviceProfile, seed: int = 0,
                                episodes: int = 80) -> OrchestratorPolicy:
    """Small built-in training run used when no policy file is supplied."""
    corpus = [inject_redundancy(gen_clifford_t(3, 10, seed=seed + i), 0.3,
                                seed=seed + i) for i in range(4)]
    hyper = OrchestratorHyper(episodes=episodes, max_steps=6,
                              epsilon=EpsilonSchedule(1.0, 0.1,
                                                      max(1, episodes // 2)))
    policy, _ = train_orchestrator(corpus, p, hyper=hyper, seed=seed)
    return policy


def _zero_policy(rp: RewritePolicy | None) -> OrchestratorPolicy:
    return OrchestratorPolicy(q={}, weights=CostWeights(),
                              hyper=OrchestratorHyper(), seed=0,
                              corpus_hash="", rewrite_policy=rp)


def _rewrite(c: Circuit, rp: RewritePolicy | None) -> Circuit:
    return rewrite_rl(c, rp, budget=64) if rp is not None else rewrite_greedy(c)


def _translate_or_noop(c: Circuit, p: DeviceProfile) -> Circuit:
    try:
        return translate_to_native(c, p)
    except UnsupportedNativeSet:
        return c


def _random_rollout(c: Circuit, p: DeviceProfile, w: CostWeights,
                    rp: RewritePolicy | None, seed: int,
                    cache: dict | None = None,
                    ) -> tuple[Circuit, list[tuple[str, float]]]:
    """Uniform-random action baseline with the same best-J-visited return."""
    if not c.gates:
        return c, [(OrchestratorAction.STOP.value, cost(c, c, p, w))]
    rng = np.random.default_rng(seed)
    ep = new_episode(c, p, w, rewrite_policy=rp, seed=seed, cache=cache)
    best_c, best_j = c, cost(c, c, p, w)
    trace: list[tuple[str, float]] = []
    while not ep.done:
        a = ACTIONS[int(rng.integers(0, len(ACTIONS)))]
        step(ep, a)
        j = cost(ep.current, c, p, w)
        trace.append((a.value, j))
        if j < best_j:
            best_c, best_j = ep.current, j
    return best_c, trace


def _cached_resynth(c: Circuit, seed: int, cache: dict | None) -> Circuit:
    key = (OrchestratorAction.RUN_RESYNTH, seed, c.num_qubits, c.gates)
    if cache is not None and key in cache:
        return cache[key][0]
    out = resynth_pass(c, seed=_pass_seed(seed, OrchestratorAction.RUN_RESYNTH, c))
    if cache is not None:
        cache[key] = (out, False)
    return out


def run_pipeline(c: Circuit, p: DeviceProfile, pipeline: str,
                 policies: dict | None = None, seed: int = 0,
                 cache: dict | None = None) -> OptimizationReport:
    """Optimize with the named strategy, route, translate, verify, report.

    The optional cache memoizes pass results across calls; share one only
    between calls that use the same policies."""
    if pipeline not in PIPELINES:
        raise ValueError(f"unknown pipeline {pipeline!r}; expected one of {PIPELINES}")
    policies = policies or {}
    rp = policies.get("rewrite")
    orch = policies.get("orchestrator")
    w = orch.weights if orch is not None else CostWeights()
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    if pipeline == "orchestrated":
        pol = orch if orch is not None else _zero_policy(rp)
        optimized, trace = orchestrate(c, p, pol, seed=seed, cache=cache)
    elif pipeline == "rewrite_only":
        optimized = _rewrite(c, rp)
        trace = [("rewrite", cost(optimized, c, p, w))]
    elif pipeline == "resynth_only":
        optimized = _cached_resynth(c, seed, cache)
        trace = [("resynth", cost(optimized, c, p, w))]
    elif pipeline == "instantiate_only":
        optimized = _translate_or_noop(c, p)
        trace = [("instantiate", cost(optimized, c, p, w))]
    elif pipeline == "fixed_sequence":
        r1 = _rewrite(c, rp)
        r2 = _cached_resynth(r1, seed, cache)
        optimized = _translate_or_noop(r2, p)
        trace = [("rewrite", cost(r1, c, p, w)),
                 ("resynth", cost(r2, c, p, w)),
                 ("instantiate", cost(optimized, c, p, w))]
    else:
        optimized, trace = _random_rollout(c, p, w, rp, seed, cache=cache)
    timings["optimize"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    routed = route(optimized, p, seed=seed)
    timings["route"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    final = translate_to_native(routed.circuit, p)
    timings["translate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if not verify_routed(final, p, routed.layout, allow_swap=False):
        raise PipelineVerificationError(
            f"pipeline {pipeline!r}: output violates coupling or native set "
            f"on profile {p.name!r}")
    if c.num_qubits <= 5:
        if not permuted_equivalence(c, final, routed.layout, tol=1e-6):
            raise PipelineVerificationError(
                f"pipeline {pipeline!r}: output unitary differs from input "
                f"beyond tolerance on profile {p.name!r}")
    timings["verify"] = time.perf_counter() - t0

    return OptimizationReport(
        pipeline=pipeline, profile=p.name, seed=seed,
        input_metrics=metrics(c), optimized_metrics=metrics(optimized),
        output_metrics=metrics(final),
        fidelity_before=estimate_fidelity(c, p),
        fidelity_after=estimate_fidelity(final, p),
        final_j=cost(optimized, c, p, w),
        trace=tuple(trace), layout=routed.layout, timings=timings,
        output_circuit=final)


def _metrics_dict(m: Metrics) -> dict:
    return {
        "depth": m.depth,
        "total_gates": m.total_gates,
        "cx_count": m.cx_count,
        "two_qubit_count": m.two_qubit_count,
        "counts_by_kind": {k.value: v for k, v in sorted(
            m.counts_by_kind.items(), key=lambda kv: kv[0].value)},
    }


def report_to_json(report: OptimizationReport, timings: bool = False) -> str:
    payload = {
        "pipeline": report.pipeline,
        "profile": report.profile,
        "seed": report.seed,
        "input_metrics": _metrics_dict(report.input_metrics),
        "optimized_metrics": _metrics_dict(report.optimized_metrics),
        "output_metrics": _metrics_dict(report.output_metrics),
        "fidelity_before": report.fidelity_before,
        "fidelity_after": report.fidelity_after,
        "final_j": report.final_j,
        "trace": [[a, j] for a, j in report.trace],
        "layout": {"initial": list(report.layout.initial),
                   "final": list(report.layout.final)},
        "timings": {k: (v if timings else 0.0)
                    for k, v in sorted(report.timings.items())},
        "output_qasm": emit(report.output_circuit),
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _reduction(before: int, after: int) -> float:
    return (before - after) / before if before > 0 else 0.0


_ROW_FIELDS = (
    "circuit_id", "pipeline", "qubits",
    "depth_before", "depth_after", "depth_reduction",
    "gates_before", "gates_after", "gates_reduction",
    "cx_before", "cx_after", "cx_reduction",
    "fidelity_before", "fidelity_after", "final_j", "wall_time_s",
)


def _bench_row(case: BenchCase, report: OptimizationReport,
               timings: bool) -> dict:
    mi, mo = report.input_metrics, report.optimized_metrics
    return {
        "circuit_id": case.circuit_id,
        "pipeline": report.pipeline,
        "qubits": case.circuit.num_qubits,
        "depth_before": mi.depth, "depth_after": mo.depth,
        "depth_reduction": _reduction(mi.depth, mo.depth),
        "gates_before": mi.total_gates, "gates_after": mo.total_gates,
        "gates_reduction": _reduction(mi.total_gates, mo.total_gates),
        "cx_before": mi.cx_count, "cx_after": mo.cx_count,
        "cx_reduction": _reduction(mi.cx_count, mo.cx_count),
        "fidelity_before": report.fidelity_before,
        "fidelity_after": report.fidelity_after,
        "final_j": report.final_j,
        "wall_time_s": sum(report.timings.values()) if timings else 0.0,
    }


def _aggregate(rows: list[dict], pipelines: list[str]) -> dict:
    out = {}
    for pipe in sorted(pipelines):
        sub = [r for r in rows if r["pipeline"] == pipe]
        out[pipe] = {
            "mean_depth_reduction": sum(r["depth_reduction"] for r in sub) / len(sub),
            "mean_gates_reduction": sum(r["gates_reduction"] for r in sub) / len(sub),
            "mean_cx_reduction": sum(r["cx_reduction"] for r in sub) / len(sub),
            "mean_final_j": sum(r["final_j"] for r in sub) / len(sub),
            "mean_fidelity_after": sum(r["fidelity_after"] for r in sub) / len(sub),
        }
    return out


def run_bench(suite: list[BenchCase], p: DeviceProfile, pipelines: list[str],
              seed: int = 0, policies: dict | None = None,
              timings: bool = False) -> BenchResult:
    """One row per (circuit, pipeline), ordered by (circuit id, pipeline)."""
    if not suite:
        raise ValueError("suite must be non-empty")
    if not pipelines:
        raise ValueError("pipelines must be non-empty")
    for pipe in pipelines:
        if pipe not in PIPELINES:
            raise ValueError(f"unknown pipeline {pipe!r}; expected one of {PIPELINES}")
    policies = dict(policies or {})
    if "orchestrated" in pipelines and "orchestrator" not in policies:
        policies["orchestrator"] = default_orchestrator_policy(p, seed=seed)

    rows = []
    cache: dict = {}
    for case in sorted(suite, key=lambda k: k.circuit_id):
        for pipe in sorted(set(pipelines)):
            report = run_pipeline(case.circuit, p, pipe, policies, seed=seed,
                                  cache=cache)
            rows.append(_bench_row(case, report, timings))

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=_ROW_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v
                         for k, v in row.items()})
    json_text = json.dumps({
        "profile": p.name,
        "seed": seed,
        "pipelines": sorted(set(pipelines)),
        "rows": rows,
        "aggregates": _aggregate(rows, sorted(set(pipelines))),
    }, sort_keys=True, indent=2) + "\n"
    return BenchResult(rows=tuple(rows), csv_text=buf.getvalue(),
                       json_text=json_text)
