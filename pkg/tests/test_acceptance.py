"""Acceptance gates: nine end-to-end checks, one verdict line each.

Each check records "criterion N: PASS/FAIL - ..."; conftest echoes every
recorded verdict in the terminal summary, so a full run always ends with
all nine lines regardless of capture settings.
"""

import hashlib
import json
import time
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from oracles import random_circuit
from orq.backend import load_bundled_profile, load_profile, estimate_fidelity
from orq.bench import (
    PIPELINES,
    default_orchestrator_policy,
    gen_clifford_t,
    gen_qaoa,
    inject_redundancy,
    run_pipeline,
)
from orq.circuit import Circuit, Gate, GateKind, equiv_up_to_phase, unitary
from orq.cli import main
from orq.orchestrator import OrchestratorHyper, train_orchestrator
from orq.qasm import QasmParseError, emit, parse
from orq.resynth import Template, min_cx_count, optimize_template, resynthesize_block
from orq.rewrite import EpsilonSchedule, apply_site, find_sites, rule_catalog
from orq.route import permuted_equivalence, route, verify_routed


VERDICTS: list[str] = []


def _verdict(num: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} - {name}: {detail}"
    VERDICTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def line5():
    return load_bundled_profile("line5")


@pytest.fixture(scope="module")
def default_policy(line5):
    return default_orchestrator_policy(line5, seed=0)


def _redundant_clifford_t(count: int, base_seed: int) -> list[Circuit]:
    out = []
    for i in range(count):
        c = gen_clifford_t(3 + i % 2, 10 + (i % 3) * 2, seed=base_seed + i)
        out.append(inject_redundancy(c, 0.35, seed=base_seed + 1000 + i))
    return out


def test_criterion_1_semantic_preservation(line5, default_policy):
    t0 = time.perf_counter()
    policies = {"orchestrator": default_policy}
    cache: dict = {}
    failures = []
    for i in range(500):
        rng = np.random.default_rng(1000 + i)
        c = random_circuit(rng, 2 + i % 3, 5 + (i * 7) % 56)
        for pipeline in PIPELINES:
            report = run_pipeline(c, line5, pipeline, policies, seed=i, cache=cache)
            ok = verify_routed(report.output_circuit, line5, report.layout,
                               allow_swap=False)
            ok = ok and permuted_equivalence(c, report.output_circuit,
                                             report.layout, tol=1e-6)
            if not ok:
                failures.append((i, pipeline))
    elapsed = time.perf_counter() - t0
    _verdict(1, "semantic preservation", not failures and elapsed < 300.0,
             f"500 circuits x {len(PIPELINES)} pipelines, "
             f"{len(failures)} failures, {elapsed:.0f}s (budget 300s)")


def test_criterion_2_reduction_targets(line5, default_policy):
    corpus = _redundant_clifford_t(100, 500)
    policies = {"orchestrator": default_policy}
    cache: dict = {}
    singles = ("rewrite_only", "resynth_only", "instantiate_only")
    j_by = {p: [] for p in ("orchestrated",) + singles}
    gate_reds, depth_reds = [], []
    for i, c in enumerate(corpus):
        for pipeline in j_by:
            r = run_pipeline(c, line5, pipeline, policies, seed=i, cache=cache)
            j_by[pipeline].append(r.final_j)
            if pipeline == "orchestrated":
                mi, mo = r.input_metrics, r.optimized_metrics
                gate_reds.append((mi.total_gates - mo.total_gates) / mi.total_gates)
                depth_reds.append((mi.depth - mo.depth) / mi.depth)
    gate_red = float(np.mean(gate_reds))
    depth_red = float(np.mean(depth_reds))
    j_orch = float(np.mean(j_by["orchestrated"]))
    j_best_single = min(float(np.mean(j_by[p])) for p in singles)
    ok = gate_red >= 0.30 and depth_red >= 0.20 and j_orch <= j_best_single
    _verdict(2, "reduction targets", ok,
             f"mean gate reduction {gate_red:.1%} (>=30%), "
             f"mean depth reduction {depth_red:.1%} (>=20%), "
             f"mean J {j_orch:.4f} vs best single pass {j_best_single:.4f}")


def test_criterion_3_learning_effectiveness(line5):
    t0 = time.perf_counter()
    hyper = OrchestratorHyper(episodes=160, max_steps=6,
                              epsilon=EpsilonSchedule(1.0, 0.05, 80))
    policy, _ = train_orchestrator(_redundant_clifford_t(10, 9000), line5,
                                   hyper=hyper, seed=7)
    train_s = time.perf_counter() - t0
    held_out = _redundant_clifford_t(50, 20000)
    cache: dict = {}
    j_trained, j_random = [], []
    for i, c in enumerate(held_out):
        policies = {"orchestrator": policy}
        j_trained.append(run_pipeline(c, line5, "orchestrated", policies,
                                      seed=i, cache=cache).final_j)
        j_random.append(run_pipeline(c, line5, "random_policy", policies,
                                     seed=i, cache=cache).final_j)
    j_trained = np.array(j_trained)
    j_random = np.array(j_random)
    relative = (j_random.mean() - j_trained.mean()) / j_random.mean()
    deltas = j_random - j_trained
    rng = np.random.default_rng(2026)
    resampled = np.array([
        deltas[rng.integers(0, len(deltas), len(deltas))].mean()
        for _ in range(1000)])
    lower95 = float(np.quantile(resampled, 0.05))
    ok = relative >= 0.05 and lower95 > 0.0 and train_s <= 600.0
    _verdict(3, "learning effectiveness", ok,
             f"trained mean J {j_trained.mean():.4f} vs random {j_random.mean():.4f} "
             f"({relative:.1%} better, >=5%), bootstrap 5th pct {lower95:.4f} > 0, "
             f"training {train_s:.0f}s (budget 600s)")


def test_criterion_4_resynthesis_quality():
    misses = []
    for i in range(100):
        rng = np.random.default_rng(3000 + i)
        u = unitary(random_circuit(rng, 2, 6 + i % 7, two_q=(GateKind.CX,)))
        gates = resynthesize_block(u, tol=1e-6, seed=i)
        if gates is None or not equiv_up_to_phase(
                u, unitary(Circuit(2, gates)), tol=1e-6):
            misses.append(i)
    swap_u = unitary(Circuit(2, (Gate.swap(0, 1),)))
    swap_floors = [optimize_template(Template(k), swap_u, restarts=12,
                                     seed=k).distance for k in (0, 1, 2)]
    swap_gates = resynthesize_block(swap_u, tol=1e-6, seed=0)
    swap_cx = sum(1 for g in swap_gates if g.kind is GateKind.CX)
    ident_gates = resynthesize_block(np.eye(4), tol=1e-6, seed=0)
    ident_cx = sum(1 for g in ident_gates if g.kind is GateKind.CX)
    ok = (not misses and all(d > 1e-6 for d in swap_floors)
          and swap_cx == 3 and ident_cx == 0)
    _verdict(4, "resynthesis quality", ok,
             f"100/100 random blocks within 1e-6 ({len(misses)} misses), "
             f"SWAP floors at 0/1/2 CX {['%.3f' % d for d in swap_floors]}, "
             f"SWAP solved with {swap_cx} CX, identity with {ident_cx} CX")


def test_criterion_5_rule_soundness():
    catalog = rule_catalog()
    checked, bad = 0, []
    for rule in catalog:
        for fragment, n in rule.checks:
            before = Circuit(n, fragment)
            if rule.rule_id == "R12":
                sites = [s for s in find_sites(before) if s.rule_id == "R12"]
                after = apply_site(before, sites[0]) if sites else before
                sound = bool(sites) and equiv_up_to_phase(
                    unitary(before), unitary(after), tol=1e-10)
            else:
                after = Circuit(n, rule.produce(fragment))
                sound = equiv_up_to_phase(unitary(before), unitary(after),
                                          tol=1e-10)
            checked += 1
            if not sound:
                bad.append(rule.rule_id)
    ok = not bad and len(catalog) == 12
    _verdict(5, "rule soundness", ok,
             f"{len(catalog)} rules, {checked} self-test fragments at 1e-10, "
             f"unsound: {bad or 'none'}")


def test_criterion_6_routing_validity():
    failures = []
    for pi, profile_name in enumerate(("line5", "tee7", "grid9")):
        p = load_bundled_profile(profile_name)
        for i in range(100):
            rng = np.random.default_rng(6000 + 1000 * pi + i)
            c = random_circuit(rng, 2 + i % 4, 6 + (i * 3) % 19)
            rc = route(c, p, seed=i)
            ok = verify_routed(rc.circuit, p, rc.layout, allow_swap=True)
            ok = ok and permuted_equivalence(c, rc.circuit, rc.layout, tol=1e-6)
            if not ok:
                failures.append((profile_name, i))
    _verdict(6, "routing validity", not failures,
             f"3 profiles x 100 circuits routed, verified, and "
             f"permutation-equivalent; {len(failures)} failures")


def _same_circuit(a: Circuit, b: Circuit, angle_tol: float) -> bool:
    if a.num_qubits != b.num_qubits or len(a.gates) != len(b.gates):
        return False
    for ga, gb in zip(a.gates, b.gates):
        if ga.kind is not gb.kind or ga.qubits != gb.qubits:
            return False
        if any(abs(x - y) > angle_tol for x, y in zip(ga.params, gb.params)):
            return False
    return True


def test_criterion_7_parser_round_trip_and_fuzz():
    rt_failures = 0
    for i in range(1000):
        rng = np.random.default_rng(7000 + i)
        c = random_circuit(rng, 1 + i % 6, i % 41)
        if not _same_circuit(parse(emit(c)), c, angle_tol=1e-12):
            rt_failures += 1

    base = emit(random_circuit(np.random.default_rng(7), 3, 20))
    alphabet = list("OPENQASM2.0;qregcxhstzybarfoi[]()+-*/,. \n\t\"\x00\xffπ;01239e")
    rng = np.random.default_rng(777)
    crashes = []
    for i in range(10_000):
        if i % 2 == 0:
            size = int(rng.integers(0, 200))
            text = "".join(alphabet[j] for j in rng.integers(0, len(alphabet), size))
        else:
            chars = list(base)
            for _ in range(int(rng.integers(1, 9))):
                op = int(rng.integers(0, 4))
                pos = int(rng.integers(0, max(1, len(chars))))
                if op == 0 and chars:
                    chars[pos % len(chars)] = alphabet[int(rng.integers(0, len(alphabet)))]
                elif op == 1:
                    chars.insert(pos, alphabet[int(rng.integers(0, len(alphabet)))])
                elif op == 2 and chars:
                    del chars[pos % len(chars)]
                else:
                    chars = chars[:pos]
            text = "".join(chars)
        try:
            parse(text)
        except QasmParseError:
            pass
        except Exception as e:  # noqa: BLE001 - the point is catching any crash
            crashes.append((i, type(e).__name__))
    ok = rt_failures == 0 and not crashes
    _verdict(7, "parser round-trip and robustness", ok,
             f"1000 round-trips ({rt_failures} failures, angle tol 1e-12), "
             f"10000 fuzz cases ({len(crashes)} non-parser exceptions)")


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_criterion_8_cli_determinism(tmp_path, capsys):
    profile = tmp_path / "p.json"
    profile.write_text((resources.files("orq") / "profiles" / "line5.json").read_text())
    inp = tmp_path / "in.qasm"
    inp.write_text(emit(gen_qaoa(3, 1, "ring", seed=7)))
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for i, c in enumerate(_redundant_clifford_t(3, 40)):
        (corpus / f"c{i}.qasm").write_text(emit(c))

    mismatches = []

    def double_run(label, args_for, files_for):
        for run in ("a", "b"):
            d = tmp_path / f"{label}_{run}"
            d.mkdir(exist_ok=True)
            assert main(args_for(d)) == 0, label
        for rel in files_for:
            ha = _sha(tmp_path / f"{label}_a" / rel)
            hb = _sha(tmp_path / f"{label}_b" / rel)
            if ha != hb:
                mismatches.append(f"{label}/{rel}")

    double_run(
        "train_rw",
        lambda d: ["train", "rewrite", "--corpus", str(corpus), "--profile",
                   str(profile), "--episodes", "8", "--seed", "3",
                   "--out", str(d / "pol.json")],
        ["pol.json"])
    double_run(
        "train_orch",
        lambda d: ["train", "orchestrator", "--corpus", str(corpus),
                   "--profile", str(profile), "--episodes", "20", "--seed", "3",
                   "--out", str(d / "pol.json")],
        ["pol.json", "pol.json.log.csv"])
    double_run(
        "opt_fixed",
        lambda d: ["optimize", str(inp), "--profile", str(profile),
                   "--pipeline", "fixed_sequence", "--seed", "5",
                   "--out", str(d / "out.qasm"), "--report", str(d / "rep.json")],
        ["out.qasm", "rep.json"])
    trained = tmp_path / "train_orch_a" / "pol.json"
    double_run(
        "opt_orch",
        lambda d: ["optimize", str(inp), "--profile", str(profile),
                   "--policy", str(trained), "--seed", "5",
                   "--out", str(d / "out.qasm"), "--report", str(d / "rep.json")],
        ["out.qasm", "rep.json"])
    double_run(
        "bench",
        lambda d: ["bench", "--suite", "qaoa", "--profile", str(profile),
                   "--pipelines", "rewrite_only,resynth_only", "--seed", "2",
                   "--out", str(d / "bench")],
        ["bench/bench.csv", "bench/bench.json"])

    stdouts = []
    for _ in range(2):
        assert main(["verify", str(inp), str(inp)]) == 0
        assert main(["profile", "show", str(profile)]) == 0
        stdouts.append(capsys.readouterr().out)
    if stdouts[0] != stdouts[1]:
        mismatches.append("verify+profile stdout")

    _verdict(8, "CLI determinism", not mismatches,
             f"5 commands double-run byte-identical across "
             f"9 artifacts plus stdout; mismatches: {mismatches or 'none'}")


def _synthetic_profile(i: int) -> str:
    rng = np.random.default_rng(400 + i)
    n = 4 + i
    return json.dumps({
        "name": f"synth{i}",
        "num_qubits": n,
        "coupling": [[q, q + 1] for q in range(n - 1)],
        "native_gates": ["rz", "sx", "cx"],
        "default_err_1q": float(rng.uniform(0.0005, 0.02)),
        "default_err_2q": float(rng.uniform(0.005, 0.05)),
    })


def test_criterion_9_fidelity_properties():
    pool = [load_bundled_profile(n) for n in ("line5", "tee7", "grid9")]
    pool += [load_profile(_synthetic_profile(i)) for i in range(3)]
    append_kinds = (GateKind.H, GateKind.T, GateKind.RZ, GateKind.CX)
    violations = []
    for i in range(1000):
        p = pool[i % len(pool)]
        rng = np.random.default_rng(9000 + i)
        n = int(rng.integers(2, min(5, p.num_qubits) + 1))
        c = random_circuit(rng, n, int(rng.integers(1, 31)))
        f = estimate_fidelity(c, p)
        kind = append_kinds[int(rng.integers(0, len(append_kinds)))]
        if kind is GateKind.CX:
            a, b = rng.choice(n, size=2, replace=False)
            g = Gate.cx(int(a), int(b))
        elif kind is GateKind.RZ:
            g = Gate.rz(int(rng.integers(0, n)), float(rng.uniform(0.0, 12.0)))
        else:
            g = Gate(kind, (int(rng.integers(0, n)),))
        if estimate_fidelity(c.appended(g), p) > f + 1e-12:
            violations.append(("monotone", i))
        perm = rng.permutation(len(c.gates))
        shuffled = Circuit(n, tuple(c.gates[j] for j in perm))
        if abs(estimate_fidelity(shuffled, p) - f) > 1e-12:
            violations.append(("order", i))
    ten = load_profile(json.dumps({
        "name": "unif", "num_qubits": 2, "coupling": [[0, 1]],
        "native_gates": ["rz", "sx", "cx"],
        "default_err_1q": 0.01, "default_err_2q": 0.01}))
    example = estimate_fidelity(Circuit(1, tuple(Gate.h(0) for _ in range(10))), ten)
    example_ok = abs(example - 0.99 ** 10) <= 1e-9
    _verdict(9, "fidelity estimator properties", not violations and example_ok,
             f"1000 append-monotone and order-independence cases "
             f"({len(violations)} violations), ten-gate example "
             f"{example:.6f} vs 0.904382 within 1e-9")
