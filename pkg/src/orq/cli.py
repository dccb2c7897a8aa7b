"""Command line: optimize, train, bench, verify, profile show.

Exit codes: 0 success, 1 user error (arguments, files, parsing, profiles),
2 verification failure, 3 internal error. All outputs are byte-reproducible
for fixed inputs and --seed; pass --timings to trade that for real wall
times in reports and bench tables.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backend import ProfileError, QubitOutOfRange, load_profile
from .bench import (
    PIPELINES,
    SUITES,
    PipelineVerificationError,
    default_orchestrator_policy,
    make_suite,
    report_to_json,
    run_bench,
    run_pipeline,
)
from .circuit import QubitCapExceeded, equiv_up_to_phase, unitary
from .instantiate import UnsupportedNativeSet
from .orchestrator import OrchestratorHyper, OrchestratorPolicy, train_orchestrator
from .qasm import QasmParseError, emit, parse
from .rewrite import RewriteHyper, RewritePolicy, train_rewrite_policy
from .route import InsufficientQubits

_USER_ERRORS = (QasmParseError, ProfileError, InsufficientQubits,
                QubitOutOfRange, QubitCapExceeded, UnsupportedNativeSet,
                OSError, ValueError, KeyError)

_VERIFY_MAX_QUBITS = 10


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="orq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    opt = sub.add_parser("optimize", help="optimize one QASM circuit for a device")
    opt.add_argument("input", help="input .qasm file")
    opt.add_argument("--profile", required=True, help="device profile .json")
    opt.add_argument("--policy", help="trained policy .json (rewrite or orchestrator)")
    opt.add_argument("--pipeline", choices=PIPELINES, default="orchestrated")
    opt.add_argument("--seed", type=int, default=0)
    opt.add_argument("--out", help="write optimized QASM here (default stdout)")
    opt.add_argument("--report", help="write a JSON report here")
    opt.add_argument("--timings", action="store_true",
                     help="keep measured wall times in the report")

    tr = sub.add_parser("train", help="train a policy on a corpus of QASM files")
    tr.add_argument("target", choices=("rewrite", "orchestrator"))
    tr.add_argument("--corpus", required=True, help="directory of .qasm files")
    tr.add_argument("--profile", required=True, help="device profile .json")
    tr.add_argument("--episodes", type=int, required=True)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--out", required=True, help="write the policy JSON here")

    be = sub.add_parser("bench", help="run benchmark suites and write the table")
    be.add_argument("--suite", choices=SUITES, required=True)
    be.add_argument("--profile", required=True, help="device profile .json")
    be.add_argument("--pipelines", default=",".join(PIPELINES),
                    help="comma-separated pipeline list")
    be.add_argument("--seed", type=int, default=0)
    be.add_argument("--out", required=True, help="output directory")
    be.add_argument("--timings", action="store_true",
                    help="keep measured wall times in the table")

    ve = sub.add_parser("verify", help="check two circuits are equivalent up to phase")
    ve.add_argument("a", help="first .qasm file")
    ve.add_argument("b", help="second .qasm file")
    ve.add_argument("--tol", type=float, default=1e-8)

    pr = sub.add_parser("profile", help="inspect a device profile")
    pr.add_argument("action", choices=("show",))
    pr.add_argument("path", help="device profile .json")

    return parser


def _load_policies(path: str | None) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text()
    kind = json.loads(text).get("kind")
    if kind == "orchestrator":
        pol = OrchestratorPolicy.from_json(text)
        out = {"orchestrator": pol}
        if pol.rewrite_policy is not None:
            out["rewrite"] = pol.rewrite_policy
        return out
    if kind == "rewrite":
        return {"rewrite": RewritePolicy.from_json(text)}
    raise ValueError(f"unrecognized policy kind {kind!r} in {path}")


def _cmd_optimize(args) -> int:
    c = parse(Path(args.input).read_text())
    p = load_profile(Path(args.profile).read_text())
    policies = _load_policies(args.policy)
    if args.pipeline == "orchestrated" and "orchestrator" not in policies:
        policies["orchestrator"] = default_orchestrator_policy(p, seed=args.seed)
    report = run_pipeline(c, p, args.pipeline, policies, seed=args.seed)
    text = emit(report.output_circuit)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.report:
        Path(args.report).write_text(report_to_json(report, timings=args.timings))
    mi, mo = report.input_metrics, report.output_metrics
    print(f"{args.pipeline}: gates {mi.total_gates} -> {mo.total_gates}, "
          f"depth {mi.depth} -> {mo.depth}, cx {mi.cx_count} -> {mo.cx_count}, "
          f"est. fidelity {report.fidelity_before:.6f} -> "
          f"{report.fidelity_after:.6f}", file=sys.stderr)
    return 0


def _cmd_train(args) -> int:
    corpus_dir = Path(args.corpus)
    files = sorted(corpus_dir.glob("*.qasm"))
    if not files:
        raise ValueError(f"no .qasm files found in {args.corpus}")
    corpus = [parse(f.read_text()) for f in files]
    p = load_profile(Path(args.profile).read_text())
    if args.target == "rewrite":
        policy = train_rewrite_policy(
            corpus, RewriteHyper(episodes=args.episodes), seed=args.seed)
        Path(args.out).write_text(policy.to_json())
    else:
        hyper = OrchestratorHyper(episodes=args.episodes)
        policy, log = train_orchestrator(corpus, p, hyper=hyper, seed=args.seed)
        Path(args.out).write_text(policy.to_json())
        log_path = Path(str(args.out) + ".log.csv")
        lines = ["episode,reward,final_j"]
        lines += [f"{row.episode},{row.reward!r},{row.final_j!r}" for row in log]
        log_path.write_text("\n".join(lines) + "\n")
        print(f"training log: {log_path}", file=sys.stderr)
    print(f"trained {args.target} policy on {len(corpus)} circuits "
          f"-> {args.out}", file=sys.stderr)
    return 0


def _cmd_bench(args) -> int:
    p = load_profile(Path(args.profile).read_text())
    pipelines = [s.strip() for s in args.pipelines.split(",") if s.strip()]
    suite = make_suite(args.suite, seed=args.seed)
    kept, skipped = [], []
    for case in suite:
        (kept if case.circuit.num_qubits <= p.num_qubits else skipped).append(case)
    for case in skipped:
        print(f"skipping {case.circuit_id}: needs {case.circuit.num_qubits} "
              f"qubits, profile {p.name!r} has {p.num_qubits}", file=sys.stderr)
    if not kept:
        raise ValueError(f"no circuit in suite {args.suite!r} fits profile {p.name!r}")
    result = run_bench(kept, p, pipelines, seed=args.seed, timings=args.timings)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "bench.csv").write_text(result.csv_text)
    (outdir / "bench.json").write_text(result.json_text)
    print(f"wrote {outdir / 'bench.csv'} and {outdir / 'bench.json'} "
          f"({len(result.rows)} rows)", file=sys.stderr)
    return 0


def _cmd_verify(args) -> int:
    a = parse(Path(args.a).read_text())
    b = parse(Path(args.b).read_text())
    cap = _VERIFY_MAX_QUBITS
    if a.num_qubits > cap or b.num_qubits > cap:
        raise ValueError(f"verify supports at most {cap} qubits")
    if a.num_qubits != b.num_qubits:
        print(f"not equivalent: qubit counts differ "
              f"({a.num_qubits} vs {b.num_qubits})")
        return 2
    if equiv_up_to_phase(unitary(a), unitary(b), tol=args.tol):
        print("equivalent")
        return 0
    print("not equivalent")
    return 2


def _cmd_profile(args) -> int:
    p = load_profile(Path(args.path).read_text())
    print(f"name: {p.name}")
    print(f"qubits: {p.num_qubits}")
    edges = " ".join(f"{a}-{b}" for a, b in sorted(p.coupling))
    print(f"coupling ({len(p.coupling)} edges): {edges}")
    print(f"native gates: {' '.join(sorted(k.value for k in p.native_gates))}")
    print(f"default errors: 1q={p.default_err_1q!r} 2q={p.default_err_2q!r}")
    print(f"per-qubit overrides: {len(p.err_1q)} 1q, {len(p.err_2q)} 2q")
    return 0


_COMMANDS = {
    "optimize": _cmd_optimize,
    "train": _cmd_train,
    "bench": _cmd_bench,
    "verify": _cmd_verify,
    "profile": _cmd_profile,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except PipelineVerificationError as e:
        print(f"verification failure: {e}", file=sys.stderr)
        return 2
    except _USER_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
