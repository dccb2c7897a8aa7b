"""Quantum circuit optimization with learned pass orchestration.

Three optimization passes (peephole rewriting with a learned rule policy,
numeric two-qubit block resynthesis, native-gate instantiation) are chained
by a Q-learned orchestrator, then circuits are routed onto a device coupling
map, lowered to its native gate set, and verified unitary-equivalent.
"""

from .backend import (
    BUNDLED_PROFILES,
    DeviceProfile,
    FeasibilityReport,
    ProfileError,
    check_feasibility,
    estimate_fidelity,
    load_bundled_profile,
    load_profile,
)
from .bench import (
    PIPELINES,
    SUITES,
    OptimizationReport,
    PipelineVerificationError,
    gen_adder,
    gen_clifford_t,
    gen_qaoa,
    gen_vqe_ansatz,
    inject_redundancy,
    make_suite,
    report_to_json,
    run_bench,
    run_pipeline,
)
from .circuit import (
    Circuit,
    Gate,
    GateKind,
    Metrics,
    equiv_up_to_phase,
    metrics,
    unitary,
)
from .instantiate import ToleranceNotReached, UnsupportedNativeSet, translate_to_native
from .orchestrator import (
    CostWeights,
    OrchestratorPolicy,
    cost,
    orchestrate,
    train_orchestrator,
)
from .qasm import QasmParseError, emit, parse, parse_with_warnings
from .resynth import min_cx_count, resynth_pass, resynthesize_block
from .rewrite import (
    RewritePolicy,
    rewrite_greedy,
    rewrite_rl,
    rule_catalog,
    train_rewrite_policy,
)
from .route import (
    InsufficientQubits,
    Layout,
    RoutedCircuit,
    permuted_equivalence,
    route,
    verify_routed,
)

__version__ = "0.1.0"

__all__ = [
    "BUNDLED_PROFILES",
    "Circuit",
    "CostWeights",
    "DeviceProfile",
    "FeasibilityReport",
    "Gate",
    "GateKind",
    "InsufficientQubits",
    "Layout",
    "Metrics",
    "OptimizationReport",
    "OrchestratorPolicy",
    "PIPELINES",
    "PipelineVerificationError",
    "ProfileError",
    "QasmParseError",
    "RewritePolicy",
    "RoutedCircuit",
    "SUITES",
    "ToleranceNotReached",
    "UnsupportedNativeSet",
    "check_feasibility",
    "cost",
    "emit",
    "equiv_up_to_phase",
    "estimate_fidelity",
    "gen_adder",
    "gen_clifford_t",
    "gen_qaoa",
    "gen_vqe_ansatz",
    "inject_redundancy",
    "load_bundled_profile",
    "load_profile",
    "make_suite",
    "metrics",
    "min_cx_count",
    "orchestrate",
    "parse",
    "parse_with_warnings",
    "permuted_equivalence",
    "report_to_json",
    "resynth_pass",
    "resynthesize_block",
    "rewrite_greedy",
    "rewrite_rl",
    "route",
    "rule_catalog",
    "run_bench",
    "run_pipeline",
    "train_orchestrator",
    "train_rewrite_policy",
    "translate_to_native",
    "unitary",
    "verify_routed",
]
