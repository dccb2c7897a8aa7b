"""Pass-selection MDP: cost, episode stepping, Q-learning, rollout."""

import json

import numpy as np
import pytest

from orq.backend import load_bundled_profile, load_profile
from orq.circuit import Circuit, Gate, equiv_up_to_phase, metrics, unitary
from orq.orchestrator import (
    ACTIONS,
    CostWeights,
    OrchestratorAction,
    OrchestratorHyper,
    OrchestratorPolicy,
    _fidelity_bin,
    _ratio_bin,
    corpus_hash,
    cost,
    new_episode,
    orchestrate,
    state_key,
    step,
    train_orchestrator,
)
from orq.rewrite import EpsilonSchedule, RewriteHyper, train_rewrite_policy

from oracles import random_circuit


def profile_json(name="test", n=4, coupling=None, natives=("rz", "sx", "cx"),
                 err_1q=0.001, err_2q=0.01):
    if coupling is None:
        coupling = [[i, i + 1] for i in range(n - 1)]
    return json.dumps({
        "name": name, "num_qubits": n, "coupling": coupling,
        "native_gates": list(natives),
        "default_err_1q": err_1q, "default_err_2q": err_2q,
    })


LINE5 = load_bundled_profile("line5")
W1111 = CostWeights(1.0, 1.0, 1.0, 1.0)

CANCEL4 = Circuit(2, (Gate.h(0), Gate.h(0), Gate.cx(0, 1), Gate.cx(0, 1)))
LONE_CX = Circuit(2, (Gate.cx(0, 1),))


class TestCostWeights:
    def test_defaults(self):
        w = CostWeights()
        assert (w.w_depth, w.w_gates, w.w_cx, w.w_fid) == (1.0, 1.0, 2.0, 4.0)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            CostWeights(w_cx=-1.0)

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            CostWeights(0.0, 0.0, 0.0, 0.0)


class TestCost:
    def test_unit_ratios_and_point_nine_fidelity(self):
        p = load_profile(profile_json(n=2, err_1q=0.0, err_2q=0.1))
        assert cost(LONE_CX, LONE_CX, p, W1111) == pytest.approx(3.1, abs=1e-12)

    def test_fully_optimized_away_costs_zero(self):
        p = load_profile(profile_json(n=2))
        empty = Circuit(2, ())
        assert cost(empty, LONE_CX, p, W1111) == 0.0

    def test_halved_depth_and_gates(self):
        p = load_profile(profile_json(n=2, err_1q=0.0, err_2q=0.05))
        c0 = Circuit(2, (Gate.h(0), Gate.h(0), Gate.h(0), Gate.cx(0, 1)))
        c = Circuit(2, (Gate.h(0), Gate.cx(0, 1)))
        assert cost(c, c0, p, W1111) == pytest.approx(2.05, abs=1e-12)

    def test_homogeneous_in_weights(self):
        rng = np.random.default_rng(7)
        c0 = random_circuit(rng, 3, 12)
        c = random_circuit(rng, 3, 7)
        w2 = CostWeights(2.0, 2.0, 4.0, 8.0)
        a = cost(c, c0, LINE5, CostWeights())
        b = cost(c, c0, LINE5, w2)
        assert b == pytest.approx(2.0 * a, rel=1e-12)

    def test_cx_denominator_clamped_to_one(self):
        p = load_profile(profile_json(n=2, err_1q=0.0, err_2q=0.0))
        c0 = Circuit(2, (Gate.h(0),))
        c = Circuit(2, (Gate.cx(0, 1),))
        got = cost(c, c0, p, W1111)
        assert got == pytest.approx(1.0 / 1 + 1.0 / 1 + 1.0 / 1 + 0.0, abs=1e-12)

    def test_skips_terms_with_zero_initial_metric(self):
        p = load_profile(profile_json(n=2, err_1q=0.0, err_2q=0.0))
        empty = Circuit(2, ())
        assert cost(empty, empty, p, W1111) == 0.0


class TestStateKey:
    def test_ratio_bin_edges(self):
        assert [_ratio_bin(x) for x in (0.0, 0.249, 0.25, 0.49, 0.5, 0.74,
                                        0.75, 0.99, 1.0, 7.0)] \
            == [0, 0, 1, 1, 2, 2, 3, 3, 4, 4]

    def test_fidelity_bin_edges(self):
        assert [_fidelity_bin(x) for x in (0.5, 0.89, 0.9, 0.98, 0.99,
                                           0.9985, 0.999, 1.0)] \
            == [0, 0, 1, 1, 2, 2, 3, 3]

    def test_fresh_episode_key(self):
        p = load_profile(profile_json(n=2, err_1q=0.0, err_2q=0.0))
        ep = new_episode(LONE_CX, p)
        assert state_key(ep) == "g4c4d4f3lnt0"

    def test_key_tracks_last_action_and_translation(self):
        ep = new_episode(CANCEL4, LINE5)
        step(ep, OrchestratorAction.RUN_INSTANTIATE)
        key = state_key(ep)
        assert key.endswith("l2t1")

    def test_translated_flag_sticky(self):
        ep = new_episode(CANCEL4, LINE5)
        step(ep, OrchestratorAction.RUN_INSTANTIATE)
        step(ep, OrchestratorAction.RUN_REWRITE)
        assert ep.translated
        assert state_key(ep).endswith("l0t1")


class TestStep:
    def test_unimprovable_circuit_costs_action_charge(self):
        ep = new_episode(LONE_CX, LINE5)
        res = step(ep, OrchestratorAction.RUN_REWRITE)
        assert res.reward == pytest.approx(-0.02, abs=1e-12)
        assert not res.done

    def test_stop_first_is_terminal_with_zero_reward(self):
        ep = new_episode(CANCEL4, LINE5)
        res = step(ep, OrchestratorAction.STOP)
        assert res.done
        assert res.reward == 0.0
        assert ep.current is CANCEL4
        with pytest.raises(ValueError):
            step(ep, OrchestratorAction.RUN_REWRITE)

    def test_rewrite_on_cancelling_pairs_pays_positive_reward(self):
        ep = new_episode(CANCEL4, LINE5)
        res = step(ep, OrchestratorAction.RUN_REWRITE)
        assert res.reward > 0.0
        assert len(ep.current) == 0

    def test_episode_ends_at_max_steps(self):
        ep = new_episode(LONE_CX, LINE5, max_steps=3)
        for want_done in (False, False, True):
            res = step(ep, OrchestratorAction.RUN_RESYNTH)
            assert res.done is want_done
        assert ep.steps == 3

    def test_unsupported_native_set_is_a_noop(self):
        p = load_profile(profile_json(natives=("h", "cx")))
        ep = new_episode(CANCEL4, p)
        res = step(ep, OrchestratorAction.RUN_INSTANTIATE)
        assert ep.current is CANCEL4
        assert not ep.translated
        assert res.reward == pytest.approx(-0.02, abs=1e-12)

    def test_instantiate_translates_to_native_kinds(self):
        ep = new_episode(Circuit(2, (Gate.h(0), Gate.cx(0, 1))), LINE5)
        step(ep, OrchestratorAction.RUN_INSTANTIATE)
        assert all(g.kind in LINE5.native_gates for g in ep.current.gates)

    def test_every_step_preserves_the_unitary(self):
        rng = np.random.default_rng(11)
        for trial in range(4):
            c = random_circuit(rng, 3, 14)
            ep = new_episode(c, LINE5, seed=trial)
            u0 = unitary(c)
            for a in (OrchestratorAction.RUN_REWRITE,
                      OrchestratorAction.RUN_RESYNTH,
                      OrchestratorAction.RUN_INSTANTIATE,
                      OrchestratorAction.RUN_REWRITE):
                step(ep, a)
                assert equiv_up_to_phase(unitary(ep.current), u0, tol=1e-6)

    def test_run_counts_tally_actions(self):
        ep = new_episode(LONE_CX, LINE5)
        step(ep, OrchestratorAction.RUN_RESYNTH)
        step(ep, OrchestratorAction.RUN_RESYNTH)
        step(ep, OrchestratorAction.RUN_REWRITE)
        assert ep.run_counts[OrchestratorAction.RUN_RESYNTH] == 2
        assert ep.run_counts[OrchestratorAction.RUN_REWRITE] == 1

    def test_pass_results_are_cached_by_content(self):
        ep = new_episode(CANCEL4, LINE5, seed=7)
        step(ep, OrchestratorAction.RUN_RESYNTH)
        key = (OrchestratorAction.RUN_RESYNTH, 7, 2, CANCEL4.gates)
        assert key in ep.cache


class TestTrainOrchestrator:
    def test_single_episode_bellman_update(self):
        probe = new_episode(CANCEL4, LINE5, max_steps=1)
        s0 = state_key(probe)
        r = step(probe, OrchestratorAction.RUN_REWRITE).reward
        hyper = OrchestratorHyper(episodes=1, alpha=0.1, gamma=0.9,
                                  epsilon=EpsilonSchedule(0.0, 0.0, 1),
                                  max_steps=1)
        policy, log = train_orchestrator([CANCEL4], LINE5, hyper=hyper)
        assert policy.q[s0][0] == pytest.approx(0.1 * r, abs=1e-12)
        assert len(log) == 1
        assert log[0].reward == pytest.approx(r, abs=1e-12)

    def test_identical_seeds_identical_tables(self):
        rng = np.random.default_rng(3)
        corpus = [random_circuit(rng, 3, 10) for _ in range(3)]
        hyper = OrchestratorHyper(episodes=12, max_steps=3,
                                  epsilon=EpsilonSchedule(1.0, 0.1, 6))
        a, _ = train_orchestrator(corpus, LINE5, hyper=hyper, seed=5)
        b, _ = train_orchestrator(corpus, LINE5, hyper=hyper, seed=5)
        assert a.to_json() == b.to_json()

    def test_log_has_one_row_per_episode(self):
        hyper = OrchestratorHyper(episodes=6, max_steps=2,
                                  epsilon=EpsilonSchedule(0.5, 0.5, 1))
        _, log = train_orchestrator([CANCEL4, LONE_CX], LINE5, hyper=hyper)
        assert [row.episode for row in log] == list(range(6))
        assert all(np.isfinite(row.final_j) for row in log)

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            train_orchestrator([], LINE5)
        with pytest.raises(ValueError):
            train_orchestrator([CANCEL4], LINE5,
                               hyper=OrchestratorHyper(alpha=0.0))
        with pytest.raises(ValueError):
            train_orchestrator([CANCEL4], LINE5,
                               hyper=OrchestratorHyper(episodes=0))
        with pytest.raises(ValueError):
            train_orchestrator([CANCEL4], LINE5,
                               hyper=OrchestratorHyper(gamma=1.5))

    def test_policy_records_corpus_hash(self):
        hyper = OrchestratorHyper(episodes=2, max_steps=1,
                                  epsilon=EpsilonSchedule(0.0, 0.0, 1))
        policy, _ = train_orchestrator([CANCEL4], LINE5, hyper=hyper)
        assert policy.corpus_hash == corpus_hash([CANCEL4])
        assert policy.corpus_hash != corpus_hash([LONE_CX])

    def test_unseen_state_maps_to_zeros(self):
        hyper = OrchestratorHyper(episodes=1, max_steps=1,
                                  epsilon=EpsilonSchedule(0.0, 0.0, 1))
        policy, _ = train_orchestrator([CANCEL4], LINE5, hyper=hyper)
        assert policy.values("g0c0d0f0lnt0") == [0.0, 0.0, 0.0, 0.0]


class TestPolicySerialization:
    def _tiny_policy(self, with_rewrite=False):
        rp = None
        if with_rewrite:
            rp = train_rewrite_policy([CANCEL4], RewriteHyper(
                episodes=4, epsilon=EpsilonSchedule(0.5, 0.1, 2)), seed=1)
        hyper = OrchestratorHyper(episodes=3, max_steps=2,
                                  epsilon=EpsilonSchedule(0.8, 0.2, 2))
        policy, _ = train_orchestrator([CANCEL4, LONE_CX], LINE5, hyper=hyper,
                                       seed=9, rewrite_policy=rp)
        return policy

    def test_round_trip_without_sub_policy(self):
        policy = self._tiny_policy()
        back = OrchestratorPolicy.from_json(policy.to_json())
        assert back.q == policy.q
        assert back.weights == policy.weights
        assert back.hyper == policy.hyper
        assert back.seed == policy.seed
        assert back.corpus_hash == policy.corpus_hash
        assert back.rewrite_policy is None

    def test_round_trip_with_embedded_sub_policy(self):
        policy = self._tiny_policy(with_rewrite=True)
        back = OrchestratorPolicy.from_json(policy.to_json())
        assert back.rewrite_policy is not None
        assert back.rewrite_policy.q == policy.rewrite_policy.q
        assert back.to_json() == policy.to_json()

    def test_json_payload_shape(self):
        raw = json.loads(self._tiny_policy().to_json())
        assert raw["kind"] == "orchestrator"
        assert raw["actions"] == ["rewrite", "resynth", "instantiate", "stop"]
        assert raw["discretization"]["ratio_edges"] == [0.25, 0.5, 0.75, 1.0]
        assert raw["hyper"]["action_cost"] == 0.02

    def test_wrong_kind_rejected(self):
        with pytest.raises(ValueError):
            OrchestratorPolicy.from_json(json.dumps({"kind": "rewrite"}))


@pytest.fixture(scope="module")
def policy():
    rng = np.random.default_rng(21)
    corpus = [CANCEL4] + [random_circuit(rng, 3, 12) for _ in range(3)]
    hyper = OrchestratorHyper(episodes=40, max_steps=4,
                              epsilon=EpsilonSchedule(1.0, 0.1, 20))
    trained, _ = train_orchestrator(corpus, LINE5, hyper=hyper, seed=2)
    return trained


class TestOrchestrate:

    def test_empty_circuit_stops_immediately(self, policy):
        empty = Circuit(3, ())
        out, trace = orchestrate(empty, LINE5, policy)
        assert out is empty
        assert trace == [("stop", 0.0)]

    def test_cancelling_pairs_optimized_away(self, policy):
        out, trace = orchestrate(CANCEL4, LINE5, policy)
        assert len(out) == 0
        assert len(trace) >= 1

    def test_never_worse_than_input(self, policy):
        rng = np.random.default_rng(33)
        for _ in range(6):
            c = random_circuit(rng, 3, 15)
            out, _ = orchestrate(c, LINE5, policy)
            assert cost(out, c, LINE5, policy.weights) \
                <= cost(c, c, LINE5, policy.weights) + 1e-12

    def test_trace_bounded_by_max_steps(self, policy):
        rng = np.random.default_rng(41)
        for _ in range(4):
            c = random_circuit(rng, 3, 12)
            _, trace = orchestrate(c, LINE5, policy, max_steps=5)
            assert 1 <= len(trace) <= 6
            assert all(isinstance(a, str) and np.isfinite(j) for a, j in trace)

    def test_preserves_unitary_up_to_phase(self, policy):
        rng = np.random.default_rng(55)
        for _ in range(5):
            c = random_circuit(rng, 3, 14)
            out, _ = orchestrate(c, LINE5, policy)
            assert equiv_up_to_phase(unitary(out), unitary(c), tol=1e-6)

    def test_deterministic(self, policy):
        rng = np.random.default_rng(60)
        c = random_circuit(rng, 3, 16)
        out1, trace1 = orchestrate(c, LINE5, policy, seed=4)
        out2, trace2 = orchestrate(c, LINE5, policy, seed=4)
        assert out1.gates == out2.gates
        assert trace1 == trace2

    def test_respects_weight_override(self, policy):
        c = CANCEL4
        heavy = CostWeights(0.0, 10.0, 0.0, 0.0)
        out, trace = orchestrate(c, LINE5, policy, w=heavy)
        assert metrics(out).total_gates <= metrics(c).total_gates
        assert all(j >= 0.0 for _, j in trace)
