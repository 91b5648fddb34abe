import ast
import inspect

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crmarl import credit
from crmarl.actions import Action, ActionKind, EnvKind
from crmarl.agents import ToyAgent, ToyPolicyParams, candidate_set
from crmarl.agents.base import ActContext
from crmarl.credit import (OracleAdversary, OracleCritic, attach_rewards, oracle_critic, restore_from_failures,
                           step_state, synthesize_pairs, threshold_rewards)
from crmarl.dag import Dag
from crmarl.env import generate_env, generate_suite, observe, optimal_actions
from crmarl.errors import NoNegative, ValidationError
from crmarl.rollout import RolloutConfig, run_rollouts
from crmarl.types import ActionMatrix, Cell, History, Observation, ElementView, RewardMatrix, StepFlags, StepRecord

from oracles import ceil_threshold, is_optimal


def toy_trajectories(seed=0, n_tasks=12, kind=EnvKind.MOBILE):
    suite = generate_suite(seed, kind, "easy", n_tasks=n_tasks)
    config = RolloutConfig(seed=seed, env_kind=kind)
    params = ToyPolicyParams(np.random.default_rng(seed).normal(0, 0.5, ToyPolicyParams.zeros().weights.shape))
    trajs = run_rollouts(suite, config, [ToyAgent(c, params) for c in config.agent_configs])
    worlds = {w.id: w for w, _ in suite}
    return [attach_rewards(t, OracleCritic(), worlds[t.task.env_id]) for t in trajs], worlds


class Never:
    def negative(self, ctx, chosen, rng):
        raise NoNegative("exhausted")


class Parrot:
    def negative(self, ctx, chosen, rng):
        return chosen, "same"


def test_threshold_boundaries():
    assert threshold_rewards([[0.5]]).cells == ((0,),)
    assert threshold_rewards([[0.51, 1.0, 0.0]]).cells == ((1, 1, 0),)


def test_threshold_sweep_matches_scalar_ceiling():
    grid = [k / 100 for k in range(101)]
    out = threshold_rewards([grid]).cells[0]
    assert list(out) == [ceil_threshold(x) for x in grid]


def test_threshold_rejects_out_of_range():
    with pytest.raises(ValidationError):
        threshold_rewards([[1.2]])
    with pytest.raises(ValidationError):
        threshold_rewards([[-0.1]])


@given(st.floats(0, 1), st.floats(0, 1))
def test_threshold_is_monotone(x, y):
    lo, hi = min(x, y), max(x, y)
    assert threshold_rewards([[lo]]).cells[0][0] <= threshold_rewards([[hi]]).cells[0][0]


def test_oracle_critic_all_optimal_and_all_wait():
    s0, tasks = generate_env(1, EnvKind.MOBILE, "easy")
    task = tasks[0]
    best = sorted(optimal_actions(s0, task), key=str)[0]

    def record(action):
        cell = Cell(action, "")
        return StepRecord(0, observe(s0), s0.to_json(), ActionMatrix(4, 3, ((cell,) * 3,) * 4), action,
                          Dag.empty(4), StepFlags())

    assert oracle_critic(record(best), s0.world, task) == [[1.0] * 3] * 4
    assert oracle_critic(record(Action(ActionKind.WAIT)), s0.world, task) == [[0.0] * 3] * 4


def test_oracle_critic_agrees_with_independent_search():
    trajs, worlds = toy_trajectories(1, 16)
    checked = 0
    for traj in trajs:
        world = worlds[traj.task.env_id]
        for s in traj.steps:
            state = step_state(s, world)
            scores = oracle_critic(s, world, traj.task)
            for i, j, cell in s.action_matrix.scan():
                assert scores[i][j] == float(is_optimal(state, traj.task, cell.action))
            checked += 1
    assert checked >= 50


def test_zero_rewards_give_no_pairs():
    trajs, worlds = toy_trajectories(2, 4)
    traj = trajs[0]
    s = traj.steps[0]
    zeros = RewardMatrix(((0,) * 3,) * 4)
    batch = synthesize_pairs(s, zeros, OracleAdversary(), traj.task, History(), worlds[traj.task.env_id],
                             np.random.default_rng(0))
    assert batch.records == [] and batch.rewarded_cells == 0


def test_one_record_per_rewarded_cell():
    trajs, worlds = toy_trajectories(3, 4)
    traj = trajs[0]
    s = traj.steps[0]
    rewards = RewardMatrix(((1, 1, 0), (0, 1, 0), (1, 0, 0), (0, 0, 1)))
    batch = synthesize_pairs(s, rewards, OracleAdversary(), traj.task, History(), None, np.random.default_rng(0))
    assert len(batch.records) == 5 and not batch.drops
    assert {(r.agent_index, r.round) for r in batch.records} == {(0, 1), (0, 2), (1, 2), (2, 1), (3, 3)}


def test_shape_mismatch_is_rejected():
    trajs, worlds = toy_trajectories(3, 4)
    s = trajs[0].steps[0]
    with pytest.raises(ValidationError):
        synthesize_pairs(s, RewardMatrix(((1,),)), OracleAdversary(), trajs[0].task, History(), None,
                         np.random.default_rng(0))


def test_emitted_pairs_pass_the_audit():
    for seed in range(4):
        trajs, worlds = toy_trajectories(seed, 12, EnvKind.WEB if seed % 2 else EnvKind.MOBILE)
        batch = restore_from_failures(trajs, OracleAdversary(), worlds, np.random.default_rng(seed))
        by_key = {(t.task.id, s.step_index): s for t in trajs for s in t.steps}
        for rec in batch.records:
            src = by_key[(rec.task_id, rec.step)]
            assert src.reward_matrix.cells[rec.agent_index][rec.round - 1] == 1
            assert rec.chosen == src.action_matrix[rec.agent_index, rec.round - 1]
            assert rec.chosen.action != rec.rejected.action
            assert rec.dag_edges == src.dag.edges
            assert rec.score == src.critic_scores[rec.agent_index][rec.round - 1]
        assert len(batch.records) == batch.rewarded_cells - len(batch.drops)


def test_failed_episodes_still_yield_records():
    trajs, worlds = toy_trajectories(5, 16)
    failed = [t for t in trajs if t.outcome_reward == 0 and any(s.reward_matrix.total() for s in t.steps)]
    assert failed
    traj = failed[0]
    batch = restore_from_failures([traj], OracleAdversary(), worlds, np.random.default_rng(0))
    rewarded = sum(s.reward_matrix.total() for s in traj.steps)
    assert len(batch.records) == rewarded - len(batch.drops) and batch.records
    assert all(r.source_outcome == 0 for r in batch.records)


def test_drops_are_counted_not_raised():
    trajs, worlds = toy_trajectories(6, 6)
    for adversary, reason in ((Never(), "exhausted"), (Parrot(), "collision")):
        batch = restore_from_failures(trajs, adversary, worlds, np.random.default_rng(0))
        assert batch.records == [] and len(batch.drops) == batch.rewarded_cells > 0
        assert batch.drop_counts()[reason] == batch.rewarded_cells


def test_pair_filter_never_reads_outcome_reward():
    for fn in (credit.synthesize_pairs, credit.threshold_rewards, credit.oracle_critic):
        tree = ast.parse(inspect.getsource(fn))
        attrs = {n.attr for n in ast.walk(tree) if isinstance(n, ast.Attribute)}
        assert "outcome_reward" not in attrs


def test_oracle_adversary_never_returns_the_chosen_action():
    rng = np.random.default_rng(7)
    s0, tasks = generate_env(7, EnvKind.WEB, "easy")
    obs = observe(s0)
    cands = candidate_set(obs, tasks[0].query, EnvKind.WEB)
    for k in range(1000):
        chosen = cands[k % len(cands)]
        ctx = ActContext(obs, History(), (), tasks[0].query, EnvKind.WEB, state=s0 if k % 2 else None,
                         task=tasks[0] if k % 2 else None)
        try:
            a, _ = OracleAdversary().negative(ctx, chosen, rng)
        except NoNegative:
            continue
        assert a != chosen
        if k % 2:
            assert a not in optimal_actions(s0, tasks[0])


def test_adversary_on_two_and_one_candidates(monkeypatch):
    a, b = Action(ActionKind.CLICK, 0), Action(ActionKind.CLICK, 1)
    ctx = ActContext(Observation("p", ()), History(), (), "", EnvKind.WEB)
    monkeypatch.setattr(credit, "candidate_set", lambda obs, q, kind: (a, b))
    assert all(OracleAdversary().negative(ctx, a, np.random.default_rng(s))[0] == b for s in range(20))
    monkeypatch.setattr(credit, "candidate_set", lambda obs, q, kind: (a,))
    with pytest.raises(NoNegative) as err:
        OracleAdversary().negative(ctx, a, np.random.default_rng(0))
    assert err.value.reason == "exhausted"


def test_optimal_actions_are_never_negatives(monkeypatch):
    s0, tasks = generate_env(0, EnvKind.MOBILE, "easy")
    obs = observe(s0)
    pool = candidate_set(obs, tasks[0].query, EnvKind.MOBILE)
    ctx = ActContext(obs, History(), (), tasks[0].query, EnvKind.MOBILE, state=s0, task=tasks[0])
    monkeypatch.setattr(credit, "optimal_actions", lambda state, task: frozenset(pool[1:]))
    with pytest.raises(NoNegative):
        OracleAdversary().negative(ctx, pool[0], np.random.default_rng(0))
