"""Credit re-assignment: binary reward matrices from critic scores and
preference pairs from rewarded cells.

The environment's outcome reward is never consulted here; records from
failed episodes are kept like any other.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

import numpy as np

from .actions import Action, canonicalize_action, render_action
from .agents.base import ActContext
from .agents.features import candidate_set
from .env.model import EnvState, FormWorld
from .env.oracle import optimal_actions
from .errors import NoNegative, ValidationError
from .types import Cell, PrefContext, PreferenceRecord, RewardMatrix, StepRecord, Task, Trajectory

log = logging.getLogger(__name__)

DROP_REASONS = ("collision", "exhausted", "adv_failure")


def threshold_rewards(scores: Sequence[Sequence[float]]) -> RewardMatrix:
    """``ceil(x - 0.5)`` per cell: 0 for x <= 0.5, 1 above."""
    rows = []
    for row in scores:
        out = []
        for x in row:
            x = float(x)
            if not 0.0 <= x <= 1.0:
                raise ValidationError("score-range", f"critic score {x!r} outside [0, 1]")
            out.append(int(math.ceil(x - 0.5)))
        rows.append(tuple(out))
    return RewardMatrix(tuple(rows))


def step_state(step: StepRecord, world: FormWorld) -> EnvState:
    return EnvState.from_json(step.state, world)


def oracle_critic(step: StepRecord, world: FormWorld, task: Task) -> list[list[float]]:
    """1.0 for cells whose action is a first move of some shortest plan, else 0.0."""
    best = optimal_actions(step_state(step, world), task)
    return [[1.0 if c.action in best else 0.0 for c in row] for row in step.action_matrix.cells]


class Adversary(Protocol):
    def negative(self, ctx: ActContext, chosen: Action, rng: np.random.Generator) -> tuple[Action, str]: ...


@dataclass(frozen=True)
class Drop:
    step: int
    agent_index: int
    round: int
    reason: str


@dataclass
class PairBatch:
    records: list[PreferenceRecord] = field(default_factory=list)
    drops: list[Drop] = field(default_factory=list)
    rewarded_cells: int = 0

    def extend(self, other: PairBatch) -> None:
        self.records.extend(other.records)
        self.drops.extend(other.drops)
        self.rewarded_cells += other.rewarded_cells

    def drop_counts(self) -> dict[str, int]:
        counts = {r: 0 for r in DROP_REASONS}
        for d in self.drops:
            counts[d.reason] += 1
        return counts


def cell_context(step: StepRecord, i: int, j: int, task: Task, history, world: FormWorld | None) -> ActContext:
    state = step_state(step, world) if world is not None else None
    inbox = step.inboxes[i][j] if step.inboxes else ()
    return ActContext(step.observation, history, tuple(inbox), task.query, task.env_kind,
                      agent_index=i, round=j + 1, state=state, task=task)


def synthesize_pairs(step: StepRecord, rewards: RewardMatrix, adversary: Adversary, task: Task,
                     history, world: FormWorld | None, rng: np.random.Generator,
                     source_outcome: int | None = None) -> PairBatch:
    """One adversarial negative per rewarded cell; failures are dropped and counted."""
    n, m = step.action_matrix.n, step.action_matrix.m
    if rewards.shape != (n, m):
        raise ValidationError("shape", f"reward matrix {rewards.shape} vs action matrix {(n, m)}")
    batch = PairBatch()
    scores = step.critic_scores
    for i, j in rewards.rewarded():
        batch.rewarded_cells += 1
        chosen = step.action_matrix[i, j]
        ctx = cell_context(step, i, j, task, history, world)
        try:
            neg, text = adversary.negative(ctx, chosen.action, rng)
        except NoNegative as exc:
            batch.drops.append(Drop(step.step_index, i, j + 1, exc.reason))
            continue
        neg = canonicalize_action(neg)
        if neg == chosen.action:
            batch.drops.append(Drop(step.step_index, i, j + 1, "collision"))
            continue
        batch.records.append(PreferenceRecord(
            context=PrefContext.build(ctx.observation, history, ctx.messages, task.query, task.env_kind),
            chosen=chosen,
            rejected=Cell(neg, text),
            agent_index=i,
            round=j + 1,
            step=step.step_index,
            task_id=task.id,
            dag_edges=step.dag.edges,
            score=float(scores[i][j]) if scores is not None else 1.0,
            source_outcome=source_outcome,
        ))
    if batch.drops:
        log.debug("step %d: dropped %d pairs", step.step_index, len(batch.drops))
    return batch


def restore_from_failures(trajectories: Sequence[Trajectory], adversary: Adversary,
                          worlds: dict[str, FormWorld], rng: np.random.Generator) -> PairBatch:
    """Synthesize pairs from every scored step of every trajectory, successful or not."""
    out = PairBatch()
    for traj in trajectories:
        world = worlds.get(traj.task.env_id)
        for t, step in enumerate(traj.steps):
            if step.reward_matrix is None:
                continue
            out.extend(synthesize_pairs(step, step.reward_matrix, adversary, traj.task,
                                        traj.history_before(t), world, rng,
                                        source_outcome=traj.outcome_reward))
    return out


def attach_rewards(traj: Trajectory, critic, world: FormWorld | None) -> Trajectory:
    """Score every step with ``critic`` and store scores and thresholded rewards."""
    steps = []
    for t, step in enumerate(traj.steps):
        scores = critic.score(step, traj.task, traj.history_before(t), world)
        rewards = threshold_rewards(scores)
        steps.append(replace(step, critic_scores=tuple(tuple(r) for r in scores), reward_matrix=rewards))
    return replace(traj, steps=tuple(steps))


class OracleAdversary:
    """Uniform over the candidate set minus the chosen action and every optimal action.

    Without privileged state only the chosen action is excluded.
    """

    def negative(self, ctx: ActContext, chosen: Action, rng: np.random.Generator) -> tuple[Action, str]:
        pool = [a for a in candidate_set(ctx.observation, ctx.query, ctx.env_kind) if a != chosen]
        if ctx.state is not None and ctx.task is not None:
            best = optimal_actions(ctx.state, ctx.task)
            pool = [a for a in pool if a not in best]
        if not pool:
            raise NoNegative("exhausted", "no non-optimal candidate left")
        a = pool[int(rng.integers(len(pool)))]
        return a, f"{render_action(a)} (adversarial)"


class OracleCritic:
    def score(self, step: StepRecord, task: Task, history, world: FormWorld | None) -> list[list[float]]:
        if world is None:
            raise ValidationError("world", "oracle critic needs the environment")
        return oracle_critic(step, world, task)
