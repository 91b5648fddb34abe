"""Episode execution: DAG-ordered conversation rounds, action matrices,
majority voting and environment stepping."""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TextIO

import numpy as np

from .actions import UNKNOWN_ACTION, Action, EnvKind, canonicalize_action, is_valid
from .agents.base import ActContext, Agent, AgentConfig, default_configs
from .dag import Dag, predecessors, sample_dag, topological_order
from .env.model import EnvState, FormWorld, observe, outcome_reward, reset, step
from .env.oracle import optimal_actions, optimal_path
from .errors import AuthError, ConfigError, NoValidAction
from .types import (ActionMatrix, Cell, History, Message, Observation, StepFlags, StepRecord, Task,
                    Trajectory)

log = logging.getLogger(__name__)

DAG_POLICIES = ("fixed", "resample_per_episode", "resample_per_step")
_DAG_STREAM = 0xDA6


@dataclass(frozen=True)
class RolloutConfig:
    n: int = 4
    m: int = 3
    dag_policy: str = "resample_per_episode"
    edge_prob: float = 0.5
    seed: int = 0
    env_kind: EnvKind = EnvKind.MOBILE
    agent_configs: tuple[AgentConfig, ...] = field(default=())

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ConfigError("n and m must be at least 1")
        if self.dag_policy not in DAG_POLICIES:
            raise ConfigError(f"dag policy must be one of {DAG_POLICIES}")
        if not 0.0 <= self.edge_prob <= 1.0:
            raise ConfigError("edge probability must be in [0, 1]")
        object.__setattr__(self, "env_kind", EnvKind(self.env_kind))
        if not self.agent_configs:
            object.__setattr__(self, "agent_configs", tuple(default_configs(self.n)))
        if len(self.agent_configs) != self.n:
            raise ConfigError(f"{len(self.agent_configs)} agent configs for n={self.n}")

    def to_json(self) -> dict[str, Any]:
        return {"n": self.n, "m": self.m, "dag_policy": self.dag_policy, "edge_prob": self.edge_prob,
                "seed": self.seed, "env_kind": self.env_kind.value,
                "agent_configs": [c.to_json() for c in self.agent_configs]}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> RolloutConfig:
        d = dict(d)
        d["agent_configs"] = tuple(AgentConfig.from_json(c) for c in d.get("agent_configs", ()))
        return cls(**d)


def step_rng(seed: int, episode: int, t: int, agent: int, round_: int) -> np.random.Generator:
    """Independent stream per (seed, episode, step, agent, round)."""
    return np.random.default_rng([seed, episode, t, agent, round_])


def episode_dag(config: RolloutConfig, episode: int, t: int | None = None) -> Dag:
    if config.dag_policy == "fixed":
        key = [config.seed, _DAG_STREAM]
    elif config.dag_policy == "resample_per_episode" or t is None:
        key = [config.seed, _DAG_STREAM, episode]
    else:
        key = [config.seed, _DAG_STREAM, episode, t]
    return sample_dag(config.n, config.edge_prob, np.random.default_rng(key))


@dataclass(frozen=True)
class SharedContext:
    """What every agent sees at a step, plus the privileged state for scripted oracles."""

    observation: Observation
    history: History
    query: str
    env_kind: EnvKind
    state: EnvState | None = None
    task: Task | None = None


def inbox_for(dag: Dag, i: int, current: dict[int, Message], previous: Sequence[Message | None]
              ) -> tuple[Message, ...]:
    """Predecessors' current-round messages, then the agent's own previous-round message."""
    box = [current[p] for p in sorted(predecessors(dag, i)) if p in current]
    if previous and previous[i] is not None:
        box.append(previous[i])
    return tuple(box)


def run_round(agents: Sequence[Agent], dag: Dag, shared: SharedContext, j: int,
              prev_outputs: Sequence[Message | None], rngs: Sequence[np.random.Generator]
              ) -> tuple[list[Cell], list[Message], list[tuple[Message, ...]]]:
    """Invoke every agent once in topological order for round ``j`` (one-based).

    Returns the column of cells, the messages produced and the inboxes, all
    indexed by agent. A failing agent contributes an UNKNOWN cell.
    """
    n = len(agents)
    current: dict[int, Message] = {}
    cells: list[Cell | None] = [None] * n
    inboxes: list[tuple[Message, ...]] = [()] * n
    for i in topological_order(dag):
        inbox = inbox_for(dag, i, current, prev_outputs)
        ctx = ActContext(shared.observation, shared.history, inbox, shared.query, shared.env_kind,
                         agent_index=i, round=j, state=shared.state, task=shared.task)
        try:
            action, text = agents[i].act(ctx, rngs[i])
            action = canonicalize_action(action)
        except AuthError:
            raise
        except Exception as exc:  # noqa: BLE001 - any agent fault becomes an UNKNOWN vote
            log.warning("agent %d failed in round %d: %s", i, j, exc)
            action, text = UNKNOWN_ACTION, f"error: {exc}"
        cells[i] = Cell(action, text)
        inboxes[i] = inbox
        current[i] = Message(i, j, text, action)
    return cells, [current[i] for i in range(n)], inboxes


def vote_counts(matrix: ActionMatrix, env_kind: EnvKind) -> dict[Action, int]:
    """Counts of valid actions, keyed in order of first appearance in the (i, j) scan."""
    counts: dict[Action, int] = {}
    for _, _, cell in matrix.scan():
        if is_valid(cell.action, env_kind):
            counts[cell.action] = counts.get(cell.action, 0) + 1
    return counts


def aggregate(matrix: ActionMatrix, env_kind: EnvKind) -> Action:
    """Majority vote over valid cells; ties go to the earliest cell in agent-major order."""
    counts = vote_counts(matrix, env_kind)
    if not counts:
        raise NoValidAction("no cell of the action matrix is a valid action")
    best, best_count = None, -1
    for action, c in counts.items():
        if c > best_count:
            best, best_count = action, c
    return best


def run_step(state: EnvState, task: Task, config: RolloutConfig, dag: Dag, agents: Sequence[Agent],
             history: History, episode: int = 0, t: int = 0
             ) -> tuple[StepRecord, EnvState, History]:
    obs = observe(state)
    shared = SharedContext(obs, history, task.query, config.env_kind, state, task)
    columns: list[list[Cell]] = []
    inbox_cols: list[list[tuple[Message, ...]]] = []
    prev: list[Message | None] = [None] * config.n
    for j in range(1, config.m + 1):
        rngs = [step_rng(config.seed, episode, t, i, j) for i in range(config.n)]
        cells, prev, inboxes = run_round(agents, dag, shared, j, prev, rngs)
        columns.append(cells)
        inbox_cols.append(inboxes)
    matrix = ActionMatrix.from_columns(columns)
    inboxes_by_agent = tuple(tuple(inbox_cols[j][i] for j in range(config.m)) for i in range(config.n))
    try:
        action = aggregate(matrix, config.env_kind)
    except NoValidAction:
        flags = StepFlags(invalid=True, declared_done=state.done_declared, no_valid_action=True)
        record = StepRecord(t, obs, state.to_json(), matrix, None, dag, flags, inboxes_by_agent)
        return record, state, history.append(obs, UNKNOWN_ACTION)
    result = step(state, action)
    flags = StepFlags(result.changed, result.invalid, result.declared_done)
    record = StepRecord(t, obs, state.to_json(), matrix, action, dag, flags, inboxes_by_agent)
    return record, result.state, history.append(obs, action)


def run_episode(task: Task, config: RolloutConfig, agents: Sequence[Agent], world: FormWorld,
                episode: int = 0, dag: Dag | None = None) -> Trajectory:
    """Run until the goal holds, completion is declared, or ``task.max_steps`` is reached."""
    if len(agents) != config.n:
        raise ConfigError(f"{len(agents)} agents for n={config.n}")
    state, _ = reset(world, task)
    history = History()
    steps: list[StepRecord] = []
    ep_dag = dag or episode_dag(config, episode)
    reason = "max_steps"
    for t in range(task.max_steps):
        d = episode_dag(config, episode, t) if dag is None and config.dag_policy == "resample_per_step" else ep_dag
        record, state, history = run_step(state, task, config, d, agents, history, episode, t)
        steps.append(record)
        if outcome_reward(state, task):
            reason = "goal"
            break
        if state.done_declared:
            reason = "declared_done"
            break
    return Trajectory(task, tuple(steps), outcome_reward(state, task), reason)


def run_step_eval(task: Task, config: RolloutConfig, agents: Sequence[Agent], world: FormWorld,
                  episode: int = 0) -> Trajectory:
    """Teacher-forced evaluation along a shortest plan.

    At each state of the plan the system votes; the state then advances by
    the plan's action regardless of the vote, and the history records the
    plan's action. The outcome is 1 only if every vote was optimal.
    """
    state, _ = reset(world, task)
    history = History()
    steps: list[StepRecord] = []
    ep_dag = episode_dag(config, episode)
    all_ok = True
    for t, planned in enumerate(optimal_path(state, task)):
        d = episode_dag(config, episode, t) if config.dag_policy == "resample_per_step" else ep_dag
        record, _, _ = run_step(state, task, config, d, agents, history, episode, t)
        steps.append(record)
        all_ok &= record.aggregated_action in optimal_actions(state, task)
        history = history.append(record.observation, planned)
        state = step(state, planned).state
    return Trajectory(task, tuple(steps), int(all_ok), "goal")


Suite = Sequence[tuple[FormWorld, Sequence[Task]]]


def suite_tasks(suite: Suite) -> list[tuple[FormWorld, Task]]:
    return [(world, task) for world, tasks in suite for task in tasks]


def run_rollouts(suite: Suite, config: RolloutConfig, agents: Sequence[Agent], episode_offset: int = 0,
                 mode: str = "online") -> list[Trajectory]:
    runner = run_episode if mode == "online" else run_step_eval
    return [runner(task, config, agents, world, episode_offset + k)
            for k, (world, task) in enumerate(suite_tasks(suite))]


def success_rate(trajectories: Sequence[Trajectory]) -> float:
    if not trajectories:
        return 0.0
    return sum(t.outcome_reward for t in trajectories) / len(trajectories)


def step_success_rate(trajectories: Sequence[Trajectory], worlds: dict[str, FormWorld]) -> float:
    """Fraction of steps whose aggregated action starts some shortest plan."""
    hits = total = 0
    for traj in trajectories:
        world = worlds[traj.task.env_id]
        for s in traj.steps:
            total += 1
            if s.aggregated_action is not None:
                st = EnvState.from_json(s.state, world)
                hits += s.aggregated_action in optimal_actions(st, traj.task)
    return hits / total if total else 0.0


def _dump(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_trajectory_log(fh: TextIO, config: RolloutConfig, trajectories: Iterable[Trajectory],
                         extra: dict[str, Any] | None = None) -> None:
    """JSON lines: a header, then episode_start / step / episode_end lines per episode."""
    header = {"type": "header", "config": config.to_json()}
    if extra:
        header.update(extra)
    fh.write(_dump(header) + "\n")
    for k, traj in enumerate(trajectories):
        fh.write(_dump({"type": "episode_start", "episode": k, "task": traj.task.to_json()}) + "\n")
        for s in traj.steps:
            fh.write(_dump({"type": "step", "episode": k, "record": s.to_json()}) + "\n")
        fh.write(_dump({"type": "episode_end", "episode": k, "outcome_reward": traj.outcome_reward,
                        "termination_reason": traj.termination_reason, "steps": len(traj.steps)}) + "\n")


def read_trajectory_log(path: str | Path) -> tuple[dict[str, Any], list[Trajectory]]:
    header: dict[str, Any] = {}
    out: list[Trajectory] = []
    task = None
    steps: list[StepRecord] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            kind = rec["type"]
            if kind == "header":
                header = rec
            elif kind == "episode_start":
                task, steps = Task.from_json(rec["task"]), []
            elif kind == "step":
                steps.append(StepRecord.from_json(rec["record"]))
            elif kind == "episode_end":
                out.append(Trajectory(task, tuple(steps), rec["outcome_reward"], rec["termination_reason"]))
    return header, out
