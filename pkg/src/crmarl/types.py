"""Domain values shared by the environment, agents, rollouts and training.

Every type is a frozen dataclass with ``to_json``/``from_json``. Matrix cells
are indexed ``[agent][round]`` with zero-based rounds; ``Message.round`` and
``PreferenceRecord.round`` are one-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator

from .actions import UNKNOWN_ACTION, Action, EnvKind, render_action
from .dag import Dag

RENDER_VERSION = "formworld-render/1"
PREFERENCE_SCHEMA = "crmarl.preference/1"


@dataclass(frozen=True)
class ElementView:
    index: int
    kind: str
    label: str
    state: str = ""
    options: tuple[str, ...] = ()

    def to_json(self) -> dict[str, Any]:
        return {"index": self.index, "kind": self.kind, "label": self.label,
                "state": self.state, "options": list(self.options)}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> ElementView:
        return cls(d["index"], d["kind"], d["label"], d.get("state", ""), tuple(d.get("options", ())))


@dataclass(frozen=True)
class Observation:
    page_name: str
    elements: tuple[ElementView, ...]
    task_hint: str = RENDER_VERSION

    def __post_init__(self):
        for k, el in enumerate(self.elements):
            if el.index != k:
                raise ValueError("element indices must be 0..k-1 in order")

    def render(self) -> str:
        lines = [f"Page: {self.page_name}"]
        for el in self.elements:
            line = f"[{el.index}] {el.kind} \"{el.label}\""
            if el.state:
                line += f" ({el.state})"
            if el.options:
                line += " options: " + " | ".join(el.options)
            lines.append(line)
        return "\n".join(lines)

    def to_json(self) -> dict[str, Any]:
        return {"page_name": self.page_name, "elements": [e.to_json() for e in self.elements],
                "task_hint": self.task_hint}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> Observation:
        return cls(d["page_name"], tuple(ElementView.from_json(e) for e in d["elements"]),
                   d.get("task_hint", RENDER_VERSION))


ATOM_KINDS = ("on_page", "value_equals", "checked", "selected", "answered")


@dataclass(frozen=True)
class GoalAtom:
    kind: str
    page: int | None = None
    element: int | None = None
    text: str | None = None

    def __post_init__(self):
        if self.kind not in ATOM_KINDS:
            raise ValueError(f"unknown goal atom {self.kind!r}")

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "page": self.page, "element": self.element, "text": self.text}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> GoalAtom:
        return cls(d["kind"], d.get("page"), d.get("element"), d.get("text"))


@dataclass(frozen=True)
class Task:
    id: str
    query: str
    env_kind: EnvKind
    goal: tuple[GoalAtom, ...]
    max_steps: int
    env_id: str = ""

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not self.goal:
            raise ValueError("goal needs at least one atom")

    @property
    def goal_strings(self) -> tuple[str, ...]:
        out: list[str] = []
        for atom in self.goal:
            if atom.kind in ("value_equals", "selected", "answered") and atom.text and atom.text not in out:
                out.append(atom.text)
        return tuple(out)

    def to_json(self) -> dict[str, Any]:
        return {"id": self.id, "query": self.query, "env_kind": self.env_kind.value,
                "goal": [a.to_json() for a in self.goal], "max_steps": self.max_steps,
                "env_id": self.env_id}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> Task:
        return cls(d["id"], d["query"], EnvKind(d["env_kind"]),
                   tuple(GoalAtom.from_json(a) for a in d["goal"]), d["max_steps"], d.get("env_id", ""))


@dataclass(frozen=True)
class History:
    entries: tuple[tuple[Observation, Action], ...] = ()

    def append(self, obs: Observation, action: Action) -> History:
        return History(self.entries + ((obs, action),))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def actions(self) -> tuple[Action, ...]:
        return tuple(a for _, a in self.entries)

    def render(self) -> str:
        if not self.entries:
            return "(no previous steps)"
        return "\n".join(f"{t}. on {o.page_name}: {render_action(a)}"
                         for t, (o, a) in enumerate(self.entries, 1))

    def to_json(self) -> list[Any]:
        return [{"observation": o.to_json(), "action": a.to_json()} for o, a in self.entries]

    @classmethod
    def from_json(cls, d: list[Any]) -> History:
        return cls(tuple((Observation.from_json(e["observation"]), Action.from_json(e["action"])) for e in d))


@dataclass(frozen=True)
class Message:
    sender: int
    round: int
    body: str
    action: Action | None = None

    def to_json(self) -> dict[str, Any]:
        return {"sender": self.sender, "round": self.round, "body": self.body,
                "action": self.action.to_json() if self.action is not None else None}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> Message:
        a = d.get("action")
        return cls(d["sender"], d["round"], d["body"], Action.from_json(a) if a is not None else None)


def render_messages(messages: tuple[Message, ...] | list[Message]) -> str:
    if not messages:
        return "(no messages)"
    return "\n".join(f"agent {m.sender} (round {m.round}): {m.body}" for m in messages)


@dataclass(frozen=True)
class Cell:
    action: Action
    response: str

    def to_json(self) -> dict[str, Any]:
        return {"action": self.action.to_json(), "response": self.response}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> Cell:
        return cls(Action.from_json(d["action"]), d["response"])


@dataclass(frozen=True)
class ActionMatrix:
    n: int
    m: int
    cells: tuple[tuple[Cell, ...], ...]

    def __post_init__(self):
        if len(self.cells) != self.n or any(len(row) != self.m for row in self.cells):
            raise ValueError(f"action matrix must be {self.n}x{self.m}")

    def __getitem__(self, ij: tuple[int, int]) -> Cell:
        i, j = ij
        return self.cells[i][j]

    def scan(self) -> Iterator[tuple[int, int, Cell]]:
        """Agent-major scan: i ascending, then j ascending."""
        for i, row in enumerate(self.cells):
            for j, cell in enumerate(row):
                yield i, j, cell

    @classmethod
    def from_columns(cls, columns: list[list[Cell]]) -> ActionMatrix:
        m = len(columns)
        n = len(columns[0]) if columns else 0
        return cls(n, m, tuple(tuple(columns[j][i] for j in range(m)) for i in range(n)))

    def render(self) -> str:
        return "\n".join(
            f"agent {i}: " + " | ".join(f"r{j + 1}={render_action(c.action)}" for j, c in enumerate(row))
            for i, row in enumerate(self.cells))

    def to_json(self) -> dict[str, Any]:
        return {"n": self.n, "m": self.m, "cells": [[c.to_json() for c in row] for row in self.cells]}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> ActionMatrix:
        return cls(d["n"], d["m"], tuple(tuple(Cell.from_json(c) for c in row) for row in d["cells"]))


@dataclass(frozen=True)
class RewardMatrix:
    cells: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for row in self.cells:
            for v in row:
                if v not in (0, 1):
                    raise ValueError("reward cells must be 0 or 1")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.cells), (len(self.cells[0]) if self.cells else 0)

    def rewarded(self) -> list[tuple[int, int]]:
        return [(i, j) for i, row in enumerate(self.cells) for j, v in enumerate(row) if v == 1]

    def total(self) -> int:
        return sum(map(sum, self.cells))

    def to_json(self) -> list[list[int]]:
        return [list(r) for r in self.cells]

    @classmethod
    def from_json(cls, d: list[list[int]]) -> RewardMatrix:
        return cls(tuple(tuple(int(v) for v in r) for r in d))


@dataclass(frozen=True)
class StepFlags:
    changed: bool = False
    invalid: bool = False
    declared_done: bool = False
    no_valid_action: bool = False

    def to_json(self) -> dict[str, bool]:
        return {"changed": self.changed, "invalid": self.invalid,
                "declared_done": self.declared_done, "no_valid_action": self.no_valid_action}

    @classmethod
    def from_json(cls, d: dict[str, bool]) -> StepFlags:
        return cls(**d)


@dataclass(frozen=True)
class StepRecord:
    """One environment step.

    ``state`` is the pre-step environment snapshot and ``inboxes[i][j]`` the
    messages agent ``i`` saw in round ``j``; both are kept so credit
    re-assignment can run after the episode.
    """

    step_index: int
    observation: Observation
    state: dict[str, Any]
    action_matrix: ActionMatrix
    aggregated_action: Action | None
    dag: Dag
    flags: StepFlags
    inboxes: tuple[tuple[tuple[Message, ...], ...], ...] = ()
    reward_matrix: RewardMatrix | None = None
    critic_scores: tuple[tuple[float, ...], ...] | None = None

    @property
    def dag_edges(self) -> tuple[tuple[int, int], ...]:
        return self.dag.edges

    def to_json(self) -> dict[str, Any]:
        return {
            "step_index": self.step_index,
            "observation": self.observation.to_json(),
            "state": self.state,
            "action_matrix": self.action_matrix.to_json(),
            "aggregated_action": self.aggregated_action.to_json() if self.aggregated_action else None,
            "dag": self.dag.to_json(),
            "flags": self.flags.to_json(),
            "inboxes": [[[msg.to_json() for msg in box] for box in row] for row in self.inboxes],
            "reward_matrix": self.reward_matrix.to_json() if self.reward_matrix else None,
            "critic_scores": [list(r) for r in self.critic_scores] if self.critic_scores else None,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> StepRecord:
        agg = d.get("aggregated_action")
        rm = d.get("reward_matrix")
        cs = d.get("critic_scores")
        return cls(
            step_index=d["step_index"],
            observation=Observation.from_json(d["observation"]),
            state=d["state"],
            action_matrix=ActionMatrix.from_json(d["action_matrix"]),
            aggregated_action=Action.from_json(agg) if agg else None,
            dag=Dag.from_json(d["dag"]),
            flags=StepFlags.from_json(d["flags"]),
            inboxes=tuple(tuple(tuple(Message.from_json(m) for m in box) for box in row)
                          for row in d.get("inboxes", [])),
            reward_matrix=RewardMatrix.from_json(rm) if rm is not None else None,
            critic_scores=tuple(tuple(float(v) for v in r) for r in cs) if cs is not None else None,
        )


TERMINATION_REASONS = ("goal", "declared_done", "max_steps")


@dataclass(frozen=True)
class Trajectory:
    task: Task
    steps: tuple[StepRecord, ...]
    outcome_reward: int
    termination_reason: str

    def __post_init__(self):
        if self.termination_reason not in TERMINATION_REASONS:
            raise ValueError(f"bad termination reason {self.termination_reason!r}")
        if self.outcome_reward not in (0, 1):
            raise ValueError("outcome reward must be 0 or 1")

    def history_before(self, t: int) -> History:
        return History(tuple((s.observation, s.aggregated_action or UNKNOWN_ACTION)
                             for s in self.steps[:t]))

    def to_json(self) -> dict[str, Any]:
        return {"task": self.task.to_json(), "steps": [s.to_json() for s in self.steps],
                "outcome_reward": self.outcome_reward, "termination_reason": self.termination_reason}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> Trajectory:
        return cls(Task.from_json(d["task"]), tuple(StepRecord.from_json(s) for s in d["steps"]),
                   d["outcome_reward"], d["termination_reason"])


@dataclass(frozen=True)
class PrefContext:
    """Everything a policy conditions on for one (agent, round) cell."""

    observation: Observation
    history: tuple[tuple[str, Action], ...]  # (page name, aggregated action)
    messages: tuple[Message, ...]
    query: str
    env_kind: EnvKind = EnvKind.MOBILE

    @property
    def history_text(self) -> str:
        if not self.history:
            return "(no previous steps)"
        return "\n".join(f"{t}. on {p}: {render_action(a)}" for t, (p, a) in enumerate(self.history, 1))

    @property
    def observation_text(self) -> str:
        return self.observation.render()

    @property
    def messages_text(self) -> str:
        return render_messages(self.messages)

    def to_json(self) -> dict[str, Any]:
        return {
            "observation": self.observation.to_json(),
            "observation_text": self.observation_text,
            "history": [{"page": p, "action": a.to_json()} for p, a in self.history],
            "history_text": self.history_text,
            "messages": [m.to_json() for m in self.messages],
            "messages_text": self.messages_text,
            "query": self.query,
            "env_kind": self.env_kind.value,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> PrefContext:
        return cls(Observation.from_json(d["observation"]),
                   tuple((h["page"], Action.from_json(h["action"])) for h in d["history"]),
                   tuple(Message.from_json(m) for m in d["messages"]),
                   d["query"], EnvKind(d.get("env_kind", "mobile")))

    @classmethod
    def build(cls, observation: Observation, history: History, messages, query: str,
              env_kind: EnvKind) -> PrefContext:
        return cls(observation, tuple((o.page_name, a) for o, a in history.entries),
                   tuple(messages), query, EnvKind(env_kind))


@dataclass(frozen=True)
class PreferenceRecord:
    context: PrefContext
    chosen: Cell
    rejected: Cell
    agent_index: int
    round: int
    step: int
    task_id: str
    dag_edges: tuple[tuple[int, int], ...]
    score: float
    source_outcome: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.chosen.action == self.rejected.action:
            raise ValueError("chosen and rejected actions must differ")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("critic score must be in [0, 1]")

    def to_json(self) -> dict[str, Any]:
        return {
            "schema": PREFERENCE_SCHEMA,
            "context": self.context.to_json(),
            "chosen": self.chosen.to_json(),
            "rejected": self.rejected.to_json(),
            "agent_index": self.agent_index,
            "round": self.round,
            "step": self.step,
            "task_id": self.task_id,
            "dag_edges": [list(e) for e in self.dag_edges],
            "score": self.score,
            "source_outcome": self.source_outcome,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> PreferenceRecord:
        return cls(PrefContext.from_json(d["context"]), Cell.from_json(d["chosen"]),
                   Cell.from_json(d["rejected"]), d["agent_index"], d["round"], d["step"],
                   d["task_id"], tuple(tuple(e) for e in d["dag_edges"]), float(d["score"]),
                   d.get("source_outcome"))
