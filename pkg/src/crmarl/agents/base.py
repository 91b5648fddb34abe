from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

from ..actions import Action, EnvKind
from ..types import History, Message, Observation, PrefContext, Task

if TYPE_CHECKING:
    from ..env.model import EnvState

BACKENDS = ("scripted", "remote", "toy")
DEFAULT_TEMPERATURES = (0.1, 0.3, 0.5, 0.8)


@dataclass(frozen=True)
class AgentConfig:
    backend: str = "toy"
    temperature: float = 0.1
    template_id: str = "policy"
    model: str | None = None
    agent_index: int = 0

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def to_json(self) -> dict[str, Any]:
        return {"backend": self.backend, "temperature": self.temperature,
                "template_id": self.template_id, "model": self.model, "agent_index": self.agent_index}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> AgentConfig:
        return cls(**d)


def default_temperatures(n: int) -> tuple[float, ...]:
    if n == len(DEFAULT_TEMPERATURES):
        return DEFAULT_TEMPERATURES
    if n == 1:
        return (DEFAULT_TEMPERATURES[0],)
    return tuple(float(round(t, 4)) for t in np.linspace(0.1, 0.8, n))


def default_configs(n: int, backend: str = "toy", model: str | None = None) -> list[AgentConfig]:
    return [AgentConfig(backend, t, model=model, agent_index=i)
            for i, t in enumerate(default_temperatures(n))]


@dataclass(frozen=True)
class ActContext:
    """Inputs of one agent invocation.

    ``state`` and ``task`` are privileged: only oracle-style scripted agents
    may read them.
    """

    observation: Observation
    history: History
    messages: tuple[Message, ...]
    query: str
    env_kind: EnvKind
    agent_index: int = 0
    round: int = 1
    state: EnvState | None = field(default=None, compare=False)
    task: Task | None = field(default=None, compare=False)

    def pref_context(self) -> PrefContext:
        return PrefContext.build(self.observation, self.history, self.messages, self.query, self.env_kind)


class Agent:
    """Policy agent interface: ``act`` returns an action and its raw response text."""

    config: AgentConfig

    def act(self, ctx: ActContext, rng: np.random.Generator) -> tuple[Action, str]:
        raise NotImplementedError
