"""Deterministic scripted agents for tests and offline pipelines."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..actions import Action, render_action
from ..env.oracle import optimal_actions, sort_actions
from .base import ActContext, Agent, AgentConfig


class OracleAgent(Agent):
    """Reads the privileged state and returns the first shortest-path action."""

    def __init__(self, config: AgentConfig | None = None):
        self.config = config or AgentConfig("scripted", 0.0)

    def act(self, ctx: ActContext, rng: np.random.Generator) -> tuple[Action, str]:
        if ctx.state is None or ctx.task is None:
            raise ValueError("OracleAgent needs the privileged state and task")
        action = sort_actions(optimal_actions(ctx.state, ctx.task))[0]
        return action, f"{render_action(action)} (oracle)"


class ConstantAgent(Agent):
    def __init__(self, action: Action, config: AgentConfig | None = None):
        self.action = action
        self.config = config or AgentConfig("scripted", 0.0)

    def act(self, ctx: ActContext, rng: np.random.Generator) -> tuple[Action, str]:
        return self.action, render_action(self.action)


class RuleAgent(Agent):
    """Looks the action up with a user rule ``(ctx) -> Action``."""

    def __init__(self, rule: Callable[[ActContext], Action], config: AgentConfig | None = None):
        self.rule = rule
        self.config = config or AgentConfig("scripted", 0.0)

    def act(self, ctx: ActContext, rng: np.random.Generator) -> tuple[Action, str]:
        action = self.rule(ctx)
        return action, render_action(action)


class TableAgent(RuleAgent):
    """Action table keyed by ``(page name, step index)``, falling back to ``default``."""

    def __init__(self, table: dict[tuple[str, int], Action], default: Action,
                 config: AgentConfig | None = None):
        super().__init__(lambda ctx: table.get((ctx.observation.page_name, len(ctx.history)), default),
                         config)
