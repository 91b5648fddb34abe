"""Chat-completion backed policy, critic and adversary agents."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from ..actions import UNKNOWN_ACTION, Action, canonicalize_action, render_action
from ..errors import NoNegative, ValidationError
from ..types import History, StepRecord, Task, render_messages
from .base import ActContext, Agent, AgentConfig
from .gateway import ChatGateway
from .prompts import load_template, parse_action_block, parse_score_grid, render, vocabulary_text

log = logging.getLogger(__name__)

PARSE_ATTEMPTS = 3
ADVERSARY_ATTEMPTS = 5
FALLBACK_SCORE = 0.5


def _seed(rng: np.random.Generator) -> int:
    return int(rng.integers(2**31 - 1))


def policy_prompt(template: str, ctx: ActContext) -> str:
    return render(template, query=ctx.query, observation=ctx.observation.render(),
                  history=ctx.history.render(), messages=render_messages(ctx.messages),
                  vocabulary=vocabulary_text(ctx.env_kind))


class RemoteAgent(Agent):
    """Policy agent: one completion per attempt, strict fenced-JSON action parsing.

    After ``PARSE_ATTEMPTS`` unparsable replies the agent returns UNKNOWN,
    which fails validation and is excluded from voting.
    """

    def __init__(self, config: AgentConfig, gateway: ChatGateway, template_dir: str | Path | None = None):
        self.config = config
        self.gateway = gateway
        self.template = load_template(config.template_id, template_dir)

    def act(self, ctx: ActContext, rng: np.random.Generator) -> tuple[Action, str]:
        prompt = policy_prompt(self.template, ctx)
        text = ""
        for attempt in range(PARSE_ATTEMPTS):
            text = self.gateway.complete(prompt, self.config.temperature, _seed(rng))
            try:
                return parse_action_block(text, ctx.env_kind), text
            except ValidationError as exc:
                log.info("agent %d: unparsable reply (attempt %d): %s", ctx.agent_index, attempt + 1, exc)
        return UNKNOWN_ACTION, text


class RemoteCritic:
    """Scores a whole action matrix with one prompt; falls back to all 0.5."""

    def __init__(self, gateway: ChatGateway, temperature: float = 0.0,
                 template_dir: str | Path | None = None):
        self.gateway = gateway
        self.temperature = temperature
        self.template = load_template("critic", template_dir)

    def prompt(self, step: StepRecord, task: Task, history: History) -> str:
        am = step.action_matrix
        return render(self.template, query=task.query, observation=step.observation.render(),
                      history=history.render(), action_matrix=am.render(), n=am.n, m=am.m)

    def score(self, step: StepRecord, task: Task, history: History, world=None) -> list[list[float]]:
        am = step.action_matrix
        prompt = self.prompt(step, task, history)
        for attempt in range(PARSE_ATTEMPTS):
            text = self.gateway.complete(prompt, self.temperature, step.step_index)
            try:
                return parse_score_grid(text, am.n, am.m)
            except ValidationError as exc:
                log.info("critic: unparsable reply (attempt %d): %s", attempt + 1, exc)
        log.warning("critic gave no usable grid at step %d; scoring every cell %.1f",
                    step.step_index, FALLBACK_SCORE)
        return [[FALLBACK_SCORE] * am.m for _ in range(am.n)]


class RemoteAdversary:
    """Asks for a plausible but unhelpful action distinct from the chosen one."""

    def __init__(self, gateway: ChatGateway, temperature: float = 0.8,
                 template_dir: str | Path | None = None):
        self.gateway = gateway
        self.temperature = temperature
        self.template = load_template("adversary", template_dir)

    def negative(self, ctx: ActContext, chosen: Action, rng: np.random.Generator) -> tuple[Action, str]:
        prompt = render(self.template, query=ctx.query, observation=ctx.observation.render(),
                        history=ctx.history.render(), messages=render_messages(ctx.messages),
                        chosen=render_action(chosen), vocabulary=vocabulary_text(ctx.env_kind))
        collided = False
        for _ in range(ADVERSARY_ATTEMPTS):
            text = self.gateway.complete(prompt, self.temperature, _seed(rng))
            try:
                action = parse_action_block(text, ctx.env_kind)
            except ValidationError:
                continue
            if canonicalize_action(action) == chosen:
                collided = True
                continue
            return action, text
        if collided:
            raise NoNegative("collision", "adversary kept repeating the chosen action")
        raise NoNegative("adv_failure", "adversary produced no parsable action")
