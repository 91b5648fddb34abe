"""Linear-softmax toy policy used as the differentiable training target."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..actions import Action, render_action
from ..errors import SchemaMismatch
from ..types import PrefContext
from .base import ActContext, Agent, AgentConfig
from .features import F, FEATURE_NAMES, FEATURE_SCHEMA, feature_matrix, softmax


@dataclass
class ToyPolicyParams:
    """Weights over the named features.

    ``weights`` has shape ``(F,)`` when shared by all agents, else ``(n_agents, F)``.
    """

    weights: np.ndarray
    shared: bool = True
    temperature: float = 1.0
    feature_schema: str = FEATURE_SCHEMA
    feature_names: tuple[str, ...] = field(default=FEATURE_NAMES)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        expected = 1 if self.shared else 2
        if self.weights.ndim != expected or self.weights.shape[-1] != len(self.feature_names):
            raise ValueError(f"weights shape {self.weights.shape} does not fit the feature schema")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")
        if self.temperature <= 0:
            raise ValueError("policy temperature must be positive")

    @classmethod
    def zeros(cls, n_agents: int = 4, shared: bool = True, temperature: float = 1.0) -> ToyPolicyParams:
        shape = (F,) if shared else (n_agents, F)
        return cls(np.zeros(shape), shared, temperature)

    def for_agent(self, agent_index: int) -> np.ndarray:
        return self.weights if self.shared else self.weights[agent_index]

    def copy(self) -> ToyPolicyParams:
        return ToyPolicyParams(self.weights.copy(), self.shared, self.temperature,
                               self.feature_schema, self.feature_names)

    def with_weights(self, weights: np.ndarray) -> ToyPolicyParams:
        return ToyPolicyParams(np.array(weights, dtype=float), self.shared, self.temperature,
                               self.feature_schema, self.feature_names)

    def check_compatible(self, other: ToyPolicyParams) -> None:
        if (self.feature_schema, self.feature_names) != (other.feature_schema, other.feature_names):
            raise SchemaMismatch(f"{self.feature_schema} vs {other.feature_schema}")

    def to_json(self) -> dict[str, Any]:
        return {"feature_schema": self.feature_schema, "feature_names": list(self.feature_names),
                "shared": self.shared, "temperature": self.temperature,
                "weights": self.weights.tolist()}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> ToyPolicyParams:
        if d.get("feature_schema") != FEATURE_SCHEMA or tuple(d.get("feature_names", ())) != FEATURE_NAMES:
            raise SchemaMismatch(f"checkpoint feature schema {d.get('feature_schema')!r} "
                                 f"is not {FEATURE_SCHEMA!r}")
        return cls(np.array(d["weights"], dtype=float), d["shared"], d["temperature"])


def toy_distribution(params: ToyPolicyParams, ctx: PrefContext, agent_index: int = 0,
                     round_: int = 1, temperature: float | None = None
                     ) -> tuple[tuple[Action, ...], np.ndarray]:
    """Softmax over the candidate set: ``softmax(w . x / temperature)``."""
    candidates, X = feature_matrix(ctx, agent_index, round_)
    t = params.temperature if temperature is None else temperature
    return candidates, softmax(params.for_agent(agent_index), X, t)


def vote_summary(ctx: ActContext) -> str:
    counts = Counter(render_action(m.action) for m in ctx.messages if m.action is not None)
    if not counts:
        return "no votes"
    return ", ".join(f"{a} x{c}" for a, c in sorted(counts.items()))


class ToyAgent(Agent):
    """Samples from the toy policy at the agent's temperature (0 means argmax)."""

    def __init__(self, config: AgentConfig, params: ToyPolicyParams):
        self.config = config
        self.params = params

    def act(self, ctx: ActContext, rng: np.random.Generator) -> tuple[Action, str]:
        t = self.config.temperature
        candidates, X = feature_matrix(ctx.pref_context(), ctx.agent_index, ctx.round)
        w = self.params.for_agent(ctx.agent_index)
        if t == 0:
            scores = X @ w
            k = int(np.argmax(scores))
            p = 1.0
        else:
            probs = softmax(w, X, t)
            k = int(rng.choice(len(candidates), p=probs))
            p = float(probs[k])
        action = candidates[k]
        return action, f"{render_action(action)} conf={p:.3f} | {vote_summary(ctx)}"
