"""Online off-policy multi-agent training loop driven by credit re-assignment."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, fields
from typing import Any

import numpy as np

from .actions import EnvKind
from .agents.base import AgentConfig, default_temperatures
from .agents.toy import ToyAgent, ToyPolicyParams
from .credit import Adversary, OracleAdversary, OracleCritic, attach_rewards, restore_from_failures
from .env.model import FormWorld
from .errors import ConfigError, SchemaMismatch
from .optim import PreparedPair, dpo_gradient, dpo_loss, make_optimizer, pair_margin, prepare_pair, preferred_rate
from .rollout import RolloutConfig, Suite, run_rollouts, step_success_rate, success_rate

log = logging.getLogger(__name__)

_TRAIN_STREAM = 1
_EVAL_STREAM = 2
_PAIR_STREAM = 3
_BATCH_STREAM = 4


@dataclass(frozen=True)
class TrainConfig:
    beta: float = 0.1
    lr: float = 0.1
    epochs: int = 3
    batch_size: int = 0  # 0 means full batch
    steps_per_epoch: int = 50
    optimizer: str = "adam"
    dag_policy: str = "resample_per_episode"
    edge_prob: float = 0.5
    rollouts_per_epoch: int = 2
    n: int = 4
    m: int = 3
    temperatures: tuple[float, ...] = ()
    shared: bool = True
    refresh_reference: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.beta <= 0:
            raise ConfigError("beta must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if self.lr <= 0 or self.steps_per_epoch < 0 or self.batch_size < 0 or self.rollouts_per_epoch < 1:
            raise ConfigError("lr, steps_per_epoch, batch_size and rollouts_per_epoch out of range")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError("optimizer must be sgd or adam")
        if not self.temperatures:
            object.__setattr__(self, "temperatures", default_temperatures(self.n))
        object.__setattr__(self, "temperatures", tuple(float(t) for t in self.temperatures))
        if len(self.temperatures) != self.n:
            raise ConfigError(f"{len(self.temperatures)} temperatures for n={self.n}")

    def rollout_config(self, env_kind: EnvKind, seed: int) -> RolloutConfig:
        configs = tuple(AgentConfig("toy", t, agent_index=i) for i, t in enumerate(self.temperatures))
        return RolloutConfig(self.n, self.m, self.dag_policy, self.edge_prob, seed, env_kind, configs)

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        d["temperatures"] = list(self.temperatures)
        return d

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        d = dict(d)
        if "temperatures" in d:
            d["temperatures"] = tuple(d["temperatures"])
        return cls(**d)


@dataclass
class EpochMetrics:
    epoch: int
    pairs: int
    rewarded_cells: int
    drops: int
    train_sr: float
    loss_before: float
    loss_after: float
    preferred_rate: float
    margin_mean: float
    eval_sr: float
    eval_ssr: float

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class TrainMetrics:
    initial_eval_sr: float = 0.0
    initial_eval_ssr: float = 0.0
    epochs: list[EpochMetrics] = field(default_factory=list)

    @property
    def final_eval_sr(self) -> float:
        return self.epochs[-1].eval_sr if self.epochs else self.initial_eval_sr

    def to_json(self) -> dict[str, Any]:
        return {"initial_eval_sr": self.initial_eval_sr, "initial_eval_ssr": self.initial_eval_ssr,
                "epochs": [e.to_json() for e in self.epochs]}


def toy_agents(params: ToyPolicyParams, rollout: RolloutConfig) -> list[ToyAgent]:
    return [ToyAgent(c, params) for c in rollout.agent_configs]


def suite_kind(suite: Suite) -> EnvKind:
    kinds = {w.env_kind for w, _ in suite}
    if len(kinds) != 1:
        raise ConfigError("a suite must hold a single environment kind")
    return EnvKind(kinds.pop())


def worlds_of(*suites: Suite) -> dict[str, FormWorld]:
    return {w.id: w for s in suites for w, _ in s}


def evaluate(params: ToyPolicyParams, suite: Suite, config: TrainConfig, seed: int,
             mode: str = "online") -> tuple[float, float, list]:
    """Return ``(SR, SSR, trajectories)`` of the toy system on ``suite``."""
    rc = config.rollout_config(suite_kind(suite), seed)
    trajs = run_rollouts(suite, rc, toy_agents(params, rc), mode=mode)
    return success_rate(trajs), step_success_rate(trajs, worlds_of(suite)), trajs


def _stream(seed: int, *key: int) -> int:
    return int(np.random.default_rng([seed, *key]).integers(2**31 - 1))


def _optimize(params: ToyPolicyParams, ref: ToyPolicyParams, pairs: list[PreparedPair],
              config: TrainConfig, rng: np.random.Generator) -> ToyPolicyParams:
    opt = make_optimizer(config.optimizer, config.lr)
    w = params.weights.copy()
    for _ in range(config.steps_per_epoch):
        if config.batch_size and config.batch_size < len(pairs):
            idx = np.sort(rng.choice(len(pairs), config.batch_size, replace=False))
            batch = [pairs[k] for k in idx]
        else:
            batch = pairs
        w = opt.step(w, dpo_gradient(params.with_weights(w), ref, batch, config.beta))
    return params.with_weights(w)


def marl_train(config: TrainConfig, train_suite: Suite, eval_suite: Suite | None = None,
               critic=None, adversary: Adversary | None = None,
               init_params: ToyPolicyParams | None = None
               ) -> tuple[ToyPolicyParams, ToyPolicyParams, TrainMetrics]:
    """Per epoch: edge update, rollouts, credit re-assignment, DPO steps, evaluation.

    The reference policy is the parameter snapshot at the start of the run
    and is never modified; with ``refresh_reference`` it is replaced by a
    fresh snapshot after each epoch instead.
    """
    eval_suite = eval_suite if eval_suite is not None else train_suite
    critic = critic or OracleCritic()
    adversary = adversary or OracleAdversary()
    kind = suite_kind(train_suite)
    worlds = worlds_of(train_suite)
    params = init_params.copy() if init_params is not None else ToyPolicyParams.zeros(config.n, config.shared)
    ref = params.copy()
    frozen_ref = ref
    metrics = TrainMetrics()
    sr0, ssr0, _ = evaluate(params, eval_suite, config, _stream(config.seed, _EVAL_STREAM, 0))
    metrics.initial_eval_sr, metrics.initial_eval_ssr = sr0, ssr0
    log.info("initial eval SR %.3f", sr0)

    for epoch in range(1, config.epochs + 1):
        # A fresh rollout seed per epoch resamples every episode's DAG (edge update).
        rc = config.rollout_config(kind, _stream(config.seed, _TRAIN_STREAM, epoch))
        agents = toy_agents(params, rc)
        trajs = []
        for r in range(config.rollouts_per_epoch):
            trajs.extend(run_rollouts(train_suite, rc, agents, episode_offset=r * 10_000))
        scored = [attach_rewards(t, critic, worlds.get(t.task.env_id)) for t in trajs]
        batch = restore_from_failures(scored, adversary, worlds,
                                      np.random.default_rng([config.seed, _PAIR_STREAM, epoch]))
        pairs = [prepare_pair(r) for r in batch.records]
        if not pairs:
            log.warning("epoch %d produced no preference pairs; skipping the update", epoch)
            loss_before = loss_after = float("nan")
            pref, margin = float("nan"), float("nan")
        else:
            loss_before = dpo_loss(params, ref, pairs, config.beta)
            params = _optimize(params, ref, pairs, config,
                               np.random.default_rng([config.seed, _BATCH_STREAM, epoch]))
            loss_after = dpo_loss(params, ref, pairs, config.beta)
            pref = preferred_rate(params, pairs)
            margin = float(np.mean([pair_margin(params, ref, p) for p in pairs]))
        sr, ssr, _ = evaluate(params, eval_suite, config, _stream(config.seed, _EVAL_STREAM, epoch))
        metrics.epochs.append(EpochMetrics(
            epoch, len(pairs), batch.rewarded_cells, len(batch.drops), success_rate(trajs),
            loss_before, loss_after, pref, margin, sr, ssr))
        log.info("epoch %d: %d pairs, loss %.4f -> %.4f, eval SR %.3f",
                 epoch, len(pairs), loss_before, loss_after, sr)
        if config.refresh_reference:
            ref = params.copy()
    return params, frozen_ref, metrics


def continual_train(prior: ToyPolicyParams, config: TrainConfig, train_suite: Suite,
                    eval_suite: Suite | None = None, critic=None, adversary: Adversary | None = None
                    ) -> tuple[ToyPolicyParams, ToyPolicyParams, TrainMetrics]:
    """Resume training in a new environment with the prior weights as start and reference."""
    ToyPolicyParams.zeros(config.n, prior.shared).check_compatible(prior)
    if not prior.shared and prior.weights.shape[0] != config.n:
        raise ConfigError(f"prior has {prior.weights.shape[0]} agent rows, config n={config.n}")
    return marl_train(config, train_suite, eval_suite, critic, adversary, init_params=prior)


def checkpoint_json(params: ToyPolicyParams, ref: ToyPolicyParams, config: TrainConfig,
                    env_kind: EnvKind | str, metrics: TrainMetrics | None = None) -> dict[str, Any]:
    out = {"type": "checkpoint", "feature_schema": params.feature_schema,
           "env_kind": EnvKind(env_kind).value, "seed": config.seed, "config": config.to_json(),
           "params": params.to_json(), "reference": ref.to_json()}
    if metrics is not None:
        out["metrics"] = metrics.to_json()
    return out


def load_checkpoint(d: dict[str, Any]) -> tuple[ToyPolicyParams, ToyPolicyParams, TrainConfig]:
    if d.get("type") != "checkpoint":
        raise SchemaMismatch("not a checkpoint file")
    return (ToyPolicyParams.from_json(d["params"]), ToyPolicyParams.from_json(d["reference"]),
            TrainConfig.from_json(d["config"]))

