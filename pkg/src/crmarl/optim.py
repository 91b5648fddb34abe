"""Preference and likelihood objectives for the toy softmax policy, with
closed-form gradients and two first-order optimizers."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Union

import numpy as np

from .actions import Action
from .agents.features import feature_matrix, log_softmax, softmax
from .agents.toy import ToyPolicyParams
from .errors import CandidateMissing, InvalidArgument
from .types import PrefContext, PreferenceRecord


@dataclass(frozen=True)
class PreparedPair:
    """Feature matrix of a record's context with the row indices of both actions."""

    X: np.ndarray
    chosen: int
    rejected: int
    agent_index: int = 0


@dataclass(frozen=True)
class SFTExample:
    context: PrefContext
    action: Action
    agent_index: int = 0
    round: int = 1


@dataclass(frozen=True)
class PreparedExample:
    X: np.ndarray
    target: int
    agent_index: int = 0


def _row(candidates: tuple[Action, ...], action: Action, what: str) -> int:
    try:
        return candidates.index(action)
    except ValueError:
        raise CandidateMissing(f"{what} action {action} is not in the candidate set") from None


def prepare_pair(record: PreferenceRecord) -> PreparedPair:
    candidates, X = feature_matrix(record.context, record.agent_index, record.round)
    return PreparedPair(X, _row(candidates, record.chosen.action, "chosen"),
                        _row(candidates, record.rejected.action, "rejected"), record.agent_index)


def prepare_example(ex: SFTExample | tuple) -> PreparedExample:
    if not isinstance(ex, SFTExample):
        ex = SFTExample(*ex)
    candidates, X = feature_matrix(ex.context, ex.agent_index, ex.round)
    return PreparedExample(X, _row(candidates, ex.action, "target"), ex.agent_index)


PairBatchLike = Sequence[Union[PreferenceRecord, PreparedPair]]
ExampleBatchLike = Sequence[Union[SFTExample, PreparedExample, tuple]]


def _pairs(batch: PairBatchLike) -> list[PreparedPair]:
    if not batch:
        raise InvalidArgument("empty batch")
    return [b if isinstance(b, PreparedPair) else prepare_pair(b) for b in batch]


def _examples(batch: ExampleBatchLike) -> list[PreparedExample]:
    if not batch:
        raise InvalidArgument("empty batch")
    return [b if isinstance(b, PreparedExample) else prepare_example(b) for b in batch]


def _log_sigmoid(x: float) -> float:
    return -float(np.logaddexp(0.0, -x))


def _sigmoid(x: float) -> float:
    return float(np.exp(_log_sigmoid(x)))


def pair_margin(params: ToyPolicyParams, ref: ToyPolicyParams, pair: PreparedPair) -> float:
    """``(log pi(a+) - log pi_ref(a+)) - (log pi(a-) - log pi_ref(a-))``."""
    lp = log_softmax(params.for_agent(pair.agent_index), pair.X, params.temperature)
    lr = log_softmax(ref.for_agent(pair.agent_index), pair.X, ref.temperature)
    return float((lp[pair.chosen] - lr[pair.chosen]) - (lp[pair.rejected] - lr[pair.rejected]))


def dpo_loss(params: ToyPolicyParams, ref: ToyPolicyParams, batch: PairBatchLike, beta: float) -> float:
    """Mean of ``-log sigmoid(beta * margin)`` over the batch."""
    if beta <= 0:
        raise InvalidArgument("beta must be positive")
    params.check_compatible(ref)
    pairs = _pairs(batch)
    return float(np.mean([-_log_sigmoid(beta * pair_margin(params, ref, p)) for p in pairs]))


def dpo_gradient(params: ToyPolicyParams, ref: ToyPolicyParams, batch: PairBatchLike,
                 beta: float) -> np.ndarray:
    """Gradient of :func:`dpo_loss` with respect to ``params.weights``.

    For a linear softmax, ``d log pi(a) / dw = (x_a - E_pi[x]) / tau``; the
    expectation cancels between the two actions of a pair.
    """
    if beta <= 0:
        raise InvalidArgument("beta must be positive")
    params.check_compatible(ref)
    pairs = _pairs(batch)
    grad = np.zeros_like(params.weights)
    for p in pairs:
        z = pair_margin(params, ref, p)
        g = -beta * _sigmoid(-beta * z) * (p.X[p.chosen] - p.X[p.rejected]) / params.temperature
        if params.shared:
            grad += g
        else:
            grad[p.agent_index] += g
    return grad / len(pairs)


def sft_loss(params: ToyPolicyParams, batch: ExampleBatchLike) -> float:
    """Mean negative log-likelihood of the target actions."""
    exs = _examples(batch)
    return float(np.mean([-log_softmax(params.for_agent(e.agent_index), e.X, params.temperature)[e.target]
                          for e in exs]))


def sft_gradient(params: ToyPolicyParams, batch: ExampleBatchLike) -> np.ndarray:
    exs = _examples(batch)
    grad = np.zeros_like(params.weights)
    for e in exs:
        probs = softmax(params.for_agent(e.agent_index), e.X, params.temperature)
        g = -(e.X[e.target] - probs @ e.X) / params.temperature
        if params.shared:
            grad += g
        else:
            grad[e.agent_index] += g
    return grad / len(exs)


def preferred_rate(params: ToyPolicyParams, batch: PairBatchLike) -> float:
    """Fraction of pairs where the policy puts more mass on the chosen action."""
    pairs = _pairs(batch)
    wins = 0
    for p in pairs:
        lp = log_softmax(params.for_agent(p.agent_index), p.X, params.temperature)
        wins += lp[p.chosen] > lp[p.rejected]
    return wins / len(pairs)


class SGD:
    def __init__(self, lr: float = 0.1):
        self.lr = lr

    def step(self, w: np.ndarray, g: np.ndarray) -> np.ndarray:
        return w - self.lr * g


class Adam:
    """Adaptive-moment optimizer with bias correction."""

    def __init__(self, lr: float = 0.1, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m: np.ndarray | None = None
        self.v: np.ndarray | None = None
        self.t = 0

    def step(self, w: np.ndarray, g: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(w)
            self.v = np.zeros_like(w)
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * g
        self.v = self.b2 * self.v + (1 - self.b2) * g * g
        m_hat = self.m / (1 - self.b1 ** self.t)
        v_hat = self.v / (1 - self.b2 ** self.t)
        return w - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


OPTIMIZERS = {"sgd": SGD, "adam": Adam}


def make_optimizer(kind: str, lr: float):
    try:
        return OPTIMIZERS[kind](lr)
    except KeyError:
        raise InvalidArgument(f"optimizer must be one of {sorted(OPTIMIZERS)}") from None
