import json
import math

import numpy as np
import pytest

from crmarl.actions import EnvKind
from crmarl.agents import ToyPolicyParams
from crmarl.env import generate_suite
from crmarl.errors import ConfigError, SchemaMismatch
from crmarl.training import TrainConfig, checkpoint_json, continual_train, load_checkpoint, marl_train


class ZeroCritic:
    def score(self, step, task, history, world):
        return [[0.0] * step.action_matrix.m for _ in range(step.action_matrix.n)]


def small(seed=0, kind=EnvKind.MOBILE, n_tasks=8):
    return generate_suite(seed, kind, "easy", n_tasks=n_tasks)


FAST = dict(epochs=2, steps_per_epoch=20, rollouts_per_epoch=1)


def test_config_validation_and_round_trip():
    c = TrainConfig(seed=3, **FAST)
    assert TrainConfig.from_json(json.loads(json.dumps(c.to_json()))) == c
    assert c.temperatures == (0.1, 0.3, 0.5, 0.8)
    for bad in ({"beta": 0}, {"epochs": 0}, {"optimizer": "lbfgs"}, {"n": 3, "temperatures": (0.1,)}):
        with pytest.raises(ConfigError):
            TrainConfig(**bad)
    with pytest.raises(ConfigError):
        TrainConfig.from_json({"beta": 0.1, "mystery": 1})


def test_training_improves_and_keeps_reference_frozen():
    config = TrainConfig(seed=1, **FAST)
    init = ToyPolicyParams.zeros()
    before = init.weights.tobytes()
    params, ref, metrics = marl_train(config, small(1), small(101), init_params=init)
    assert ref.weights.tobytes() == before and init.weights.tobytes() == before
    assert len(metrics.epochs) == 2
    assert metrics.final_eval_sr >= metrics.initial_eval_sr
    e = metrics.epochs[0]
    assert e.pairs == e.rewarded_cells - e.drops > 0
    assert e.loss_before == pytest.approx(math.log(2), abs=1e-12)
    assert e.loss_after < e.loss_before


def test_training_is_deterministic():
    config = TrainConfig(seed=2, **FAST)
    a = marl_train(config, small(2))
    b = marl_train(config, small(2))
    assert a[0].weights.tobytes() == b[0].weights.tobytes()
    assert json.dumps(a[2].to_json()) == json.dumps(b[2].to_json())


def test_epoch_without_pairs_is_skipped():
    config = TrainConfig(seed=0, epochs=1, steps_per_epoch=5, rollouts_per_epoch=1)
    params, ref, metrics = marl_train(config, small(0, n_tasks=4), critic=ZeroCritic())
    e = metrics.epochs[0]
    assert e.pairs == 0 and math.isnan(e.loss_before) and math.isnan(e.preferred_rate)
    assert np.array_equal(params.weights, ref.weights)


def test_refresh_reference_flag():
    config = TrainConfig(seed=4, refresh_reference=True, **FAST)
    params, ref, metrics = marl_train(config, small(4))
    assert np.array_equal(ref.weights, np.zeros_like(ref.weights))
    assert metrics.epochs[1].loss_before == pytest.approx(math.log(2), abs=1e-12)


def test_per_agent_weights_train_separately():
    config = TrainConfig(seed=5, shared=False, **FAST)
    params, _, _ = marl_train(config, small(5))
    assert params.weights.shape[0] == 4
    assert not np.allclose(params.weights[0], params.weights[3])


def test_continual_training_starts_from_prior():
    config = TrainConfig(seed=6, **FAST)
    prior, _, _ = marl_train(config, small(6))
    web = small(6, EnvKind.WEB)
    params, ref, metrics = continual_train(prior, config, web)
    assert np.array_equal(ref.weights, prior.weights)
    assert metrics.epochs[0].loss_before == pytest.approx(math.log(2), abs=1e-12)


def test_continual_training_rejects_other_feature_schemas():
    prior = ToyPolicyParams.zeros()
    prior.feature_schema = "toy-features/0"
    with pytest.raises(SchemaMismatch):
        continual_train(prior, TrainConfig(**FAST), small(0))


def test_mixed_suite_is_rejected():
    with pytest.raises(ConfigError):
        marl_train(TrainConfig(**FAST), small(0, EnvKind.MOBILE, 4) + small(0, EnvKind.WEB, 4))


def test_checkpoint_round_trip():
    config = TrainConfig(seed=7, epochs=1, steps_per_epoch=5, rollouts_per_epoch=1)
    params, ref, metrics = marl_train(config, small(7, n_tasks=4))
    data = json.loads(json.dumps(checkpoint_json(params, ref, config, "mobile", metrics)))
    p2, r2, c2 = load_checkpoint(data)
    assert np.array_equal(p2.weights, params.weights) and np.array_equal(r2.weights, ref.weights)
    assert c2 == config
    with pytest.raises(SchemaMismatch):
        load_checkpoint({"type": "envpack"})
