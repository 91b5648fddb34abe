import math

import numpy as np
import pytest

from crmarl.actions import Action, ActionKind
from crmarl.agents import ToyPolicyParams
from crmarl.agents.features import F
from crmarl.errors import CandidateMissing, InvalidArgument, SchemaMismatch
from crmarl.optim import (Adam, PreparedExample, PreparedPair, SGD, SFTExample, dpo_gradient, dpo_loss, make_optimizer,
                          pair_margin, preferred_rate, prepare_example, prepare_pair, sft_gradient, sft_loss)
from crmarl.types import Cell, PreferenceRecord

from oracles import dpo_closed_form
from test_agents import contexts

LN2 = math.log(2.0)


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


def central_diff(f, w: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(w)
    for idx in np.ndindex(w.shape):
        up, down = w.copy(), w.copy()
        up[idx] += h
        down[idx] -= h
        g[idx] = (f(up) - f(down)) / (2 * h)
    return g


def random_pairs(rng, k, n_agents=4, shared=True):
    out = []
    for _ in range(k):
        c = int(rng.integers(2, 9))
        X = rng.normal(size=(c, F)) * (rng.random((c, F)) < 0.4)
        a, b = rng.choice(c, size=2, replace=False)
        out.append(PreparedPair(X, int(a), int(b), 0 if shared else int(rng.integers(n_agents))))
    return out


def random_params(rng, shared=True, scale=1.0, temperature=1.0):
    shape = (F,) if shared else (4, F)
    return ToyPolicyParams(rng.normal(0, scale, shape), shared, temperature)


def three_candidate_example():
    """One-hot features with weights set to log-probabilities, so softmax returns them exactly."""
    X = np.zeros((3, F))
    X[0, 0] = X[1, 1] = X[2, 2] = 1.0
    w_theta = np.zeros(F)
    w_theta[:3] = np.log([0.8, 0.1, 0.1])
    w_ref = np.zeros(F)
    w_ref[:3] = np.log([0.5, 0.25, 0.25])
    return ToyPolicyParams(w_theta), ToyPolicyParams(w_ref), PreparedPair(X, 0, 1)


def test_loss_is_ln2_when_policy_equals_reference():
    rng = np.random.default_rng(0)
    for beta in (0.01, 0.1, 1.0, 7.5):
        p = random_params(rng)
        assert abs(dpo_loss(p, p.copy(), random_pairs(rng, 10), beta) - LN2) < 1e-12


def test_constructed_example_matches_closed_form():
    theta, ref, pair = three_candidate_example()
    assert abs(pair_margin(theta, ref, pair) - math.log(4)) < 1e-12
    loss = dpo_loss(theta, ref, [pair], 1.0)
    assert abs(loss - (-math.log(4 / 5))) < 1e-9
    assert abs(loss - dpo_closed_form(0.8, 0.5, 0.1, 0.25, 1.0)) < 1e-12


def test_loss_decreases_as_preferred_probability_rises():
    _, ref, pair = three_candidate_example()
    losses = []
    for p_plus in np.linspace(0.4, 0.999, 30):
        w = np.zeros(F)
        w[:3] = np.log([p_plus, (1 - p_plus) / 2, (1 - p_plus) / 2])
        losses.append(dpo_loss(ToyPolicyParams(w), ref, [pair], 1.0))
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_symmetric_pair_has_zero_gradient():
    X = np.zeros((2, F))
    X[:, 3] = 1.0
    p = ToyPolicyParams(np.random.default_rng(1).normal(size=F))
    assert np.all(dpo_gradient(p, p.copy(), [PreparedPair(X, 0, 1)], 0.1) == 0)


@pytest.mark.parametrize("shared", [True, False])
def test_dpo_gradient_matches_finite_differences(shared):
    rng = np.random.default_rng(2 + shared)
    for _ in range(100):
        params = random_params(rng, shared, scale=0.7, temperature=float(rng.uniform(0.3, 2.0)))
        ref = random_params(rng, shared, scale=0.7, temperature=float(rng.uniform(0.3, 2.0)))
        batch = random_pairs(rng, int(rng.integers(1, 6)), shared=shared)
        beta = float(rng.uniform(0.05, 2.0))
        analytic = dpo_gradient(params, ref, batch, beta)
        numeric = central_diff(lambda w: dpo_loss(params.with_weights(w), ref, batch, beta), params.weights)
        assert rel_err(analytic, numeric) < 1e-6


def test_batch_gradient_is_mean_of_single_gradients():
    rng = np.random.default_rng(4)
    params, ref = random_params(rng), random_params(rng)
    a, b = random_pairs(rng, 2)
    both = dpo_gradient(params, ref, [a, b], 0.3)
    assert np.allclose(both, (dpo_gradient(params, ref, [a], 0.3) + dpo_gradient(params, ref, [b], 0.3)) / 2,
                       atol=1e-15)


def random_examples(rng, k, shared=True):
    out = []
    for _ in range(k):
        c = int(rng.integers(1, 9))
        X = rng.normal(size=(c, F))
        out.append(PreparedExample(X, int(rng.integers(c)), 0 if shared else int(rng.integers(4))))
    return out


def test_sft_loss_of_uniform_policy_is_log_k():
    rng = np.random.default_rng(5)
    for k in (1, 2, 5, 9):
        ex = PreparedExample(rng.normal(size=(k, F)), 0)
        assert abs(sft_loss(ToyPolicyParams.zeros(), [ex]) - math.log(k)) < 1e-12


def test_sft_loss_is_nonnegative():
    rng = np.random.default_rng(6)
    for _ in range(200):
        assert sft_loss(random_params(rng, scale=3.0), random_examples(rng, 3)) >= 0


@pytest.mark.parametrize("shared", [True, False])
def test_sft_gradient_matches_finite_differences(shared):
    rng = np.random.default_rng(7 + shared)
    for _ in range(100):
        params = random_params(rng, shared, scale=0.7, temperature=float(rng.uniform(0.3, 2.0)))
        batch = random_examples(rng, int(rng.integers(1, 6)), shared)
        analytic = sft_gradient(params, batch)
        numeric = central_diff(lambda w: sft_loss(params.with_weights(w), batch), params.weights)
        assert rel_err(analytic, numeric) < 1e-6


def planted_batch(rng, k=60):
    """Pairs whose chosen action scores higher than the rejected one under a hidden weight vector."""
    w_star = rng.normal(size=F)
    pairs = []
    while len(pairs) < k:
        c = int(rng.integers(3, 9))
        X = rng.normal(size=(c, F))
        s = X @ w_star
        a, b = rng.choice(c, size=2, replace=False)
        if s[a] == s[b]:
            continue
        hi, lo = (a, b) if s[a] > s[b] else (b, a)
        pairs.append(PreparedPair(X, int(hi), int(lo)))
    return pairs


@pytest.mark.parametrize("opt", ["adam", "sgd"])
def test_training_on_a_feasible_batch_prefers_chosen_actions(opt):
    rng = np.random.default_rng(8)
    batch = planted_batch(rng)
    ref = ToyPolicyParams.zeros()
    params = ref.copy()
    beta = 0.1 if opt == "adam" else 1.0
    optimizer = make_optimizer(opt, 0.1)
    for _ in range(200):
        params = params.with_weights(optimizer.step(params.weights, dpo_gradient(params, ref, batch, beta)))
    assert preferred_rate(params, batch) >= 0.99
    assert dpo_loss(params, ref, batch, beta) < LN2


def test_beta_must_be_positive():
    _, ref, pair = three_candidate_example()
    with pytest.raises(InvalidArgument):
        dpo_loss(ref, ref, [pair], 0.0)
    with pytest.raises(InvalidArgument):
        dpo_gradient(ref, ref, [pair], -1.0)
    with pytest.raises(InvalidArgument):
        dpo_loss(ref, ref, [], 0.1)


def test_incompatible_reference_is_rejected():
    _, ref, pair = three_candidate_example()
    other = ref.copy()
    other.feature_schema = "toy-features/0"
    with pytest.raises(SchemaMismatch):
        dpo_loss(ref, other, [pair], 0.1)


def test_records_are_prepared_from_their_context():
    ctx = contexts(1, 21)[0]
    pc = ctx.pref_context()
    from crmarl.agents import candidate_set
    cands = candidate_set(ctx.observation, ctx.query, ctx.env_kind)
    rec = PreferenceRecord(pc, Cell(cands[0], ""), Cell(cands[1], ""), 2, 2, 0, "t", (), 1.0)
    pair = prepare_pair(rec)
    assert (pair.chosen, pair.rejected, pair.agent_index) == (0, 1, 2)
    assert prepare_example(SFTExample(pc, cands[-1])).target == len(cands) - 1
    missing = PreferenceRecord(pc, Cell(Action(ActionKind.CLICK, 99), ""), Cell(cands[1], ""), 0, 1, 0, "t", (), 1.0)
    with pytest.raises(CandidateMissing):
        prepare_pair(missing)
    with pytest.raises(CandidateMissing):
        prepare_example((pc, Action(ActionKind.CLICK, 99)))


def test_optimizers():
    w = np.ones(3)
    assert np.allclose(SGD(0.5).step(w, np.ones(3)), 0.5)
    first = Adam(0.1).step(w, np.array([2.0, -3.0, 0.5]))
    assert np.allclose(first, w - 0.1 * np.sign([2.0, -3.0, 0.5]), atol=1e-6)
    with pytest.raises(InvalidArgument):
        make_optimizer("rmsprop", 0.1)
