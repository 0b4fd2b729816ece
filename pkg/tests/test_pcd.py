from dataclasses import replace

import pytest
import torch

from pytorch_mpdbm.base.exception import NegativeStepError
from pytorch_mpdbm.model import FullState, Mask, ModelShape, to_centered_gradient, to_uncentered
from pytorch_mpdbm.numerics import DTYPE, Rng, sigmoid, softmax
from pytorch_mpdbm.oracle import exact_ll_grad
from pytorch_mpdbm.trainer import (
    ChainPool,
    PcdConfig,
    PCDTrainer,
    ScheduleConfig,
    gibbs_sweep,
    negative_statistics,
    pcd_grad,
    sufficient_statistics,
)
from tests.utils import random_tiny_data, random_tiny_params, zero_params


@pytest.fixture
def biased_zero_model():
    shape = ModelShape(d=3, layer_sizes=(2,), k=2)
    return replace(
        zero_params(shape),
        visible_bias=torch.tensor([-1.0, 0.0, 2.0], dtype=DTYPE),
        hidden_biases=(torch.tensor([0.5, -0.5], dtype=DTYPE),),
        label_bias=torch.tensor([0.0, 1.0], dtype=DTYPE),
    )


def test_gibbs_sweep_factorial_model(biased_zero_model):
    params = biased_zero_model
    chains = ChainPool.random(params.shape, 20000, Rng(0))

    state = chains.advance(params, 1)

    assert state.is_valid()
    torch.testing.assert_close(state.v.mean(dim=0), sigmoid(params.visible_bias), atol=0.02, rtol=0.0)
    torch.testing.assert_close(state.h[0].mean(dim=0), sigmoid(params.hidden_biases[0]), atol=0.02, rtol=0.0)
    torch.testing.assert_close(state.y.mean(dim=0), softmax(params.label_bias), atol=0.02, rtol=0.0)


def test_gibbs_sweep_clamped(tiny_shape, tiny_params):
    state = ChainPool.random(tiny_shape, 8, Rng(1)).state
    clamp = Mask.all_observed(tiny_shape, batch_size=8)

    new_state = gibbs_sweep(tiny_params, state, Rng(2), clamp=clamp)

    assert torch.equal(new_state.v, state.v)
    assert torch.equal(new_state.y, state.y)


def test_gibbs_sweep_deterministic(tiny_shape, tiny_params):
    state = ChainPool.random(tiny_shape, 8, Rng(1)).state

    first = gibbs_sweep(tiny_params, state, Rng(5))
    second = gibbs_sweep(tiny_params, state, Rng(5))

    for a, b in zip(first.units(), second.units()):
        assert torch.equal(a, b)


def test_chain_pool(tiny_shape, tiny_params):
    chains = ChainPool.random(tiny_shape, 6, Rng(3))

    assert len(chains) == 6
    assert chains.state.is_valid()

    state = chains.advance(tiny_params, 3)
    assert state is chains.state
    assert state.is_valid()

    with pytest.raises(ValueError):
        ChainPool.random(tiny_shape, 0, Rng(3))


def test_sufficient_statistics():
    shape = ModelShape(d=2, layer_sizes=(1,), k=0)
    params = zero_params(shape)
    units = [
        torch.tensor([[1.0, 0.0], [1.0, 1.0]], dtype=DTYPE),
        torch.tensor([[1.0], [0.0]], dtype=DTYPE),
        torch.zeros(2, 0, dtype=DTYPE),
    ]

    stats = sufficient_statistics(params, units)

    torch.testing.assert_close(stats.weights[0], torch.tensor([[0.5], [0.0]], dtype=DTYPE))
    torch.testing.assert_close(stats.visible_bias, torch.tensor([1.0, 0.5], dtype=DTYPE))
    torch.testing.assert_close(stats.hidden_biases[0], torch.tensor([0.5], dtype=DTYPE))
    assert stats.label_weight.shape == (1, 0)


def test_negative_statistics_rao_blackwell(biased_zero_model):
    params = biased_zero_model
    state = ChainPool.random(params.shape, 50, Rng(4)).advance(params, 1)

    stats = negative_statistics(params, state, rao_blackwell=True)
    plain = negative_statistics(params, state, rao_blackwell=False)

    torch.testing.assert_close(stats.hidden_biases[0], sigmoid(params.hidden_biases[0]))
    torch.testing.assert_close(stats.visible_bias, plain.visible_bias)
    torch.testing.assert_close(stats.label_bias, plain.label_bias)
    torch.testing.assert_close(
        stats.weights[0], state.v.T.unsqueeze(-1).mul(sigmoid(params.hidden_biases[0])).mean(dim=1)
    )


def test_negative_statistics_per_chain(tiny_shape, tiny_params):
    state = ChainPool.random(tiny_shape, 30, Rng(8)).advance(tiny_params, 2)

    for rao_blackwell in (True, False):
        per_chain = negative_statistics(tiny_params, state, rao_blackwell=rao_blackwell, reduce=False)
        reduced = negative_statistics(tiny_params, state, rao_blackwell=rao_blackwell)

        for (name, a), b in zip(per_chain.named_tensors(), reduced.tensors()):
            assert a.shape == (30, *b.shape), name
            torch.testing.assert_close(a.mean(dim=0), b, atol=1e-12, rtol=0.0)


def test_rao_blackwell_matches_plain_statistics_with_lower_variance(tiny_shape):
    params = random_tiny_params(tiny_shape, Rng(21))
    n_draws: int = 10_000

    state = ChainPool.random(tiny_shape, n_draws, Rng(22)).advance(params, 100)

    rb = negative_statistics(params, state, rao_blackwell=True, reduce=False)
    plain = negative_statistics(params, state, rao_blackwell=False, reduce=False)

    for (name, a), b in zip(rb.named_tensors(), plain.tensors()):
        diff = a - b
        sigma = diff.std(dim=0) / n_draws**0.5
        assert (diff.mean(dim=0).abs() <= 3.0 * sigma + 1e-12).all(), name
        assert (a.var(dim=0) <= b.var(dim=0) + 1e-12).all(), name


@pytest.mark.parametrize('rao_blackwell', [True, False])
def test_pcd_grad_centering_identity(tiny_shape, rao_blackwell):
    centered = random_tiny_params(tiny_shape, Rng(31), scale=0.3, centered=True)
    uncentered = to_uncentered(centered)
    v, labels = random_tiny_data(tiny_shape, 6, Rng(32))

    grad_centered = pcd_grad(
        centered, v, labels, ChainPool.random(tiny_shape, 40, Rng(33)), mf_iters_pos=50, rao_blackwell=rao_blackwell
    )
    grad_uncentered = pcd_grad(
        uncentered, v, labels, ChainPool.random(tiny_shape, 40, Rng(33)), mf_iters_pos=50, rao_blackwell=rao_blackwell
    )

    mapped = to_centered_gradient(grad_uncentered, centered.offsets)
    for (name, a), b in zip(grad_centered.named_tensors(), mapped.tensors()):
        torch.testing.assert_close(a, b, atol=1e-10, rtol=0.0, msg=name)


def test_pcd_grad_requires_labels(tiny_shape, tiny_params, tiny_data):
    v, _ = tiny_data
    with pytest.raises(ValueError):
        pcd_grad(tiny_params, v, None, ChainPool.random(tiny_shape, 4, Rng(0)))


@pytest.mark.parametrize('rao_blackwell', [True, False])
def test_pcd_grad_matches_exact_rbm_gradient(rao_blackwell):
    shape = ModelShape(d=3, layer_sizes=(2,), k=0)
    params = random_tiny_params(shape, Rng(11))
    v = Rng(12).bernoulli(0.5, (8, shape.d))

    chains = ChainPool.random(shape, 4000, Rng(13))
    chains.advance(params, 50)

    n_steps: int = 25
    total = None
    for _ in range(n_steps):
        grad = pcd_grad(params, v, None, chains, mf_iters_pos=2, gibbs_steps_neg=1, rao_blackwell=rao_blackwell)
        total = grad if total is None else total.zip_map(grad, torch.add)

    expected = exact_ll_grad(params, v).map(lambda t: -t / v.shape[0])
    for name, t in total.named_tensors():
        torch.testing.assert_close(t / n_steps, dict(expected.named_tensors())[name], atol=0.03, rtol=0.0)


def _pcd_config(**kwargs) -> PcdConfig:
    options = {
        'learning_rate': ScheduleConfig(value=0.05),
        'n_chains': 10,
        'mf_iters_pos': 3,
        'minibatch_size': 50,
        'epochs': 3,
        'n_monitor_masks': 0,
        'n_eval_iters': 3,
    }
    options.update(kwargs)
    return PcdConfig(**options)


def test_pcd_trainer_zero_learning_rate(patterns):
    shape = ModelShape(d=patterns.d, layer_sizes=(8,), k=patterns.n_classes)
    params = random_tiny_params(shape, Rng(0), scale=0.05)

    trainer = PCDTrainer(params, patterns, _pcd_config(learning_rate=ScheduleConfig(value=0.0)), seed=1)
    trained = trainer.fit()

    for a, b in zip(trained.tensors(), params.tensors()):
        assert torch.equal(a, b)
    assert len(trainer.history) == 3
    assert all(record['train_loss'] is None for record in trainer.history)


def test_pcd_trainer_resume(patterns):
    shape = ModelShape(d=patterns.d, layer_sizes=(8,), k=patterns.n_classes)
    params = random_tiny_params(shape, Rng(0), scale=0.05)
    config = _pcd_config(column_norm_cap=1.0)

    uninterrupted = PCDTrainer(params, patterns, config, seed=1).fit()

    first = PCDTrainer(params, patterns, config, seed=1)
    first.fit(epochs=1)
    state = first.state_dict()

    resumed = PCDTrainer(first.params, patterns, config, seed=1)
    resumed.load_state_dict(state)
    assert resumed.epoch == 1
    assert isinstance(resumed.chains.state, FullState)

    for a, b in zip(resumed.fit().tensors(), uninterrupted.tensors()):
        assert torch.equal(a, b)


@pytest.mark.parametrize(
    'kwargs',
    [
        {'n_chains': 0},
        {'gibbs_steps_neg': 0},
        {'mf_iters_pos': 0},
        {'column_norm_cap': -1.0},
        {'momentum': ScheduleConfig(value=1.0)},
        {'patience': 0},
    ],
)
def test_pcd_config_invalid(kwargs):
    with pytest.raises((ValueError, NegativeStepError)):
        _pcd_config(**kwargs)
