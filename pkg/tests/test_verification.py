import pytest
import torch

from pytorch_mpdbm.cli.config import OracleCheckConfig
from pytorch_mpdbm.cli.verification import (
    check_centering_equivalence,
    check_gibbs_stationarity,
    check_gradient,
    check_kl_monotone,
    corrupted,
    default_gradient,
    finite_difference_gradient,
    random_data,
    random_params,
    run_oracle_checks,
)
from pytorch_mpdbm.loss import SparsityPenalty
from pytorch_mpdbm.model import ModelShape
from pytorch_mpdbm.numerics import Rng
from pytorch_mpdbm.trainer import sample_masks


@pytest.fixture
def oracle_case(tiny_shape):
    rng = Rng(21)
    params = random_params(tiny_shape, rng)
    v, labels = random_data(tiny_shape, 3, rng)
    return params, v, sample_masks(tiny_shape, 3, rng), labels


def test_random_params(tiny_shape):
    params = random_params(tiny_shape, Rng(0), scale=0.5)
    again = random_params(tiny_shape, Rng(0), scale=0.5)

    for a, b in zip(params.tensors(), again.tensors()):
        assert torch.equal(a, b)
        assert float(a.abs().max()) <= 0.5

    centered = random_params(tiny_shape, Rng(0), centered=True)
    for offset in centered.offsets.groups():
        assert ((offset >= 0.05) & (offset <= 0.95)).all()


def test_random_data():
    v, labels = random_data(ModelShape(d=4, layer_sizes=(2,), k=3), 5, Rng(0))
    assert v.shape == (5, 4)
    assert (labels.sum(dim=-1) == 1.0).all()

    _, labels = random_data(ModelShape(d=4, layer_sizes=(2,), k=0), 5, Rng(0))
    assert labels is None


def test_finite_difference_gradient(tiny_params):
    grad = finite_difference_gradient(lambda p: float((p.weights[0] ** 2).sum() + p.label_bias.sum()), tiny_params)

    torch.testing.assert_close(grad.weights[0], 2.0 * tiny_params.weights[0], atol=1e-8, rtol=0.0)
    torch.testing.assert_close(grad.label_bias, torch.ones_like(tiny_params.label_bias), atol=1e-8, rtol=0.0)
    assert float(grad.weights[1].abs().max()) == 0.0


@pytest.mark.parametrize('n_iters', [1, 3])
@pytest.mark.parametrize('sparsity', [None, SparsityPenalty(target=0.2, slack=0.05, cost=0.5)])
def test_check_gradient(oracle_case, n_iters, sparsity):
    params, v, masks, labels = oracle_case

    result = check_gradient(params, v, masks, n_iters, labels=labels, sparsity=sparsity)

    assert result.passed, result.to_dict()
    assert result.details['n_iters'] == n_iters


def test_check_gradient_detects_corruption(oracle_case):
    params, v, masks, labels = oracle_case

    result = check_gradient(params, v, masks, 2, labels=labels, grad_fn=corrupted(default_gradient))

    assert not result.passed
    assert result.details['worst_tensor'] == 'weights.0'


@pytest.mark.parametrize('seed', range(20))
def test_check_gradient_random_models(tiny_shape, seed):
    rng = Rng(300 + seed)
    params = random_params(tiny_shape, rng)
    v, labels = random_data(tiny_shape, 3, rng)
    masks = sample_masks(tiny_shape, 3, rng)

    for n_iters in (1, 2, 5):
        result = check_gradient(params, v, masks, n_iters, labels=labels)
        assert result.passed, result.to_dict()


def test_check_kl_monotone(oracle_case):
    params, v, masks, labels = oracle_case

    result = check_kl_monotone(params, v, masks, n_sweeps=10, labels=labels)

    assert result.passed, result.to_dict()
    assert result.details['final_kl_max'] >= 0.0


@pytest.mark.parametrize('seed', range(5))
def test_check_gibbs_stationarity(seed):
    shape = ModelShape(d=2, layer_sizes=(1, 1), k=2)
    params = random_params(shape, Rng(5 + seed))

    result = check_gibbs_stationarity(
        params, Rng(50 + seed), n_chains=1000, n_samples=1000, burn_in=50, thin=2, tolerance=0.01
    )

    assert result.passed, result.to_dict()
    assert result.details == {'n_states': 32, 'n_samples': 1_000_000}
    assert result.value > 0.0


def test_check_centering_equivalence(tiny_shape, tiny_data):
    v, labels = tiny_data

    result = check_centering_equivalence(random_params(tiny_shape, Rng(8), centered=True), v, labels=labels)
    assert result.passed, result.to_dict()

    with pytest.raises(ValueError):
        check_centering_equivalence(random_params(tiny_shape, Rng(8)), v, labels=labels)


def test_run_oracle_checks():
    config = OracleCheckConfig(
        d=2,
        layer_sizes=(1, 1),
        k=2,
        n_models=2,
        batch_size=2,
        n_iters=(1, 2),
        kl_sweeps=5,
        gibbs_chains=200,
        gibbs_samples=200,
        gibbs_burn_in=20,
        gibbs_thin=2,
        gibbs_tolerance=0.05,
    )

    results = run_oracle_checks(config)

    assert len(results) == 2 * (2 * 2 + 3)
    assert all(r.passed for r in results), [r.to_dict() for r in results if not r.passed]
    assert [r.details['model'] for r in results] == [0] * 7 + [1] * 7
