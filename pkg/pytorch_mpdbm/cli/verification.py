"""Verification suite on tiny models: every check compares an approximate or analytic quantity with an exact one."""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import torch

from pytorch_mpdbm.cli.config import OracleCheckConfig
from pytorch_mpdbm.inference.mean_field import mf_kl_to_exact, mf_run
from pytorch_mpdbm.loss import MultiPredictionLoss, SparsityPenalty
from pytorch_mpdbm.model.dbm import (
    Gradient,
    ModelShape,
    Offsets,
    Params,
    to_centered,
    to_centered_gradient,
    to_uncentered,
)
from pytorch_mpdbm.model.mask import Mask
from pytorch_mpdbm.numerics import DTYPE, Rng
from pytorch_mpdbm.oracle.enumeration import DEFAULT_BOUND, EnumBound, exact_distribution, exact_ll_grad, state_index
from pytorch_mpdbm.trainer.objective import mp_grad, sample_masks
from pytorch_mpdbm.trainer.pcd import ChainPool

logger = logging.getLogger(__name__)

GRADIENT_FN = Callable[[Params, torch.Tensor, Mask, int, Optional[torch.Tensor], Optional[SparsityPenalty]], Gradient]


@dataclass
class CheckResult:
    r"""Outcome of one check.

    :param name: str. check name.
    :param passed: bool. whether the measured value is within the threshold.
    :param value: float. measured value.
    :param threshold: float. acceptance threshold.
    :param details: Dict[str, Any]. JSON-serializable context.
    """

    name: str
    passed: bool
    value: float
    threshold: float
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'passed': self.passed,
            'value': self.value,
            'threshold': self.threshold,
            'details': self.details,
        }


def random_params(shape: ModelShape, rng: Rng, scale: float = 1.0, centered: bool = False) -> Params:
    r"""Every parameter drawn from uniform(-scale, scale); offsets from uniform(0.05, 0.95) when centered."""

    def uniform(*size: int) -> torch.Tensor:
        return rng.uniform(size).mul_(2.0 * scale).sub_(scale)

    sizes = (shape.d, *shape.layer_sizes)
    offsets = None
    if centered:
        offsets = Offsets(
            visible=0.05 + 0.9 * rng.uniform((shape.d,)),
            hidden=tuple(0.05 + 0.9 * rng.uniform((n,)) for n in shape.layer_sizes),
            label=0.05 + 0.9 * rng.uniform((shape.k,)),
        )

    return Params(
        weights=tuple(uniform(sizes[i], sizes[i + 1]) for i in range(shape.n_layers)),
        label_weight=uniform(shape.layer_sizes[-1], shape.k),
        visible_bias=uniform(shape.d),
        hidden_biases=tuple(uniform(n) for n in shape.layer_sizes),
        label_bias=uniform(shape.k),
        offsets=offsets,
    )


def random_data(shape: ModelShape, batch_size: int, rng: Rng):
    r"""Random binary rows and one-hot labels (None when k = 0)."""
    v = rng.bernoulli(0.5, (batch_size, shape.d))
    if shape.k == 0:
        return v, None
    return v, torch.nn.functional.one_hot(rng.integers(shape.k, (batch_size,)), num_classes=shape.k).to(DTYPE)


@torch.no_grad()
def mp_objective_value(
    params: Params,
    data: torch.Tensor,
    masks: Mask,
    n_iters: int,
    labels: Optional[torch.Tensor] = None,
    sparsity: Optional[SparsityPenalty] = None,
) -> float:
    r"""The scalar `mp_grad` differentiates: batch-mean masked cross-entropy plus the sparsity penalty."""
    state, _ = mf_run(params, data, masks, n_iters, labels=labels)
    loss = MultiPredictionLoss(reduction='mean')(state.v, data, masks, y_pred=state.y, y_true=labels)
    if sparsity is not None:
        loss = loss + sparsity(state.h)
    return float(loss)


def finite_difference_gradient(fn: Callable[[Params], float], params: Params, eps: float = 1e-5) -> Gradient:
    r"""Central differences of `fn` w.r.t. every coordinate of every trainable tensor."""
    named = dict(params.named_tensors())

    grads: Dict[str, torch.Tensor] = {}
    for name, tensor in named.items():
        grad = torch.zeros_like(tensor)
        flat = grad.view(-1)
        for i in range(tensor.numel()):
            values = []
            for sign in (1.0, -1.0):
                shifted = tensor.detach().clone()
                shifted.view(-1)[i] += sign * eps
                values.append(fn(Params.from_named({**named, name: shifted}, offsets=params.offsets)))
            flat[i] = (values[0] - values[1]) / (2.0 * eps)
        grads[name] = grad

    return Gradient.from_named(grads)


def default_gradient(
    params: Params,
    data: torch.Tensor,
    masks: Mask,
    n_iters: int,
    labels: Optional[torch.Tensor],
    sparsity: Optional[SparsityPenalty],
) -> Gradient:
    return mp_grad(params, data, masks, n_iters, labels=labels, sparsity=sparsity)[0]


def check_gradient(
    params: Params,
    data: torch.Tensor,
    masks: Mask,
    n_iters: int,
    labels: Optional[torch.Tensor] = None,
    sparsity: Optional[SparsityPenalty] = None,
    eps: float = 1e-5,
    rel_tolerance: float = 1e-5,
    abs_tolerance: float = 1e-8,
    grad_fn: Optional[GRADIENT_FN] = None,
) -> CheckResult:
    r"""Compare the backpropagated multi-prediction gradient with central finite differences.

        A coordinate agrees when the absolute error is at most `abs_tolerance` or the relative error is at most
        `rel_tolerance`. The reported value is the largest relative error among coordinates above the absolute floor.

    :param grad_fn: Optional[GRADIENT_FN]. gradient under test, `mp_grad` by default.
    """
    grad_fn = default_gradient if grad_fn is None else grad_fn

    analytic = grad_fn(params, data, masks, n_iters, labels, sparsity)
    numeric = finite_difference_gradient(
        lambda p: mp_objective_value(p, data, masks, n_iters, labels=labels, sparsity=sparsity), params, eps=eps
    )

    worst: float = 0.0
    worst_name: Optional[str] = None
    numerics = dict(numeric.named_tensors())
    for name, a in analytic.named_tensors():
        b = numerics[name]
        if a.numel() == 0:
            continue

        error = (a - b).abs()
        relative = error / torch.maximum(a.abs(), b.abs()).clamp_min(torch.finfo(DTYPE).tiny)
        relative = torch.where(error <= abs_tolerance, torch.zeros_like(relative), relative)
        if float(relative.max()) > worst:
            worst, worst_name = float(relative.max()), name

    return CheckResult(
        name='gradient',
        passed=worst <= rel_tolerance,
        value=worst,
        threshold=rel_tolerance,
        details={'n_iters': n_iters, 'sparsity': sparsity is not None, 'worst_tensor': worst_name},
    )


@torch.no_grad()
def check_kl_monotone(
    params: Params,
    data: torch.Tensor,
    masks: Mask,
    n_sweeps: int = 20,
    labels: Optional[torch.Tensor] = None,
    slack: float = 1e-10,
    bound: EnumBound = DEFAULT_BOUND,
) -> CheckResult:
    r"""KL(Q || exact conditional) must not increase from one mean field sweep to the next and must end >= 0."""
    _, trace = mf_run(params, data, masks, n_sweeps, labels=labels)

    kls = torch.stack(
        [mf_kl_to_exact(params, data, masks, state, labels=labels, bound=bound) for state in trace.states]
    )
    increase: float = float((kls[1:] - kls[:-1]).max())
    final = kls[-1]

    return CheckResult(
        name='kl_monotone',
        passed=increase <= slack and bool((final >= 0.0).all()),
        value=increase,
        threshold=slack,
        details={'final_kl_max': float(final.max()), 'n_sweeps': n_sweeps},
    )


@torch.no_grad()
def check_gibbs_stationarity(
    params: Params,
    rng: Rng,
    n_chains: int = 1000,
    n_samples: int = 1000,
    burn_in: int = 100,
    thin: int = 5,
    tolerance: float = 0.01,
    bound: EnumBound = DEFAULT_BOUND,
) -> CheckResult:
    r"""Total variation distance between the empirical distribution of block Gibbs chains and the exact Boltzmann
    distribution, from `n_chains * n_samples` thinned samples."""
    shape = params.shape
    probs = exact_distribution(params, bound=bound).probs

    chains = ChainPool.random(shape, n_chains, rng)
    chains.advance(params, burn_in)

    counts = torch.zeros_like(probs)
    for _ in range(n_samples):
        state = chains.advance(params, thin)
        counts += torch.bincount(state_index(shape, state), minlength=probs.numel()).to(DTYPE)

    tv: float = 0.5 * float((counts / counts.sum() - probs).abs().sum())
    return CheckResult(
        name='gibbs_stationarity',
        passed=tv <= tolerance,
        value=tv,
        threshold=tolerance,
        details={'n_states': probs.numel(), 'n_samples': n_chains * n_samples},
    )


def check_centering_equivalence(
    params: Params,
    v: torch.Tensor,
    labels: Optional[torch.Tensor] = None,
    tolerance: float = 1e-12,
    grad_tolerance: float = 1e-9,
    bound: EnumBound = DEFAULT_BOUND,
) -> CheckResult:
    r"""A centered model and its uncentered form must define the same distribution, convert back exactly, and have
    log-likelihood gradients related by the centering chain rule."""
    if params.offsets is None:
        raise ValueError('[-] centering equivalence needs a centered model')

    uncentered = to_uncentered(params)
    prob_diff: float = float(
        (exact_distribution(params, bound=bound).probs - exact_distribution(uncentered, bound=bound).probs).abs().max()
    )

    back = to_centered(uncentered, params.offsets)
    round_trip: float = max(
        float((a - b).abs().max()) if a.numel() > 0 else 0.0 for a, b in zip(back.tensors(), params.tensors())
    )

    centered_grad = exact_ll_grad(params, v, labels=labels, bound=bound)
    mapped = to_centered_gradient(exact_ll_grad(uncentered, v, labels=labels, bound=bound), params.offsets)
    grad_diff: float = max(
        float((a - b).abs().max()) if a.numel() > 0 else 0.0 for a, b in zip(centered_grad.tensors(), mapped.tensors())
    )

    return CheckResult(
        name='centering_equivalence',
        passed=prob_diff <= tolerance and round_trip <= grad_tolerance and grad_diff <= grad_tolerance,
        value=prob_diff,
        threshold=tolerance,
        details={'round_trip': round_trip, 'gradient': grad_diff},
    )


def corrupted(grad_fn: GRADIENT_FN, delta: float = 1e-3) -> GRADIENT_FN:
    r"""Wrap a gradient function so that the first coordinate of the first coupling matrix is off by `delta`."""

    def fn(*args) -> Gradient:
        grad = grad_fn(*args)
        weights = grad.weights[0].clone()
        weights.view(-1)[0] += delta
        return Gradient.from_named({**dict(grad.named_tensors()), 'weights.0': weights})

    return fn


def run_oracle_checks(config: OracleCheckConfig) -> List[CheckResult]:
    r"""Run every check on `config.n_models` random tiny models."""
    shape = ModelShape(d=config.d, layer_sizes=config.layer_sizes, k=config.k)
    bound = EnumBound(max_total_units=config.max_total_units)
    bound.check(shape.n_units)

    grad_fn = corrupted(default_gradient) if config.corrupt_gradient else default_gradient
    sparsity = SparsityPenalty(target=0.2, slack=0.05, cost=0.5)

    rng = Rng(config.seed)
    results: List[CheckResult] = []
    for m in range(config.n_models):
        model_rng = rng.derive(m)
        params = random_params(shape, model_rng, scale=config.weight_scale)
        v, labels = random_data(shape, config.batch_size, model_rng)
        masks = sample_masks(shape, config.batch_size, model_rng)

        for n_iters in config.n_iters:
            for penalty in (None, sparsity):
                results.append(
                    check_gradient(
                        params,
                        v,
                        masks,
                        n_iters,
                        labels=labels,
                        sparsity=penalty,
                        eps=config.fd_eps,
                        rel_tolerance=config.fd_tolerance,
                        abs_tolerance=config.fd_abs_tolerance,
                        grad_fn=grad_fn,
                    )
                )

        results.append(
            check_kl_monotone(
                params, v, masks, n_sweeps=config.kl_sweeps, labels=labels, slack=config.kl_slack, bound=bound
            )
        )
        results.append(
            check_gibbs_stationarity(
                params,
                model_rng.derive(0),
                n_chains=config.gibbs_chains,
                n_samples=config.gibbs_samples,
                burn_in=config.gibbs_burn_in,
                thin=config.gibbs_thin,
                tolerance=config.gibbs_tolerance,
                bound=bound,
            )
        )
        results.append(
            check_centering_equivalence(
                random_params(shape, model_rng, scale=config.weight_scale, centered=True),
                v,
                labels=labels,
                tolerance=config.centering_tolerance,
                bound=bound,
            )
        )

        for result in results[-(2 * len(config.n_iters) + 3):]:
            result.details['model'] = m
            logger.info(
                'model %d %s: %s (%.3e <= %.3e)', m, result.name, result.passed, result.value, result.threshold
            )

    return results
