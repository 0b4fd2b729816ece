"""The multi-prediction objective: mask sampling, the masked loss and its gradient through unrolled mean field."""

from typing import Optional, Sequence, Tuple, Union

import torch

from pytorch_mpdbm.base.exception import EmptyInputError, NonFiniteGradientError, NoValidMaskError
from pytorch_mpdbm.base.validation import Validator
from pytorch_mpdbm.inference.mean_field import mf_run
from pytorch_mpdbm.loss import MultiPredictionLoss, SparsityPenalty
from pytorch_mpdbm.model.dbm import Gradient, ModelShape, Params, gradient_of
from pytorch_mpdbm.model.mask import Mask
from pytorch_mpdbm.numerics import Rng
from pytorch_mpdbm.oracle.enumeration import DEFAULT_BOUND, EnumBound, binary_configurations

MAX_MASK_TRIALS: int = 1000


def sample_mask(shape: ModelShape, rng: Rng, max_trials: int = MAX_MASK_TRIALS) -> Mask:
    r"""Observe each visible variable, and the label when there is one, independently with probability 0.5.

        Masks without inputs or without targets are rejected and redrawn.

    :param shape: ModelShape. model shape.
    :param rng: Rng. random stream, D (+1) bits per attempt.
    :param max_trials: int. number of rejections before giving up.
    """
    for _ in range(max_trials):
        visible = rng.bernoulli(0.5, (shape.d,)).to(torch.bool)
        label = rng.bernoulli(0.5, ()).to(torch.bool) if shape.k > 0 else torch.tensor(False)

        mask = Mask(visible=visible, label=label)
        if bool(mask.is_valid(shape)):
            return mask

    raise NoValidMaskError(max_trials)


def sample_masks(shape: ModelShape, batch_size: int, rng: Rng, max_trials: int = MAX_MASK_TRIALS) -> Mask:
    r"""One independently sampled mask per example, stacked into a (batch_size, D) mask."""
    masks = [sample_mask(shape, rng, max_trials=max_trials) for _ in range(batch_size)]
    return Mask(visible=torch.stack([m.visible for m in masks]), label=torch.stack([m.label for m in masks]))


def enumerate_masks(shape: ModelShape, bound: EnumBound = DEFAULT_BOUND) -> Mask:
    r"""Every valid mask of a small model, as one batched mask."""
    n: int = shape.d + (1 if shape.k > 0 else 0)
    bound.check(n)

    bits = binary_configurations(n).to(torch.bool)
    label = bits[:, shape.d] if shape.k > 0 else torch.zeros(bits.shape[0], dtype=torch.bool)
    masks = Mask(visible=bits[:, : shape.d], label=label)

    return masks[masks.is_valid(shape)]


def mp_loss(
    params: Params,
    data: torch.Tensor,
    mask: Mask,
    n_iters: int,
    labels: Optional[torch.Tensor] = None,
    eps: float = 1e-12,
) -> torch.Tensor:
    r"""Per-example cross-entropy of the targets of `mask` under standard mean field run for `n_iters` sweeps.

    :param params: Params. model parameters.
    :param data: torch.Tensor. (B, D) visible data.
    :param mask: Mask. (B, D) batched mask.
    :param n_iters: int. number of mean field sweeps.
    :param labels: Optional[torch.Tensor]. (B, k) one-hot labels, required when k > 0.
    :param eps: float. probability clipping.
    """
    if params.shape.k > 0 and labels is None:
        raise ValueError('[-] labels must be given for a model with a label unit')

    state, _ = mf_run(params, data, mask, n_iters, mode='standard', labels=labels)
    return MultiPredictionLoss(eps=eps)(state.v, data, mask, y_pred=state.y, y_true=labels)


def sparsity_penalty(
    h_means: Sequence[torch.Tensor],
    target: Union[float, Sequence[float]],
    slack: float,
    cost: Union[float, Sequence[float]] = 1.0,
    reduction: str = 'sum',
    per_example: bool = False,
) -> torch.Tensor:
    r"""sum_j max(|m_j - t| - slack, 0) over the hidden units of every layer, m_j the batch mean of h_j."""
    return SparsityPenalty(target=target, slack=slack, cost=cost, reduction=reduction, per_example=per_example)(
        h_means
    )


def mp_grad(
    params: Params,
    data: torch.Tensor,
    masks: Mask,
    n_iters: int,
    labels: Optional[torch.Tensor] = None,
    sparsity: Optional[SparsityPenalty] = None,
) -> Tuple[Gradient, float]:
    r"""Gradient of the batch-mean multi-prediction loss (plus the sparsity penalty) through every mean field sweep.

    :param params: Params. model parameters.
    :param data: torch.Tensor. (B, D) visible data.
    :param masks: Mask. (B, D) one mask per example.
    :param n_iters: int. number of mean field sweeps.
    :param labels: Optional[torch.Tensor]. (B, k) one-hot labels.
    :param sparsity: Optional[SparsityPenalty]. penalty on the final hidden means.
    """
    if len(masks) != data.shape[0]:
        raise ValueError(f'[-] need one mask per example, got {len(masks)} masks for {data.shape[0]} examples')

    leaves = params.leaves()

    state, _ = mf_run(leaves, data, masks, n_iters, mode='standard', labels=labels)
    loss = MultiPredictionLoss(reduction='mean')(state.v, data, masks, y_pred=state.y, y_true=labels)
    if sparsity is not None:
        loss = loss + sparsity(state.h)

    grad = gradient_of(loss, leaves)
    for name, g in grad.named_tensors():
        if not bool(torch.isfinite(g).all()):
            raise NonFiniteGradientError(name)

    return grad.detach(), float(loss.detach())


@torch.no_grad()
def mp_objective_estimate(
    params: Params,
    v: torch.Tensor,
    labels: Optional[torch.Tensor],
    n_masks: int,
    n_iters: int,
    rng: Rng,
) -> float:
    r"""Monte-Carlo estimate of the multi-prediction objective.

        Draws `n_masks` (example, mask) pairs, the example uniformly (all indices first) and then one mask per pair.

    :param params: Params. model parameters.
    :param v: torch.Tensor. (N, D) examples.
    :param labels: Optional[torch.Tensor]. (N, k) one-hot labels.
    :param n_masks: int. number of sampled pairs.
    :param n_iters: int. number of mean field sweeps.
    :param rng: Rng. random stream.
    """
    if v.shape[0] == 0:
        raise EmptyInputError('mp_objective_estimate')
    Validator.validate_step(n_masks, 'n_masks')

    index = rng.integers(v.shape[0], (n_masks,))
    masks = sample_masks(params.shape, n_masks, rng)

    loss = mp_loss(params, v[index], masks, n_iters, labels=None if labels is None else labels[index])
    return float(loss.mean())


@torch.no_grad()
def exact_mp_objective(
    params: Params,
    v: torch.Tensor,
    labels: Optional[torch.Tensor],
    n_iters: int,
    bound: EnumBound = DEFAULT_BOUND,
) -> float:
    r"""Multi-prediction objective averaged over every example and every valid mask (uniformly).

        This is the expectation `mp_objective_estimate` samples from, since rejection sampling of fair bits is uniform
        over the valid masks.
    """
    if v.shape[0] == 0:
        raise EmptyInputError('exact_mp_objective')

    masks = enumerate_masks(params.shape, bound=bound)
    n_masks: int = len(masks)

    total: float = 0.0
    for i in range(v.shape[0]):
        data = v[i].expand(n_masks, -1)
        label = None if labels is None else labels[i].expand(n_masks, -1)
        total += float(mp_loss(params, data, masks, n_iters, labels=label).sum())

    return total / (n_masks * v.shape[0])
