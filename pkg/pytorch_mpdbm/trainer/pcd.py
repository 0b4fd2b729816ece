"""Persistent contrastive divergence for (centered) DBMs.

The positive phase runs mean field with v and y clamped. The negative phase advances persistent block Gibbs chains
and, with Rao-Blackwellization, replaces the odd block by its conditional means given the most recently sampled even
block. A pairwise statistic between an odd and an even group is E[odd | even sample] times the even sample, and the
odd group's bias statistic uses the same conditional means, so centered and uncentered gradients map onto each other
exactly.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import torch

from pytorch_mpdbm.base.type import NORM_CAP
from pytorch_mpdbm.base.validation import Validator
from pytorch_mpdbm.data.dataset import Dataset
from pytorch_mpdbm.inference.mean_field import mf_run
from pytorch_mpdbm.model.dbm import FullState, Gradient, ModelShape, Params, conditional_means
from pytorch_mpdbm.model.mask import Mask
from pytorch_mpdbm.numerics import DTYPE, Rng, outer
from pytorch_mpdbm.trainer.base import STREAM_CHAINS, BaseTrainer, ScheduleConfig
from pytorch_mpdbm.trainer.mp import validate_cap, validate_momentum


def _one_hot(index: torch.Tensor, k: int) -> torch.Tensor:
    return torch.nn.functional.one_hot(index, num_classes=k).to(DTYPE)


def _sample_group(params: Params, units: List[torch.Tensor], group: int, rng: Rng) -> torch.Tensor:
    means = conditional_means(params, units, group)
    if group == params.shape.label_group:
        return _one_hot(rng.categorical(means), params.shape.k)
    return rng.bernoulli(means)


def gibbs_sweep(params: Params, state: FullState, rng: Rng, clamp: Optional[Mask] = None) -> FullState:
    r"""Sample the odd block from its exact conditional, then the even block. Clamped variables keep their values.

    :param params: Params. model parameters.
    :param state: FullState. (C, ...) chain states.
    :param rng: Rng. random stream.
    :param clamp: Optional[Mask]. (C, D) variables that must not move.
    """
    shape = params.shape
    units = state.units()

    for parity in (1, 0):
        for g in shape.block(parity):
            sample = _sample_group(params, units, g, rng)
            if clamp is not None and g == 0:
                sample = torch.where(clamp.visible, units[0], sample)
            elif clamp is not None and g == shape.label_group:
                sample = torch.where(clamp.label.unsqueeze(-1), units[g], sample)
            units[g] = sample

    return FullState.from_units(units)


@dataclass
class ChainPool:
    r"""Persistent negative-phase chains and the random stream that advances them.

    :param state: FullState. (n_chains, ...) chain states.
    :param rng: Rng. random stream.
    """

    state: FullState
    rng: Rng

    def __len__(self) -> int:
        return self.state.v.shape[0]

    @classmethod
    def random(cls, shape: ModelShape, n_chains: int, rng: Rng) -> 'ChainPool':
        r"""Chains started from uniformly random binary states (uniform label)."""
        Validator.validate_positive(n_chains, 'n_chains')

        v = rng.bernoulli(0.5, (n_chains, shape.d))
        h = tuple(rng.bernoulli(0.5, (n_chains, n)) for n in shape.layer_sizes)
        y = _one_hot(rng.integers(shape.k, (n_chains,)), shape.k) if shape.k > 0 else None

        return cls(state=FullState(v=v, h=h, y=y), rng=rng)

    def advance(self, params: Params, n_sweeps: int) -> FullState:
        for _ in range(n_sweeps):
            self.state = gibbs_sweep(params, self.state, self.rng)
        return self.state


def sufficient_statistics(params: Params, units: List[torch.Tensor], reduce: bool = True) -> Gradient:
    r"""Centered sufficient statistics, laid out like the parameters.

        Coupling entries are (x_a - offset_a)(x_b - offset_b)^T and bias entries (x - offset). Every group enters its
        bias and its coupling statistics with the same values.

    :param params: Params. model parameters (for the offsets).
    :param units: List[torch.Tensor]. (B, n_g) values of every group.
    :param reduce: bool. average over the batch; otherwise keep one statistic per row.
    """
    xs = [u - beta for u, beta in zip(units, params.group_offsets())]

    if reduce:
        biases = [x.mean(dim=0) for x in xs]
        pairs: Dict[Tuple[int, int], torch.Tensor] = {(a, b): outer(xs[a], xs[b]) for a, b, _ in params.edges()}
        empty = torch.zeros_like(params.label_weight)
    else:
        biases = xs
        pairs = {(a, b): xs[a].unsqueeze(-1) * xs[b].unsqueeze(-2) for a, b, _ in params.edges()}
        empty = params.label_weight.new_zeros((xs[0].shape[0], *params.label_weight.shape))

    n_layers: int = len(params.weights)
    return Gradient(
        weights=tuple(pairs[(i, i + 1)] for i in range(n_layers)),
        label_weight=pairs.get((n_layers, n_layers + 1), empty),
        visible_bias=biases[0],
        hidden_biases=tuple(biases[1:-1]),
        label_bias=biases[-1],
    )


def negative_statistics(params: Params, state: FullState, rao_blackwell: bool = True, reduce: bool = True) -> Gradient:
    r"""Model-side statistics from chain states whose last half-sweep sampled the even block.

        With Rao-Blackwellization the odd groups enter as their conditional means given the sampled even block, in
        both their bias and their coupling statistics. Even groups enter as samples.

    :param params: Params. model parameters.
    :param state: FullState. (C, ...) chain states.
    :param rao_blackwell: bool. replace odd-group samples by conditional means.
    :param reduce: bool. average over the chains; otherwise keep one statistic per chain.
    """
    units = state.units()
    if rao_blackwell:
        odd = params.shape.block(1)
        units = [conditional_means(params, units, g) if g in odd else u for g, u in enumerate(units)]

    return sufficient_statistics(params, units, reduce=reduce)


def pcd_grad(
    params: Params,
    v: torch.Tensor,
    labels: Optional[torch.Tensor],
    chains: ChainPool,
    mf_iters_pos: int = 10,
    gibbs_steps_neg: int = 1,
    rao_blackwell: bool = True,
) -> Gradient:
    r"""Descent gradient of the negative log-likelihood: negative-phase minus positive-phase statistics.

    :param params: Params. model parameters.
    :param v: torch.Tensor. (B, D) minibatch.
    :param labels: Optional[torch.Tensor]. (B, k) one-hot labels, required when k > 0.
    :param chains: ChainPool. persistent chains, advanced in place.
    :param mf_iters_pos: int. mean field sweeps of the positive phase.
    :param gibbs_steps_neg: int. Gibbs sweeps per step.
    :param rao_blackwell: bool. use conditional expectations in the negative phase.
    """
    shape = params.shape
    if shape.k > 0 and labels is None:
        raise ValueError('[-] labels must be given for a model with a label unit')
    Validator.validate_step(gibbs_steps_neg, 'gibbs_steps_neg')

    with torch.no_grad():
        mask = Mask.all_observed(shape, batch_size=v.shape[0])
        positive, _ = mf_run(params, v, mask, mf_iters_pos, labels=labels)

        state = chains.advance(params, gibbs_steps_neg)
        pos = sufficient_statistics(params, positive.units())
        neg = negative_statistics(params, state, rao_blackwell=rao_blackwell)

    return neg.zip_map(pos, lambda n, p: n - p)


@dataclass(frozen=True)
class PcdConfig(Validator):
    r"""PCD training hyperparameters.

    :param learning_rate: ScheduleConfig. learning rate schedule.
    :param momentum: ScheduleConfig. momentum schedule, values in [0, 1).
    :param n_chains: int. number of persistent chains.
    :param mf_iters_pos: int. mean field sweeps of the positive phase.
    :param gibbs_steps_neg: int. Gibbs sweeps per step.
    :param rao_blackwell: bool. Rao-Blackwellized negative phase.
    :param column_norm_cap: NORM_CAP. column max-norm, off when None.
    :param minibatch_size: int. examples per step.
    :param epochs: int. number of epochs.
    :param patience: Optional[int]. early stopping patience in epochs, off when None.
    :param n_monitor_masks: int. sampled (example, mask) pairs for the per-epoch MP-objective estimate, 0 to skip.
    :param monitor_size: int. number of monitoring examples.
    :param n_eval_iters: int. mean field sweeps used for monitoring.
    """

    learning_rate: ScheduleConfig = field(default_factory=lambda: ScheduleConfig(value=0.1))
    momentum: ScheduleConfig = field(default_factory=lambda: ScheduleConfig(value=0.5))
    n_chains: int = 100
    mf_iters_pos: int = 10
    gibbs_steps_neg: int = 1
    rao_blackwell: bool = True
    column_norm_cap: NORM_CAP = None
    minibatch_size: int = 50
    epochs: int = 100
    patience: Optional[int] = None
    n_monitor_masks: int = 100
    monitor_size: int = 10000
    n_eval_iters: int = 10

    def __post_init__(self):
        validate_momentum(self.momentum)
        validate_cap(self.column_norm_cap)
        self.validate_positive(self.n_chains, 'n_chains')
        self.validate_step(self.mf_iters_pos, 'mf_iters_pos')
        self.validate_step(self.gibbs_steps_neg, 'gibbs_steps_neg')
        self.validate_positive(self.minibatch_size, 'minibatch_size')
        self.validate_non_negative(self.epochs, 'epochs')
        if self.patience is not None:
            self.validate_positive(self.patience, 'patience')
        self.validate_non_negative(self.n_monitor_masks, 'n_monitor_masks')
        self.validate_positive(self.monitor_size, 'monitor_size')
        self.validate_step(self.n_eval_iters, 'n_eval_iters')


class PCDTrainer(BaseTrainer):
    r"""PCD training with persistent chains carried across steps and epochs."""

    def __init__(self, params: Params, dataset: Dataset, config: PcdConfig, **kwargs):
        super().__init__(params, dataset, config, **kwargs)
        self.chains = ChainPool.random(self.params.shape, config.n_chains, self.rng.derive(STREAM_CHAINS))

    def compute_gradient(
        self, v: torch.Tensor, labels: Optional[torch.Tensor], rng: Rng
    ) -> Tuple[Gradient, Optional[float]]:
        grad = pcd_grad(
            self.params,
            v,
            labels,
            self.chains,
            mf_iters_pos=self.config.mf_iters_pos,
            gibbs_steps_neg=self.config.gibbs_steps_neg,
            rao_blackwell=self.config.rao_blackwell,
        )
        return grad, None

    def state_dict(self) -> Dict:
        state = super().state_dict()
        state['chains'] = {
            'state': {f'chains.{i}': u.clone() for i, u in enumerate(self.chains.state.units())},
            'rng_state': self.chains.rng.state,
        }
        return state

    def load_state_dict(self, state: Dict) -> None:
        super().load_state_dict(state)
        chains = state['chains']
        units = [chains['state'][f'chains.{i}'].clone() for i in range(len(chains['state']))]
        self.chains.state = FullState.from_units(units)
        self.chains.rng.state = chains['rng_state']


def train_pcd(
    params: Params,
    dataset: Dataset,
    config: PcdConfig,
    seed: int = 0,
    validation: Optional[Dataset] = None,
    verbose: bool = False,
) -> Params:
    r"""Train `params` (copied) with PCD and return the result."""
    trainer = PCDTrainer(params, dataset, config, seed=seed, validation=validation, verbose=verbose)
    return trainer.fit()
