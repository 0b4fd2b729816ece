from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import torch

from pytorch_mpdbm.base.type import NORM_CAP, REDUCTION
from pytorch_mpdbm.base.validation import Validator
from pytorch_mpdbm.data.dataset import Dataset
from pytorch_mpdbm.loss import SparsityPenalty
from pytorch_mpdbm.model.dbm import Gradient, Params
from pytorch_mpdbm.numerics import Rng
from pytorch_mpdbm.trainer.base import BaseTrainer, ScheduleConfig
from pytorch_mpdbm.trainer.objective import mp_grad, sample_masks


def validate_cap(cap: NORM_CAP) -> None:
    caps = cap if isinstance(cap, tuple) else (cap,)
    for c in caps:
        if c is not None:
            Validator.validate_positive(c, 'column_norm_cap')


def validate_momentum(momentum: ScheduleConfig) -> None:
    for name in ('value', 'init_value', 'min_value'):
        Validator.validate_range(getattr(momentum, name), f'momentum.{name}', 0.0, 1.0)


@dataclass(frozen=True)
class SparsityConfig(Validator):
    r"""Sparsity penalty on the final hidden means.

    :param target: Union[float, Tuple[float, ...]]. target activation t in (0, 1), one value or one per layer.
    :param slack: float. tolerated deviation.
    :param cost: Union[float, Tuple[float, ...]]. penalty weight, one value or one per layer.
    :param reduction: REDUCTION. 'sum' or 'mean' over the units of a layer.
    :param per_example: bool. penalize each example's activation instead of the minibatch mean.
    """

    target: Union[float, Tuple[float, ...]] = 0.1
    slack: float = 0.0
    cost: Union[float, Tuple[float, ...]] = 1.0
    reduction: REDUCTION = 'sum'
    per_example: bool = False

    def __post_init__(self):
        self.build()

    def build(self) -> SparsityPenalty:
        return SparsityPenalty(
            target=self.target,
            slack=self.slack,
            cost=self.cost,
            reduction=self.reduction,
            per_example=self.per_example,
        )


@dataclass(frozen=True)
class MpConfig(Validator):
    r"""Multi-prediction training hyperparameters.

    :param n_mf_iters: int. mean field sweeps of the unrolled training graph, in [1, 50].
    :param learning_rate: ScheduleConfig. learning rate schedule.
    :param momentum: ScheduleConfig. momentum schedule, values in [0, 1).
    :param sparsity: Optional[SparsityConfig]. sparsity penalty, off when None.
    :param column_norm_cap: NORM_CAP. column max-norm, one for all matrices or one per matrix, off when None.
    :param minibatch_size: int. examples per step.
    :param epochs: int. number of epochs.
    :param patience: Optional[int]. early stopping patience in epochs, off when None.
    :param n_monitor_masks: int. sampled (example, mask) pairs for the per-epoch MP-objective estimate, 0 to skip.
    :param monitor_size: int. number of monitoring examples.
    :param n_eval_iters: int. mean field sweeps used for monitoring.
    """

    n_mf_iters: int = 10
    learning_rate: ScheduleConfig = field(default_factory=lambda: ScheduleConfig(value=0.1))
    momentum: ScheduleConfig = field(default_factory=lambda: ScheduleConfig(value=0.5))
    sparsity: Optional[SparsityConfig] = None
    column_norm_cap: NORM_CAP = None
    minibatch_size: int = 50
    epochs: int = 50
    patience: Optional[int] = None
    n_monitor_masks: int = 100
    monitor_size: int = 10000
    n_eval_iters: int = 10

    def __post_init__(self):
        self.validate_range(self.n_mf_iters, 'n_mf_iters', 1, 50, range_type='[]')
        validate_momentum(self.momentum)
        validate_cap(self.column_norm_cap)
        self.validate_positive(self.minibatch_size, 'minibatch_size')
        self.validate_non_negative(self.epochs, 'epochs')
        if self.patience is not None:
            self.validate_positive(self.patience, 'patience')
        self.validate_non_negative(self.n_monitor_masks, 'n_monitor_masks')
        self.validate_positive(self.monitor_size, 'monitor_size')
        self.validate_step(self.n_eval_iters, 'n_eval_iters')


class MPTrainer(BaseTrainer):
    r"""Multi-prediction training: every step samples one fresh mask per example and backpropagates the masked loss
    through the unrolled mean field graph."""

    def __init__(self, params: Params, dataset: Dataset, config: MpConfig, **kwargs):
        super().__init__(params, dataset, config, **kwargs)
        self.sparsity: Optional[SparsityPenalty] = config.sparsity.build() if config.sparsity is not None else None

    def compute_gradient(
        self, v: torch.Tensor, labels: Optional[torch.Tensor], rng: Rng
    ) -> Tuple[Gradient, Optional[float]]:
        masks = sample_masks(self.params.shape, v.shape[0], rng)
        return mp_grad(self.params, v, masks, self.config.n_mf_iters, labels=labels, sparsity=self.sparsity)


def train_mp(
    params: Params,
    dataset: Dataset,
    config: MpConfig,
    seed: int = 0,
    validation: Optional[Dataset] = None,
    verbose: bool = False,
) -> Params:
    r"""Train `params` (copied) by multi-prediction and return the result."""
    trainer = MPTrainer(params, dataset, config, seed=seed, validation=validation, verbose=verbose)
    return trainer.fit()
