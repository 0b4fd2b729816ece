from typing import Sequence, Tuple, Union

import torch
from torch import nn
from torch.nn.functional import relu

from pytorch_mpdbm.base.validation import Validator


class SparsityPenalty(nn.Module):
    r"""Hinge penalty on hidden activity, max(|m - t| - slack, 0) per hidden unit.

        By default m is the minibatch mean of a unit's final mean field activation. With `per_example=True` the
        hinge is applied to every example's activation and averaged over the batch instead.

    :param target: Union[float, Sequence[float]]. target activation t, one value or one per layer.
    :param slack: float. tolerated deviation from the target.
    :param cost: Union[float, Sequence[float]]. penalty weight, one value or one per layer.
    :param reduction: str. 'sum' or 'mean' over the units of a layer.
    :param per_example: bool. penalize per-example activations instead of the batch mean.
    """

    def __init__(
        self,
        target: Union[float, Sequence[float]] = 0.1,
        slack: float = 0.0,
        cost: Union[float, Sequence[float]] = 1.0,
        reduction: str = 'sum',
        per_example: bool = False,
    ):
        super().__init__()
        self.targets: Tuple[float, ...] = (target,) if isinstance(target, (int, float)) else tuple(target)
        self.costs: Tuple[float, ...] = (cost,) if isinstance(cost, (int, float)) else tuple(cost)

        for t in self.targets:
            Validator.validate_range(t, 'target', 0.0, 1.0, range_type='()')
        for c in self.costs:
            Validator.validate_non_negative(c, 'cost')
        Validator.validate_non_negative(slack, 'slack')
        Validator.validate_options(reduction, 'reduction', ['sum', 'mean'])

        self.slack = slack
        self.reduction = reduction
        self.per_example = per_example

    @staticmethod
    def _per_layer(values: Tuple[float, ...], i: int) -> float:
        return values[0] if len(values) == 1 else values[i]

    def forward(self, h_means: Sequence[torch.Tensor]) -> torch.Tensor:
        if len(self.targets) not in (1, len(h_means)) or len(self.costs) not in (1, len(h_means)):
            raise ValueError(f'[-] sparsity targets and costs must have 1 or {len(h_means)} entries')

        penalty = h_means[0].new_zeros(())
        for i, h in enumerate(h_means):
            m = h if self.per_example else h.mean(dim=0)
            hinge = relu((m - self._per_layer(self.targets, i)).abs() - self.slack)

            per_unit = hinge.sum(dim=-1) if self.reduction == 'sum' else hinge.mean(dim=-1)
            if self.per_example:
                per_unit = per_unit.mean()

            penalty = penalty + self._per_layer(self.costs, i) * per_unit

        return penalty
