from typing import List, Optional, Tuple

import torch

from pytorch_mpdbm.base.exception import NoSparseGradientError
from pytorch_mpdbm.base.optimizer import BaseOptimizer
from pytorch_mpdbm.base.type import CLOSURE, DEFAULTS, GROUP, LOSS, NORM_CAP, PARAMETERS
from pytorch_mpdbm.model.dbm import Gradient, Params


def _caps(cap: NORM_CAP, n_matrices: int) -> Tuple[Optional[float], ...]:
    if cap is None or isinstance(cap, (int, float)):
        return (cap,) * n_matrices
    if len(cap) != n_matrices:
        raise ValueError(f'[-] column_norm_cap must have {n_matrices} entries, got {len(cap)}')
    return tuple(cap)


class MaxNormSGD(BaseOptimizer):
    r"""SGD with heavy-ball momentum followed by a column max-norm projection.

        Each parameter group may carry its own `max_norm`; groups with `max_norm=None` (biases) are not projected.
        `param_groups_of` builds the groups for DBM parameters, one per coupling matrix plus one for all biases.

    :param params: PARAMETERS. iterable of parameters to optimize or dicts defining parameter groups.
    :param lr: float. learning rate.
    :param momentum: float. momentum factor.
    :param max_norm: Optional[float]. default column norm cap of a group.
    """

    def __init__(
        self,
        params: PARAMETERS,
        lr: float = 1e-2,
        momentum: float = 0.0,
        max_norm: Optional[float] = None,
        **kwargs,
    ):
        self.validate_learning_rate(lr)
        self.validate_range(momentum, 'momentum', 0.0, 1.0)
        if max_norm is not None:
            self.validate_positive(max_norm, 'max_norm')

        defaults: DEFAULTS = {'lr': lr, 'momentum': momentum, 'max_norm': max_norm}

        super().__init__(params, defaults)

    def __str__(self) -> str:
        return 'MaxNormSGD'

    @staticmethod
    def param_groups_of(params: Params, cap: NORM_CAP = None) -> List[GROUP]:
        r"""Parameter groups for DBM parameters: one per coupling matrix with its cap, one for the biases.

        :param params: Params. model parameters (the tensors are optimized in place).
        :param cap: NORM_CAP. one cap for every matrix, one per matrix (weights then label matrix), or None.
        """
        matrices = [*params.weights, params.label_weight]
        groups: List[GROUP] = [{'params': [w], 'max_norm': c} for w, c in zip(matrices, _caps(cap, len(matrices)))]
        groups.append({'params': params.biases(), 'max_norm': None})
        return groups

    def init_group(self, group: GROUP, **kwargs) -> None:
        for p in group['params']:
            if p.grad is None:
                continue

            if p.grad.is_sparse:
                raise NoSparseGradientError(str(self))

            state = self.state[p]
            if len(state) == 0:
                state['velocity'] = torch.zeros_like(p)

    @torch.no_grad()
    def step(self, closure: CLOSURE = None) -> LOSS:
        loss: LOSS = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()

        for group in self.param_groups:
            self.init_group(group)
            group['step'] = group.get('step', 0) + 1

            for p in group['params']:
                if p.grad is None:
                    continue

                self.apply_heavy_ball(p, p.grad, self.state[p]['velocity'], group['lr'], group['momentum'])
                self.apply_max_norm(p, group['max_norm'])

        return loss


def max_norm_project(params: Params, cap: NORM_CAP) -> Params:
    r"""Rescale every coupling-matrix column whose norm exceeds the cap to norm exactly the cap. Biases untouched.

    :param params: Params. parameters.
    :param cap: NORM_CAP. one cap for every matrix, one per matrix (weights then label matrix), or None.
    """
    caps = _caps(cap, len(params.weights) + 1)
    for c in caps:
        if c is not None:
            BaseOptimizer.validate_positive(c, 'cap')

    def project(w: torch.Tensor, c: Optional[float]) -> torch.Tensor:
        if c is None or w.numel() == 0:
            return w.clone()
        return w * BaseOptimizer.column_norm_scale(w, c)

    return Params(
        weights=tuple(project(w, c) for w, c in zip(params.weights, caps)),
        label_weight=project(params.label_weight, caps[-1]),
        visible_bias=params.visible_bias.clone(),
        hidden_biases=tuple(b.clone() for b in params.hidden_biases),
        label_bias=params.label_bias.clone(),
        offsets=params.offsets,
    )


def sgd_step(
    params: Params,
    grad: Gradient,
    velocity: Optional[Gradient],
    lr: float,
    momentum: float,
    cap: NORM_CAP = None,
) -> Tuple[Params, Gradient]:
    r"""One heavy-ball step: velocity <- momentum * velocity - lr * grad, params <- params + velocity, then project.

    :param params: Params. parameters.
    :param grad: Gradient. descent gradient.
    :param velocity: Optional[Gradient]. velocity, zeros when None.
    :param lr: float. learning rate.
    :param momentum: float. momentum factor.
    :param cap: NORM_CAP. column norm cap(s).
    """
    BaseOptimizer.validate_learning_rate(lr)
    BaseOptimizer.validate_range(momentum, 'momentum', 0.0, 1.0)

    velocity = velocity if velocity is not None else Gradient.zeros_like(params)
    new_velocity = velocity.zip_map(grad, lambda v, g: momentum * v - lr * g)
    return max_norm_project(params.zip_map(new_velocity, lambda p, v: p + v), cap), new_velocity
