from abc import ABC, abstractmethod
from typing import Optional

import torch
from torch.optim import Optimizer

from pytorch_mpdbm.base.type import CLOSURE, DEFAULTS, GROUP, LOSS, PARAMETERS
from pytorch_mpdbm.base.validation import Validator


class BaseOptimizer(ABC, Validator, Optimizer):
    r"""Base optimizer class. Provides common functionalities for the optimizers."""

    def __init__(self, params: PARAMETERS, defaults: DEFAULTS) -> None:
        super().__init__(params, defaults)

    @staticmethod
    def column_norm_scale(p: torch.Tensor, max_norm: float) -> torch.Tensor:
        r"""Per-column factors that bring every column with Euclidean norm above `max_norm` down to exactly `max_norm`.

        :param p: torch.Tensor. (rows, cols) matrix.
        :param max_norm: float. column norm cap.
        """
        norms = p.norm(p=2, dim=0, keepdim=True)
        return torch.where(norms > max_norm, max_norm / norms, torch.ones_like(norms))

    @staticmethod
    def apply_max_norm(p: torch.Tensor, max_norm: Optional[float]) -> None:
        r"""Project the columns of a matrix onto the ball of radius `max_norm`, in place. Vectors are left untouched.

        :param p: torch.Tensor. parameter.
        :param max_norm: Optional[float]. column norm cap, None to disable.
        """
        if max_norm is None or p.dim() != 2 or p.numel() == 0:
            return
        p.mul_(BaseOptimizer.column_norm_scale(p, max_norm))

    @staticmethod
    def apply_heavy_ball(
        p: torch.Tensor, grad: torch.Tensor, velocity: torch.Tensor, lr: float, momentum: float
    ) -> None:
        r"""Classical momentum, velocity = momentum * velocity - lr * grad, then p += velocity. In place.

        :param p: torch.Tensor. parameter.
        :param grad: torch.Tensor. gradient.
        :param velocity: torch.Tensor. velocity buffer.
        :param lr: float. learning rate.
        :param momentum: float. momentum factor.
        """
        velocity.mul_(momentum).add_(grad, alpha=-lr)
        p.add_(velocity)

    @abstractmethod
    def init_group(self, group: GROUP, **kwargs) -> None:  # pragma: no cover
        r"""Initialize the group of the optimizer."""
        return

    def step(self, closure: CLOSURE = None) -> LOSS:  # pragma: no cover
        raise NotImplementedError
