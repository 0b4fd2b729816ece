from abc import ABC, abstractmethod
from typing import Dict, List, Optional

from torch.optim import Optimizer

from pytorch_mpdbm.base.exception import NegativeLRError, NegativeStepError


class BaseLinearWarmupScheduler(ABC):
    r"""BaseLinearWarmupScheduler class.

        The scheduler classes based on this class have a linear warmup strategy from `init_value` to `max_value`.
        `key` names the param group entry being scheduled, so the same classes drive the learning rate ('lr') and the
        momentum ('momentum') of an optimizer.

    :param optimizer: Optional[Optimizer]. it will set the value to all param groups of the optimizer.
    :param t_max: int. total steps to train.
    :param max_value: float. maximum value.
    :param min_value: float. minimum value.
    :param init_value: float. initial value.
    :param warmup_steps: int. steps to warm-up.
    :param key: str. param group key to schedule.
    """

    def __init__(
        self,
        optimizer: Optional[Optimizer],
        t_max: int,
        max_value: float,
        min_value: float = 0.0,
        init_value: float = 0.0,
        warmup_steps: int = 0,
        key: str = 'lr',
    ):
        self.optimizer = optimizer
        self.total_steps = t_max
        self.max_value = max_value
        self.min_value = min_value
        self.init_value = init_value
        self.warmup_steps = warmup_steps
        self.key = key

        self.step_t: int = 0

        self.validate_parameters()

        self.last_value: List[float] = [self._first_value()]
        self._apply(self.last_value[0])

    def validate_parameters(self):
        if self.min_value < 0:
            raise NegativeLRError(self.min_value, f'min_{self.key}')

        if self.max_value < 0:
            raise NegativeLRError(self.max_value, f'max_{self.key}')

        if self.init_value < 0:
            raise NegativeLRError(self.init_value, f'init_{self.key}')

        if self.total_steps < 0:
            raise NegativeStepError(self.total_steps, 't_max')

        if self.warmup_steps < 0:
            raise NegativeStepError(self.warmup_steps, 'warmup_steps')

    def _first_value(self) -> float:
        return self.init_value if self.warmup_steps > 0 else self.max_value

    def _apply(self, value: float) -> None:
        if self.optimizer is not None:
            for param_group in self.optimizer.param_groups:
                param_group[self.key] = value

    def _progress(self) -> float:
        r"""Fraction of the decay phase done, in [0, 1]."""
        if self.total_steps <= self.warmup_steps:
            return 0.0
        return min(1.0, (self.step_t - self.warmup_steps) / (self.total_steps - self.warmup_steps))

    def step(self) -> float:
        if self.step_t < self.warmup_steps:
            value = self.init_value + (self.max_value - self.init_value) * self.step_t / self.warmup_steps
        elif self.step_t == self.warmup_steps:
            value = self.max_value
        else:
            value = self._step()

        self.step_t += 1

        self._apply(value)
        self.last_value = [value]

        return value

    @abstractmethod
    def _step(self) -> float:  # pragma: no cover
        raise NotImplementedError

    def get_value(self) -> float:
        return self.last_value[0]

    def state_dict(self) -> Dict:
        return {'step_t': self.step_t, 'last_value': self.last_value[0]}

    def load_state_dict(self, state_dict: Dict) -> None:
        self.step_t = int(state_dict['step_t'])
        self.last_value = [float(state_dict['last_value'])]
        self._apply(self.last_value[0])
