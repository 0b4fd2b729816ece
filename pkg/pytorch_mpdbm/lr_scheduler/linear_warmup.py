import math

from pytorch_mpdbm.base.scheduler import BaseLinearWarmupScheduler


class ConstantScheduler(BaseLinearWarmupScheduler):
    r"""Constant schedule w/ linear warmup. Holds `max_value` once the warmup is over."""

    def _step(self) -> float:
        return self.max_value


class LinearScheduler(BaseLinearWarmupScheduler):
    r"""Linear decay from `max_value` to `min_value` w/ linear warmup."""

    def _step(self) -> float:
        return self.max_value + (self.min_value - self.max_value) * self._progress()


class CosineScheduler(BaseLinearWarmupScheduler):
    r"""Cosine decay from `max_value` to `min_value` w/ linear warmup."""

    def _step(self) -> float:
        phase: float = self._progress() * math.pi
        return self.min_value + (self.max_value - self.min_value) * (math.cos(phase) + 1.0) / 2.0
