import logging
import math
import time
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import torch
from tqdm import tqdm

from pytorch_mpdbm.base.exception import NonFiniteLossError
from pytorch_mpdbm.base.scheduler import BaseLinearWarmupScheduler
from pytorch_mpdbm.base.validation import Validator
from pytorch_mpdbm.data.dataset import Dataset
from pytorch_mpdbm.evaluation import error_rate
from pytorch_mpdbm.lr_scheduler import get_supported_schedulers, load_scheduler
from pytorch_mpdbm.model.dbm import Gradient, Params
from pytorch_mpdbm.numerics import Rng
from pytorch_mpdbm.optimizer.sgd import MaxNormSGD
from pytorch_mpdbm.trainer.objective import mp_objective_estimate

logger = logging.getLogger(__name__)

STREAM_INIT: int = 0
STREAM_SHUFFLE: int = 1
STREAM_MASKS: int = 2
STREAM_MONITOR: int = 3
STREAM_CHAINS: int = 4

EPOCH_CALLBACK = Callable[['BaseTrainer', Dict[str, Any]], None]


@dataclass(frozen=True)
class ScheduleConfig(Validator):
    r"""Per-epoch schedule of an optimizer hyperparameter.

    :param name: str. scheduler name, see `get_supported_schedulers`.
    :param value: float. value after the warmup (the peak for decaying schedules).
    :param init_value: float. value at the first epoch of the warmup.
    :param min_value: float. final value of decaying schedules.
    :param warmup_epochs: int. epochs of linear warmup from `init_value` to `value`.
    """

    name: str = 'constant'
    value: float = 0.05
    init_value: float = 0.0
    min_value: float = 0.0
    warmup_epochs: int = 0

    def __post_init__(self):
        self.validate_options(self.name, 'name', get_supported_schedulers())
        self.validate_non_negative(self.value, 'value')
        self.validate_non_negative(self.init_value, 'init_value')
        self.validate_non_negative(self.min_value, 'min_value')
        self.validate_non_negative(self.warmup_epochs, 'warmup_epochs')

    def build(self, optimizer: Optional[MaxNormSGD], key: str, t_max: int) -> BaseLinearWarmupScheduler:
        return load_scheduler(self.name)(
            optimizer,
            t_max=t_max,
            max_value=self.value,
            min_value=self.min_value,
            init_value=self.init_value,
            warmup_steps=self.warmup_epochs,
            key=key,
        )


class BaseTrainer(ABC):
    r"""Epoch loop shared by the trainers.

        Parameters are optimized in place by `MaxNormSGD`. Every random choice of epoch `e` comes from a stream derived
        from (seed, stream, e), so a run resumed from `state_dict` replays the remaining epochs exactly.

    :param params: Params. initial parameters (copied).
    :param dataset: Dataset. training examples.
    :param config: training config with learning_rate, momentum, column_norm_cap, minibatch_size, epochs, patience,
        n_monitor_masks, monitor_size and n_eval_iters fields.
    :param seed: int. seed of the run.
    :param validation: Optional[Dataset]. validation examples for monitoring and early stopping.
    :param verbose: bool. show a progress bar.
    """

    def __init__(
        self,
        params: Params,
        dataset: Dataset,
        config,
        seed: int = 0,
        validation: Optional[Dataset] = None,
        verbose: bool = False,
    ):
        self.params: Params = params.clone()
        self.dataset = dataset
        self.validation = validation
        self.config = config
        self.rng = Rng(seed)
        self.verbose = verbose

        if getattr(config, 'patience', None) is not None and (validation is None or len(validation) == 0):
            warnings.warn(
                '`patience` is set but there is no validation set. early stopping is disabled.',
                category=UserWarning,
                stacklevel=2,
            )

        self.epoch: int = 0
        self.best_error: float = math.inf
        self.best_params: Optional[Params] = None
        self.bad_epochs: int = 0
        self.stopped: bool = False
        self.history: List[Dict[str, Any]] = []

        self.optimizer = MaxNormSGD(
            MaxNormSGD.param_groups_of(self.params, config.column_norm_cap),
            lr=config.learning_rate.value,
        )
        self.lr_scheduler = config.learning_rate.build(self.optimizer, 'lr', t_max=config.epochs)
        self.momentum_scheduler = config.momentum.build(self.optimizer, 'momentum', t_max=config.epochs)

    @abstractmethod
    def compute_gradient(
        self, v: torch.Tensor, labels: Optional[torch.Tensor], rng: Rng
    ) -> Tuple[Gradient, Optional[float]]:  # pragma: no cover
        r"""Descent gradient of one minibatch and its training loss (None when the method has no tractable loss)."""
        raise NotImplementedError

    def apply_gradient(self, grad: Gradient) -> None:
        for p, g in zip(self.params.tensors(), grad.tensors()):
            p.grad = g.detach().clone()
        self.optimizer.step()
        self.optimizer.zero_grad(set_to_none=True)

    def train_epoch(self) -> Dict[str, Any]:
        r"""Run one epoch: step the schedules, sweep shuffled minibatches, monitor, update early stopping."""
        start: float = time.perf_counter()

        lr: float = self.lr_scheduler.step()
        momentum: float = self.momentum_scheduler.step()

        losses: List[float] = []
        shuffle = self.rng.derive(STREAM_SHUFFLE, self.epoch)
        batch_rng = self.rng.derive(STREAM_MASKS, self.epoch)
        for v, labels in self.dataset.batches(self.config.minibatch_size, shuffle):
            grad, loss = self.compute_gradient(v, labels, batch_rng)
            if loss is not None:
                if not math.isfinite(loss):
                    raise NonFiniteLossError(self.epoch, loss)
                losses.append(loss)
            self.apply_gradient(grad)

        record: Dict[str, Any] = {
            'epoch': self.epoch + 1,
            'train_loss': sum(losses) / len(losses) if losses else None,
            'learning_rate': lr,
            'momentum': momentum,
            **self.evaluate(),
            'wall_time': time.perf_counter() - start,
        }

        self.epoch += 1
        self.history.append(record)
        self._update_early_stopping(record['validation_error'])

        logger.info(
            'epoch: %d, train loss: %s, mp objective: %s, validation error: %s',
            record['epoch'],
            record['train_loss'],
            record['mp_objective'],
            record['validation_error'],
        )

        return record

    def evaluate(self) -> Dict[str, Optional[float]]:
        r"""Validation classification error (all pixels observed) and an MP-objective estimate."""
        data = self.validation if self.validation is not None and len(self.validation) > 0 else self.dataset
        data = data.subset(torch.arange(min(len(data), self.config.monitor_size)))

        validation_error = None
        if self.validation is not None and self.params.shape.k > 0 and len(self.validation) > 0:
            validation_error = error_rate(self.params, data, n_iters=self.config.n_eval_iters)

        mp_objective = None
        if self.config.n_monitor_masks > 0 and len(data) > 0:
            mp_objective = mp_objective_estimate(
                self.params,
                data.v,
                data.one_hot_labels(),
                n_masks=self.config.n_monitor_masks,
                n_iters=self.config.n_eval_iters,
                rng=self.rng.derive(STREAM_MONITOR, self.epoch),
            )

        return {'mp_objective': mp_objective, 'validation_error': validation_error}

    def _update_early_stopping(self, validation_error: Optional[float]) -> None:
        if validation_error is None or self.config.patience is None:
            return

        if validation_error < self.best_error:
            self.best_error = validation_error
            self.best_params = self.params.clone()
            self.bad_epochs = 0
            return

        self.bad_epochs += 1
        if self.bad_epochs >= self.config.patience:
            logger.info('early stopping at epoch %d (best validation error %.4f)', self.epoch, self.best_error)
            self.stopped = True

    def result(self) -> Params:
        r"""Parameters of the best validation epoch when early stopping is on, the current parameters otherwise."""
        if self.config.patience is not None and self.best_params is not None:
            return self.best_params.clone()
        return self.params

    def fit(self, epochs: Optional[int] = None, callback: Optional[EPOCH_CALLBACK] = None) -> Params:
        r"""Train until `epochs` (default: the configured number) or early stopping; `callback` sees every record.

            Returns `result()`. The trainer keeps its current parameters, so a later `fit` continues from the last
            epoch rather than from the best one.
        """
        epochs = self.config.epochs if epochs is None else epochs

        logger.info('commencing model fitting')
        for _ in tqdm(range(self.epoch, epochs), desc='epochs', disable=not self.verbose):
            if self.stopped:
                break

            record = self.train_epoch()
            if callback is not None:
                callback(self, record)

        return self.result()

    def state_dict(self) -> Dict[str, Any]:
        r"""Everything needed to continue the run: epoch, random state, velocities, schedules and early stopping."""
        velocity = {
            name: self.optimizer.state[p]['velocity'].clone()
            for name, p in self.params.named_tensors()
            if 'velocity' in self.optimizer.state[p]
        }
        return {
            'epoch': self.epoch,
            'rng_state': self.rng.state,
            'velocity': velocity,
            'lr_scheduler': self.lr_scheduler.state_dict(),
            'momentum_scheduler': self.momentum_scheduler.state_dict(),
            'best_params': None if self.best_params is None else dict(self.best_params.clone().named_tensors()),
            'early_stopping': {
                'best_error': None if math.isinf(self.best_error) else self.best_error,
                'bad_epochs': self.bad_epochs,
                'stopped': self.stopped,
            },
        }

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        self.epoch = int(state['epoch'])
        self.rng.state = state['rng_state']

        params = dict(self.params.named_tensors())
        for name, velocity in state['velocity'].items():
            self.optimizer.state[params[name]]['velocity'] = velocity.clone()

        self.lr_scheduler.load_state_dict(state['lr_scheduler'])
        self.momentum_scheduler.load_state_dict(state['momentum_scheduler'])

        early = state['early_stopping']
        self.best_error = math.inf if early['best_error'] is None else float(early['best_error'])
        self.bad_epochs = int(early['bad_epochs'])
        self.stopped = bool(early['stopped'])

        best = state.get('best_params')
        self.best_params = None
        if best is not None:
            self.best_params = Params.from_named(
                {name: best[name].clone() for name, _ in self.params.named_tensors()}, offsets=self.params.offsets
            )
