import fnmatch
from enum import Enum
from typing import Dict, List, Optional, Sequence, Set, Type, Union

from pytorch_mpdbm.base.scheduler import BaseLinearWarmupScheduler
from pytorch_mpdbm.lr_scheduler.linear_warmup import ConstantScheduler, CosineScheduler, LinearScheduler


class SchedulerType(Enum):
    CONSTANT = 'constant'
    LINEAR = 'linear'
    COSINE = 'cosine'

    def __str__(self) -> str:
        return self.value


SCHEDULER_LIST: Dict = {
    SchedulerType.CONSTANT: ConstantScheduler,
    SchedulerType.LINEAR: LinearScheduler,
    SchedulerType.COSINE: CosineScheduler,
}
SCHEDULERS: Dict[str, Type[BaseLinearWarmupScheduler]] = {
    str(scheduler_name).lower(): scheduler for scheduler_name, scheduler in SCHEDULER_LIST.items()
}


def load_scheduler(scheduler: str) -> Type[BaseLinearWarmupScheduler]:
    scheduler: str = scheduler.lower()

    if scheduler not in SCHEDULERS:
        raise NotImplementedError(f'[-] not implemented scheduler : {scheduler}')

    return SCHEDULERS[scheduler]


def get_supported_schedulers(filters: Optional[Union[str, List[str]]] = None) -> List[str]:
    r"""Return list of available scheduler names, sorted alphabetically.

    :param filters: Optional[Union[str, List[str]]]. wildcard filter string that works with fmatch. if None, it will
        return the whole list.
    """
    if filters is None:
        return sorted(SCHEDULERS.keys())

    include_filters: Sequence[str] = filters if isinstance(filters, (tuple, list)) else [filters]

    filtered_list: Set[str] = set()
    for include_filter in include_filters:
        filtered_list.update(fnmatch.filter(SCHEDULERS.keys(), include_filter))

    return sorted(filtered_list)
