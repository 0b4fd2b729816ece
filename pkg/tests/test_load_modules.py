import pytest

from pytorch_mpdbm.loss import get_supported_loss_functions
from pytorch_mpdbm.lr_scheduler import get_supported_schedulers, load_scheduler
from tests.constants import INVALID_SCHEDULER_NAMES, VALID_LOSS_FUNCTION_NAMES, VALID_SCHEDULER_NAMES


@pytest.mark.parametrize('valid_scheduler_names', VALID_SCHEDULER_NAMES)
def test_load_scheduler_valid(valid_scheduler_names):
    load_scheduler(valid_scheduler_names)


@pytest.mark.parametrize('invalid_scheduler_names', INVALID_SCHEDULER_NAMES)
def test_load_scheduler_invalid(invalid_scheduler_names):
    with pytest.raises(NotImplementedError):
        load_scheduler(invalid_scheduler_names)


def test_get_supported_schedulers():
    assert get_supported_schedulers() == sorted(VALID_SCHEDULER_NAMES)
    assert len(get_supported_schedulers('c*')) == 2
    assert len(get_supported_schedulers(['lin*', 'cos*'])) == 2


def test_get_supported_loss_functions():
    assert get_supported_loss_functions() == sorted(VALID_LOSS_FUNCTION_NAMES)
    assert len(get_supported_loss_functions('*penalty')) == 1
    assert len(get_supported_loss_functions(['multi*', 'sparsity*'])) == 2
