from typing import Optional, Tuple

import pytest
import torch

from pytorch_mpdbm.data import Dataset, synth_patterns
from pytorch_mpdbm.model import ModelShape, Params
from pytorch_mpdbm.numerics import Rng
from tests.utils import random_tiny_data, random_tiny_params


@pytest.fixture(scope='session')
def tiny_shape() -> ModelShape:
    return ModelShape(d=3, layer_sizes=(2, 2), k=2)


@pytest.fixture
def tiny_params(tiny_shape) -> Params:
    return random_tiny_params(tiny_shape, Rng(42))


@pytest.fixture
def centered_tiny_params(tiny_shape) -> Params:
    return random_tiny_params(tiny_shape, Rng(43), centered=True)


@pytest.fixture
def tiny_data(tiny_shape) -> Tuple[torch.Tensor, Optional[torch.Tensor]]:
    return random_tiny_data(tiny_shape, 4, Rng(7))


@pytest.fixture(scope='session')
def patterns() -> Dataset:
    return synth_patterns(n_classes=4, d=16, noise_rate=0.05, n_examples=400, seed=0)
