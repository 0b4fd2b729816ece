import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple, Union

import torch

from pytorch_mpdbm.base.type import BINARIZE_MODE
from pytorch_mpdbm.base.validation import Validator
from pytorch_mpdbm.model.mask import Mask
from pytorch_mpdbm.numerics import DTYPE, Rng

INDEX = Union[torch.Tensor, slice, List[int]]


@dataclass(frozen=True)
class Dataset:
    r"""Examples as rows of `v` with optional integer class labels. Never modified after construction.

    :param v: torch.Tensor. (N, D) pixel values in [0, 1], binary once binarized.
    :param labels: Optional[torch.Tensor]. (N,) class indices in [0, n_classes).
    :param n_classes: int. number of classes, 0 for unlabeled data.
    :param image_shape: Optional[Tuple[int, ...]]. shape of one image, for dumps.
    :param prototypes: Optional[torch.Tensor]. (n_classes, D) class templates of synthetic data.
    """

    v: torch.Tensor
    labels: Optional[torch.Tensor]
    n_classes: int
    image_shape: Optional[Tuple[int, ...]] = None
    prototypes: Optional[torch.Tensor] = None

    def __post_init__(self):
        object.__setattr__(self, 'v', self.v.to(DTYPE))
        if self.v.dim() != 2:
            raise ValueError(f'[-] v must be a (N, D) matrix, got shape {tuple(self.v.shape)}')
        if self.v.numel() > 0 and (self.v.min() < 0.0 or self.v.max() > 1.0):
            raise ValueError('[-] pixel values must be in the range [0, 1]')

        if self.labels is not None:
            object.__setattr__(self, 'labels', self.labels.to(torch.int64))
            if self.labels.shape != (self.v.shape[0],):
                raise ValueError('[-] need exactly one label per example')
            if self.labels.numel() > 0 and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
                raise ValueError(f'[-] labels must be in the range [0, {self.n_classes})')

    def __len__(self) -> int:
        return self.v.shape[0]

    @property
    def d(self) -> int:
        return self.v.shape[1]

    @property
    def is_binary(self) -> bool:
        return bool(((self.v == 0.0) | (self.v == 1.0)).all())

    def one_hot_labels(self) -> Optional[torch.Tensor]:
        if self.labels is None or self.n_classes == 0:
            return None
        return torch.nn.functional.one_hot(self.labels, num_classes=self.n_classes).to(DTYPE)

    def subset(self, index: INDEX) -> 'Dataset':
        return Dataset(
            v=self.v[index],
            labels=None if self.labels is None else self.labels[index],
            n_classes=self.n_classes,
            image_shape=self.image_shape,
            prototypes=self.prototypes,
        )

    def split(self, n_validation: int) -> Tuple['Dataset', 'Dataset']:
        r"""Hold out the last `n_validation` examples."""
        Validator.validate_range(n_validation, 'n_validation', 0, len(self), range_type='[]')
        cut: int = len(self) - n_validation
        return self.subset(slice(0, cut)), self.subset(slice(cut, len(self)))

    def pixel_means(self) -> torch.Tensor:
        return self.v.mean(dim=0)

    def batches(
        self, batch_size: int, rng: Optional[Rng] = None
    ) -> Iterator[Tuple[torch.Tensor, Optional[torch.Tensor]]]:
        r"""Yield (v, one-hot labels) minibatches, shuffled by `rng` when given. The last batch may be smaller."""
        Validator.validate_positive(batch_size, 'batch_size')

        order = rng.permutation(len(self)) if rng is not None else torch.arange(len(self))
        labels = self.one_hot_labels()
        for start in range(0, len(self), batch_size):
            index = order[start:start + batch_size]
            yield self.v[index], None if labels is None else labels[index]


def binarize(dataset: Dataset, mode: BINARIZE_MODE = 'threshold', seed: int = 0, threshold: float = 0.5) -> Dataset:
    r"""Binarize pixels, either deterministically (v >= threshold) or by sampling Bernoulli(v) from `seed`."""
    Validator.validate_options(mode, 'mode', ['threshold', 'stochastic'])

    if mode == 'threshold':
        v = (dataset.v >= threshold).to(DTYPE)
    else:
        v = Rng(seed).bernoulli(dataset.v)

    return Dataset(
        v=v,
        labels=dataset.labels,
        n_classes=dataset.n_classes,
        image_shape=dataset.image_shape,
        prototypes=dataset.prototypes,
    )


def synth_patterns(n_classes: int, d: int, noise_rate: float, n_examples: int, seed: int = 0) -> Dataset:
    r"""Noisy copies of random class templates.

        Templates are distinct uniformly random binary vectors. Example i belongs to class i mod n_classes and is its
        template with every bit flipped independently with probability `noise_rate`.

    :param n_classes: int. number of classes, at most 2^d.
    :param d: int. number of pixels.
    :param noise_rate: float. bit flip probability.
    :param n_examples: int. number of examples.
    :param seed: int. seed.
    """
    Validator.validate_positive(n_classes, 'n_classes')
    Validator.validate_positive(d, 'd')
    Validator.validate_range(noise_rate, 'noise_rate', 0.0, 1.0, range_type='[]')
    Validator.validate_non_negative(n_examples, 'n_examples')
    if d < 63 and n_classes > 2 ** d:
        raise ValueError(f'[-] n_classes must be at most 2^d = {2 ** d}')

    rng = Rng(seed)

    templates: List[torch.Tensor] = []
    seen = set()
    while len(templates) < n_classes:
        template = rng.bernoulli(0.5, (d,))
        key = tuple(template.tolist())
        if key not in seen:
            seen.add(key)
            templates.append(template)
    prototypes = torch.stack(templates)

    labels = torch.arange(n_examples) % n_classes
    flips = rng.bernoulli(noise_rate, (n_examples, d))
    v = (prototypes[labels] - flips).abs()

    return Dataset(v=v, labels=labels, n_classes=n_classes, prototypes=prototypes)


@dataclass(frozen=True)
class QuerySet:
    r"""Evaluation queries: examples with the mask saying which of their variables are inputs.

    :param v: torch.Tensor. (N, D) examples.
    :param labels: Optional[torch.Tensor]. (N, k) one-hot labels.
    :param mask: Mask. (N, D) masks.
    """

    v: torch.Tensor
    labels: Optional[torch.Tensor]
    mask: Mask

    def __len__(self) -> int:
        return self.v.shape[0]

    def __iter__(self) -> Iterator[Tuple[torch.Tensor, Mask]]:
        for i in range(len(self)):
            yield self.v[i], self.mask[i]


def make_missing_input_queries(dataset: Dataset, fraction_missing: float, seed: int = 0) -> QuerySet:
    r"""Hide a uniformly random subset of floor(fraction_missing * D) pixels of every example; the label is always
    the target."""
    Validator.validate_range(fraction_missing, 'fraction_missing', 0.0, 1.0, range_type='[]')

    rng = Rng(seed)
    n_missing: int = math.floor(fraction_missing * dataset.d)

    visible = torch.ones((len(dataset), dataset.d), dtype=torch.bool)
    for i in range(len(dataset)):
        visible[i, rng.permutation(dataset.d)[:n_missing]] = False

    mask = Mask(visible=visible, label=torch.zeros(len(dataset), dtype=torch.bool))
    return QuerySet(v=dataset.v, labels=dataset.one_hot_labels(), mask=mask)


def make_general_queries(dataset: Dataset, size: int, seed: int = 0) -> QuerySet:
    r"""Mark a uniformly random subset of `size` variables (pixels, plus the label when there is one) of every
    example as targets; the rest are inputs."""
    n_variables: int = dataset.d + (1 if dataset.n_classes > 0 else 0)
    Validator.validate_range(size, 'size', 1, n_variables, range_type='[)')

    rng = Rng(seed)

    observed = torch.ones((len(dataset), n_variables), dtype=torch.bool)
    for i in range(len(dataset)):
        observed[i, rng.permutation(n_variables)[:size]] = False

    label = observed[:, dataset.d] if dataset.n_classes > 0 else torch.zeros(len(dataset), dtype=torch.bool)
    mask = Mask(visible=observed[:, : dataset.d], label=label)
    return QuerySet(v=dataset.v, labels=dataset.one_hot_labels(), mask=mask)
