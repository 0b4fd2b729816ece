"""Seeded random streams and the dense kernels every other module builds on.

All tensors are float64. Random streams come from numpy's PCG64 bit generator, a documented
permuted-congruential algorithm whose integer core is bit-exact across platforms.
"""

from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from pytorch_mpdbm.base.exception import DimensionMismatchError, EmptyInputError, InvalidProbabilityError

DTYPE: torch.dtype = torch.float64

SIZE = Union[int, Tuple[int, ...]]


class Rng:
    r"""Seedable random stream.

        A single instance must not be shared between threads. Independent child streams are derived with `derive`,
        which hashes the parent seed together with a key through `numpy.random.SeedSequence`.

    :param seed: int. seed of the stream.
    :param spawn_key: Sequence[int]. key that distinguishes derived streams of the same seed.
    """

    def __init__(self, seed: int = 0, spawn_key: Sequence[int] = ()):
        self.seed = int(seed)
        self.spawn_key: Tuple[int, ...] = tuple(int(k) for k in spawn_key)
        self.generator = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.spawn_key))
        )

    def __repr__(self) -> str:
        return f'Rng(seed={self.seed}, spawn_key={self.spawn_key})'

    def derive(self, *keys: int) -> 'Rng':
        r"""Return an independent stream keyed by `keys` (does not advance this stream)."""
        return Rng(self.seed, spawn_key=(*self.spawn_key, *keys))

    @property
    def state(self) -> Dict[str, Any]:
        r"""JSON-serializable bit generator state."""
        return self.generator.bit_generator.state

    @state.setter
    def state(self, state: Dict[str, Any]) -> None:
        self.generator.bit_generator.state = state

    def uniform(self, size: SIZE = ()) -> torch.Tensor:
        r"""Draw reals in [0, 1). One 64-bit draw per element."""
        return torch.from_numpy(np.asarray(self.generator.random(size), dtype=np.float64))

    def bernoulli(self, p: Union[float, torch.Tensor], size: Optional[SIZE] = None) -> torch.Tensor:
        r"""Draw bits that are 1 with probability `p`. One uniform draw per bit.

        :param p: Union[float, torch.Tensor]. probability (scalar or elementwise).
        :param size: Optional[SIZE]. output shape when `p` is a scalar.
        """
        if isinstance(p, torch.Tensor):
            if p.numel() > 0 and (p.min() < 0.0 or p.max() > 1.0):
                raise InvalidProbabilityError(float(p.min() if p.min() < 0.0 else p.max()))
            u = self.uniform(tuple(p.shape))
        else:
            if not 0.0 <= p <= 1.0:
                raise InvalidProbabilityError(p)
            u = self.uniform(() if size is None else size)
        return (u < p).to(DTYPE)

    def categorical(self, probs: torch.Tensor) -> torch.Tensor:
        r"""Draw one class per row of `probs` by inverting the cumulative distribution.

        :param probs: torch.Tensor. (..., k) probability rows.
        """
        u = self.uniform(tuple(probs.shape[:-1])).unsqueeze(-1)
        index = (torch.cumsum(probs, dim=-1) <= u).sum(dim=-1)
        return index.clamp_(max=probs.shape[-1] - 1)

    def integers(self, high: int, size: SIZE = ()) -> torch.Tensor:
        return torch.from_numpy(np.asarray(self.generator.integers(0, high, size=size), dtype=np.int64))

    def permutation(self, n: int) -> torch.Tensor:
        return torch.from_numpy(np.asarray(self.generator.permutation(n), dtype=np.int64))


def rng_uniform(rng: Rng) -> float:
    r"""Draw one real in [0, 1)."""
    return float(rng.uniform())


def rng_bernoulli(rng: Rng, p: float) -> int:
    r"""Draw one bit that is 1 with probability `p`."""
    return int(rng.bernoulli(p))


def sigmoid(x: Union[float, torch.Tensor]) -> Union[float, torch.Tensor]:
    r"""Logistic function, saturating without overflow."""
    if isinstance(x, torch.Tensor):
        return torch.sigmoid(x)
    return float(torch.sigmoid(torch.tensor(x, dtype=DTYPE)))


def logit(p: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    r"""Inverse of the logistic function, with `p` clipped to [eps, 1 - eps]."""
    return torch.logit(p, eps=eps)


def softmax(x: torch.Tensor, dim: int = -1) -> torch.Tensor:
    r"""Max-subtracted softmax along `dim`."""
    if x.numel() == 0 or x.shape[dim] == 0:
        raise EmptyInputError('softmax')
    return torch.softmax(x - x.amax(dim=dim, keepdim=True).detach(), dim=dim)


def _ordered_product(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    r"""Sum of a[..., k] * b[k] over ascending k.

        Every output entry is accumulated left to right from 0, one rounded multiply and one rounded add per term, so
        it equals a naive triple loop bit for bit.
    """
    out = torch.zeros((*a.shape[:-1], b.shape[-1]), dtype=torch.promote_types(a.dtype, b.dtype))
    for k in range(a.shape[-1]):
        out = out + a[..., k : k + 1] * b[k]
    return out


def matmul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    r"""Matrix product with an explicit shape contract. Leading batch dims of `a` are allowed."""
    if b.dim() != 2 or a.shape[-1] != b.shape[0]:
        raise DimensionMismatchError('matmul', a.shape, b.shape)
    return _ordered_product(a, b)


def matvec(a: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    r"""Return `a x` for a matrix `a` and a vector `x`."""
    if a.dim() != 2 or x.dim() != 1 or a.shape[1] != x.shape[0]:
        raise DimensionMismatchError('matvec', a.shape, x.shape)
    return _ordered_product(a, x.unsqueeze(-1)).squeeze(-1)


def transpose_apply(a: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    r"""Return `a^T x`. `x` may carry leading batch dims, i.e. rows of `x @ a`."""
    if a.dim() != 2 or x.shape[-1] != a.shape[0]:
        raise DimensionMismatchError('transpose_apply', a.shape, x.shape)
    return _ordered_product(x, a)


def outer(x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    r"""Outer product. With a leading batch dim, returns the batch-mean of the outer products."""
    if x.dim() != y.dim() or x.dim() not in (1, 2) or (x.dim() == 2 and x.shape[0] != y.shape[0]):
        raise DimensionMismatchError('outer', x.shape, y.shape)
    if x.dim() == 1:
        return torch.outer(x, y)
    if x.shape[0] == 0:
        raise EmptyInputError('outer')
    return _ordered_product(x.T, y) / x.shape[0]
