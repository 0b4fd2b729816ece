"""Brute-force exact computations on tiny models.

States are visited with a plain binary counter (bit j of the index is unit j), in chunks so that the log-sum-exp
reductions never hold more than `chunk_size` energies at once. Only `exact_conditional` and `exact_distribution`,
which return every state, keep all chunks.
"""

from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import torch

from pytorch_mpdbm.base.exception import EnumerationBoundError
from pytorch_mpdbm.model.dbm import FullState, Gradient, ModelShape, Params, energy_of_units, gradient_of
from pytorch_mpdbm.model.mask import Mask
from pytorch_mpdbm.numerics import DTYPE

CHUNK_SIZE: int = 1 << 16


@dataclass(frozen=True)
class EnumBound:
    r"""Largest number of units an exact computation may enumerate (the label counts as one unit).

    :param max_total_units: int. bound.
    """

    max_total_units: int = 22

    def check(self, n_units: int) -> None:
        if n_units > self.max_total_units:
            raise EnumerationBoundError(n_units, self.max_total_units)


DEFAULT_BOUND = EnumBound()


def binary_configurations(n: int, start: int = 0, stop: Optional[int] = None) -> torch.Tensor:
    r"""Rows `start..stop` of the binary counter over `n` bits, as a float64 (rows, n) tensor."""
    stop = (1 << n) if stop is None else stop
    index = torch.arange(start, stop, dtype=torch.int64).unsqueeze(-1)
    return ((index >> torch.arange(n, dtype=torch.int64)) & 1).to(DTYPE)


def _chunks(n: int, chunk_size: int) -> Iterator[Tuple[int, int]]:
    total: int = 1 << n
    for start in range(0, total, chunk_size):
        yield start, min(start + chunk_size, total)


def _split_hidden(shape: ModelShape, bits: torch.Tensor) -> List[torch.Tensor]:
    return list(torch.split(bits, list(shape.layer_sizes), dim=-1))


def _one_hot(k: int, c: int, rows: int) -> torch.Tensor:
    y = torch.zeros((rows, k), dtype=DTYPE)
    y[:, c] = 1.0
    return y


def _label_choices(shape: ModelShape, label: Optional[torch.Tensor]) -> List[Optional[int]]:
    if shape.k == 0:
        return [None]
    if label is not None:
        return [int(torch.argmax(label))]
    return list(range(shape.k))


def _label_units(shape: ModelShape, c: Optional[int], rows: int) -> torch.Tensor:
    return torch.zeros((rows, 0), dtype=DTYPE) if c is None else _one_hot(shape.k, c, rows)


def exact_log_z(params: Params, bound: EnumBound = DEFAULT_BOUND, chunk_size: int = CHUNK_SIZE) -> torch.Tensor:
    r"""Log partition function by enumerating every joint state. Differentiable w.r.t. `params`.

    :param params: Params. model parameters.
    :param bound: EnumBound. enumeration bound.
    :param chunk_size: int. number of binary configurations per reduction.
    """
    shape = params.shape
    bound.check(shape.n_units)

    n: int = shape.d + shape.n_hidden
    log_z = torch.tensor(-torch.inf, dtype=DTYPE)
    for start, stop in _chunks(n, chunk_size):
        bits = binary_configurations(n, start, stop)
        v, hidden = bits[:, : shape.d], _split_hidden(shape, bits[:, shape.d :])
        for c in _label_choices(shape, None):
            e = energy_of_units(params, [v, *hidden, _label_units(shape, c, bits.shape[0])])
            log_z = torch.logaddexp(log_z, torch.logsumexp(-e, dim=0))

    return log_z


@dataclass(frozen=True)
class Marginals:
    r"""Per-unit conditional means (observed units carry their data) and the label posterior."""

    v: torch.Tensor
    h: Tuple[torch.Tensor, ...]
    y: Optional[torch.Tensor]


@dataclass(frozen=True)
class ConditionalDistribution:
    r"""Normalized distribution over all completions of an observed assignment.

    :param states: FullState. (M, ...) every completion.
    :param log_probs: torch.Tensor. (M,) normalized log-probabilities.
    :param log_partition: torch.Tensor. log of the sum of exp(-E) over the completions.
    """

    states: FullState
    log_probs: torch.Tensor
    log_partition: torch.Tensor

    @property
    def probs(self) -> torch.Tensor:
        return self.log_probs.exp()

    def marginals(self) -> Marginals:
        p = self.probs.unsqueeze(-1)
        return Marginals(
            v=(p * self.states.v).sum(dim=0),
            h=tuple((p * h).sum(dim=0) for h in self.states.h),
            y=None if self.states.y is None else (p * self.states.y).sum(dim=0),
        )


def _completions(
    params: Params,
    data: torch.Tensor,
    mask: Mask,
    label: Optional[torch.Tensor],
    bound: EnumBound,
    chunk_size: int,
) -> Iterator[Tuple[List[torch.Tensor], torch.Tensor]]:
    r"""Yield (units, -energy) over chunks of the completions of an observed assignment, label varying slowest."""
    shape = params.shape
    free = torch.nonzero(~mask.visible, as_tuple=False).flatten()
    label_free: bool = shape.k > 0 and not bool(mask.label)
    if shape.k > 0 and not label_free and label is None:
        raise ValueError('[-] label must be given when the label is observed')

    n: int = free.numel() + shape.n_hidden
    bound.check(n + int(label_free))

    for c in _label_choices(shape, None if label_free else label):
        for start, stop in _chunks(n, chunk_size):
            bits = binary_configurations(n, start, stop)
            rows: int = bits.shape[0]

            v = data.to(DTYPE).expand(rows, shape.d).clone()
            v[:, free] = bits[:, : free.numel()]
            units = [v, *_split_hidden(shape, bits[:, free.numel() :]), _label_units(shape, c, rows)]

            yield units, -energy_of_units(params, units)


def exact_conditional(
    params: Params,
    data: torch.Tensor,
    mask: Mask,
    label: Optional[torch.Tensor] = None,
    bound: EnumBound = DEFAULT_BOUND,
    chunk_size: int = CHUNK_SIZE,
) -> ConditionalDistribution:
    r"""Exact distribution of the unobserved visibles, all hidden units and (if unobserved) the label.

        The result holds every completion. `exact_log_partition` and `exact_marginals` reduce chunk by chunk instead.

    :param params: Params. model parameters.
    :param data: torch.Tensor. (D,) visible assignment; only observed positions are read.
    :param mask: Mask. single (unbatched) mask.
    :param label: Optional[torch.Tensor]. (k,) one-hot label, required when the label is observed.
    :param bound: EnumBound. enumeration bound.
    :param chunk_size: int. number of binary configurations per chunk.
    """
    states, energies = [], []
    for units, neg_energy in _completions(params, data, mask, label, bound, chunk_size):
        states.append(units)
        energies.append(neg_energy)

    units = [torch.cat(group, dim=0) for group in zip(*states)]
    neg_energy = torch.cat(energies, dim=0)
    log_partition = torch.logsumexp(neg_energy, dim=0)

    return ConditionalDistribution(
        states=FullState.from_units(units), log_probs=neg_energy - log_partition, log_partition=log_partition
    )


def exact_log_partition(
    params: Params,
    data: torch.Tensor,
    mask: Mask,
    label: Optional[torch.Tensor] = None,
    bound: EnumBound = DEFAULT_BOUND,
    chunk_size: int = CHUNK_SIZE,
) -> torch.Tensor:
    r"""log of the sum of exp(-E) over the completions of an observed assignment. Differentiable w.r.t. `params`."""
    log_partition = torch.tensor(-torch.inf, dtype=DTYPE)
    for _, neg_energy in _completions(params, data, mask, label, bound, chunk_size):
        log_partition = torch.logaddexp(log_partition, torch.logsumexp(neg_energy, dim=0))
    return log_partition


def exact_distribution(params: Params, bound: EnumBound = DEFAULT_BOUND) -> ConditionalDistribution:
    r"""Boltzmann distribution over every joint state (label varies slowest)."""
    shape = params.shape
    return exact_conditional(
        params, torch.zeros(shape.d, dtype=DTYPE), Mask.none_observed(shape), label=None, bound=bound
    )


def exact_marginals(
    params: Params,
    data: torch.Tensor,
    mask: Mask,
    label: Optional[torch.Tensor] = None,
    bound: EnumBound = DEFAULT_BOUND,
    chunk_size: int = CHUNK_SIZE,
) -> Marginals:
    r"""Exact conditional means of every unit given the observed variables.

        Probability-weighted sums are accumulated chunk by chunk and rescaled whenever the running log normalizer
        grows.
    """
    log_partition = torch.tensor(-torch.inf, dtype=DTYPE)
    sums: Optional[List[torch.Tensor]] = None
    for units, neg_energy in _completions(params, data, mask, label, bound, chunk_size):
        updated = torch.logaddexp(log_partition, torch.logsumexp(neg_energy, dim=0))
        weights = (neg_energy - updated).exp().unsqueeze(-1)
        chunk_sums = [(weights * u).sum(dim=0) for u in units]

        if sums is None:
            sums = chunk_sums
        else:
            scale = (log_partition - updated).exp()
            sums = [s * scale + c for s, c in zip(sums, chunk_sums)]
        log_partition = updated

    return Marginals(v=sums[0], h=tuple(sums[1:-1]), y=sums[-1] if params.shape.k > 0 else None)


def exact_log_likelihood(
    params: Params,
    v: torch.Tensor,
    labels: Optional[torch.Tensor] = None,
    bound: EnumBound = DEFAULT_BOUND,
    chunk_size: int = CHUNK_SIZE,
) -> torch.Tensor:
    r"""log P(v, y) per example, marginalizing the hidden units (and the label when `labels` is None).

    :param params: Params. model parameters.
    :param v: torch.Tensor. (N, D) visible data.
    :param labels: Optional[torch.Tensor]. (N, k) one-hot labels.
    :param bound: EnumBound. enumeration bound.
    :param chunk_size: int. number of binary configurations per chunk.
    """
    shape = params.shape
    log_z = exact_log_z(params, bound=bound, chunk_size=chunk_size)
    mask = Mask(visible=torch.ones(shape.d, dtype=torch.bool), label=torch.tensor(labels is not None))

    log_likelihoods = [
        exact_log_partition(
            params, v[i], mask, label=None if labels is None else labels[i], bound=bound, chunk_size=chunk_size
        )
        - log_z
        for i in range(v.shape[0])
    ]

    return torch.stack(log_likelihoods)


def exact_ll_grad(
    params: Params,
    v: torch.Tensor,
    labels: Optional[torch.Tensor] = None,
    weights: Optional[torch.Tensor] = None,
    bound: EnumBound = DEFAULT_BOUND,
) -> Gradient:
    r"""Exact gradient of sum_n weight_n log P(v_n, y_n) w.r.t. every trainable tensor (offsets held fixed).

    :param params: Params. model parameters.
    :param v: torch.Tensor. (N, D) visible data.
    :param labels: Optional[torch.Tensor]. (N, k) one-hot labels.
    :param weights: Optional[torch.Tensor]. (N,) example weights, ones by default.
    :param bound: EnumBound. enumeration bound.
    """
    leaves = params.leaves()
    log_likelihood = exact_log_likelihood(leaves, v, labels=labels, bound=bound)
    if weights is not None:
        log_likelihood = log_likelihood * weights.to(DTYPE)

    return gradient_of(log_likelihood.sum(), leaves)


def state_index(shape: ModelShape, state: FullState) -> torch.Tensor:
    r"""Position of each state in the order used by `exact_distribution`.

        Bit j of the index is the j-th of the concatenated visible and hidden units; the label class varies slowest.
    """
    bits = torch.cat([state.v, *state.h], dim=-1).to(torch.int64)
    n: int = bits.shape[-1]
    index = (bits << torch.arange(n, dtype=torch.int64)).sum(dim=-1)
    if shape.k > 0 and state.y is not None:
        index = index + torch.argmax(state.y, dim=-1) * (1 << n)
    return index
