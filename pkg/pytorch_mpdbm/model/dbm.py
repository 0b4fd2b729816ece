from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import torch

from pytorch_mpdbm.base.exception import DimensionMismatchError
from pytorch_mpdbm.base.type import NAMED_TENSORS, TENSORS
from pytorch_mpdbm.base.validation import Validator
from pytorch_mpdbm.numerics import DTYPE, Rng, logit, matmul, matvec, sigmoid, softmax, transpose_apply


@dataclass(frozen=True)
class ModelShape:
    r"""Layer sizes of a binary DBM with an optional one-of-k label unit attached to the top hidden layer.

        Units are addressed by group: group 0 is the visible layer, groups 1..L the hidden layers and group L + 1 the
        label. Groups of equal parity never interact, so each parity forms a block of the two-block Gibbs / mean field
        schedule. The label therefore lives in the block opposite its only neighbour h^(L).

    :param d: int. number of visible units.
    :param layer_sizes: Tuple[int, ...]. hidden layer sizes N_1..N_L.
    :param k: int. number of label classes. 0 means no label unit.
    """

    d: int
    layer_sizes: Tuple[int, ...]
    k: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'layer_sizes', tuple(int(n) for n in self.layer_sizes))

        Validator.validate_positive(self.d, 'd')
        if len(self.layer_sizes) == 0:
            raise ValueError('[-] layer_sizes must not be empty')
        for i, n in enumerate(self.layer_sizes):
            Validator.validate_positive(n, f'layer_sizes[{i}]')
        Validator.validate_non_negative(self.k, 'k')

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes)

    @property
    def label_group(self) -> int:
        return self.n_layers + 1

    @property
    def group_sizes(self) -> Tuple[int, ...]:
        return self.d, *self.layer_sizes, self.k

    @property
    def n_hidden(self) -> int:
        return sum(self.layer_sizes)

    @property
    def n_units(self) -> int:
        r"""Number of units, counting the label as a single unit."""
        return self.d + self.n_hidden + (1 if self.k > 0 else 0)

    def block(self, parity: int) -> Tuple[int, ...]:
        r"""Groups updated together in one half of a sweep. Parity 1 (odd) runs first."""
        groups = [g for g in range(self.n_layers + 1) if g % 2 == parity]
        if self.k > 0 and self.label_group % 2 == parity:
            groups.append(self.label_group)
        return tuple(groups)

    def to_dict(self) -> Dict:
        return {'d': self.d, 'layer_sizes': list(self.layer_sizes), 'k': self.k}

    @classmethod
    def from_dict(cls, d: Dict) -> 'ModelShape':
        return cls(d=d['d'], layer_sizes=tuple(d['layer_sizes']), k=d.get('k', 0))


@dataclass(frozen=True)
class Offsets:
    r"""Centering offsets, one per unit, each in [0, 1]."""

    visible: torch.Tensor
    hidden: TENSORS
    label: torch.Tensor

    def __post_init__(self):
        object.__setattr__(self, 'hidden', tuple(self.hidden))
        for name, x in (('visible', self.visible), *((f'hidden.{i}', h) for i, h in enumerate(self.hidden))):
            if x.numel() > 0 and (x.min() < 0.0 or x.max() > 1.0):
                raise ValueError(f'[-] offsets.{name} must be in the range [0, 1]')
        if self.label.numel() > 0 and (self.label.min() < 0.0 or self.label.max() > 1.0):
            raise ValueError('[-] offsets.label must be in the range [0, 1]')

    def groups(self) -> List[torch.Tensor]:
        return [self.visible, *self.hidden, self.label]

    def named_tensors(self) -> NAMED_TENSORS:
        return [
            ('offsets.visible', self.visible),
            *((f'offsets.hidden.{i}', h) for i, h in enumerate(self.hidden)),
            ('offsets.label', self.label),
        ]

    @classmethod
    def constant(
        cls,
        shape: ModelShape,
        visible: Optional[torch.Tensor] = None,
        hidden: float = 0.5,
        label: float = 0.5,
    ) -> 'Offsets':
        r"""Build offsets: `visible` (defaults to 0.5 everywhere), and constants for hidden and label units."""
        return cls(
            visible=torch.full((shape.d,), 0.5, dtype=DTYPE) if visible is None else visible.to(DTYPE).clone(),
            hidden=tuple(torch.full((n,), hidden, dtype=DTYPE) for n in shape.layer_sizes),
            label=torch.full((shape.k,), label, dtype=DTYPE),
        )

    @classmethod
    def zeros(cls, shape: ModelShape) -> 'Offsets':
        return cls(
            visible=torch.zeros(shape.d, dtype=DTYPE),
            hidden=tuple(torch.zeros(n, dtype=DTYPE) for n in shape.layer_sizes),
            label=torch.zeros(shape.k, dtype=DTYPE),
        )

    @classmethod
    def from_named(cls, named: Dict[str, torch.Tensor]) -> 'Offsets':
        n_hidden: int = sum(1 for name in named if name.startswith('offsets.hidden.'))
        return cls(
            visible=named['offsets.visible'],
            hidden=tuple(named[f'offsets.hidden.{i}'] for i in range(n_hidden)),
            label=named['offsets.label'],
        )


@dataclass(frozen=True)
class Params:
    r"""Parameters of a DBM.

        w[0] couples v and h^(1) (D x N_1), w[i] couples h^(i) and h^(i+1), `label_weight` couples h^(L) and y
        (N_L x k). When `offsets` is set, every unit value u enters the energy as (u - offset).

    :param weights: TENSORS. inter-layer matrices.
    :param label_weight: torch.Tensor. top-layer to label matrix.
    :param visible_bias: torch.Tensor. visible bias.
    :param hidden_biases: TENSORS. per-layer hidden biases.
    :param label_bias: torch.Tensor. label bias.
    :param offsets: Optional[Offsets]. centering offsets.
    """

    weights: TENSORS
    label_weight: torch.Tensor
    visible_bias: torch.Tensor
    hidden_biases: TENSORS
    label_bias: torch.Tensor
    offsets: Optional[Offsets] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, 'weights', tuple(self.weights))
        object.__setattr__(self, 'hidden_biases', tuple(self.hidden_biases))

        if len(self.weights) == 0 or len(self.weights) != len(self.hidden_biases):
            raise ValueError('[-] weights and hidden_biases must have the same positive length')

        sizes = [self.visible_bias.shape[0], *(b.shape[0] for b in self.hidden_biases)]
        for i, w in enumerate(self.weights):
            if tuple(w.shape) != (sizes[i], sizes[i + 1]):
                raise DimensionMismatchError(f'weights.{i}', w.shape, (sizes[i], sizes[i + 1]))
        if tuple(self.label_weight.shape) != (sizes[-1], self.label_bias.shape[0]):
            expected = (sizes[-1], self.label_bias.shape[0])
            raise DimensionMismatchError('label_weight', self.label_weight.shape, expected)

        if self.offsets is not None:
            offset_sizes = [o.shape[0] for o in self.offsets.groups()]
            if offset_sizes != [*sizes, self.label_bias.shape[0]]:
                raise DimensionMismatchError('offsets', offset_sizes, [*sizes, self.label_bias.shape[0]])

    @property
    def shape(self) -> ModelShape:
        return ModelShape(
            d=self.visible_bias.shape[0],
            layer_sizes=tuple(b.shape[0] for b in self.hidden_biases),
            k=self.label_bias.shape[0],
        )

    @property
    def is_centered(self) -> bool:
        return self.offsets is not None

    def biases(self) -> List[torch.Tensor]:
        r"""Biases ordered by unit group."""
        return [self.visible_bias, *self.hidden_biases, self.label_bias]

    def group_offsets(self) -> List[torch.Tensor]:
        r"""Offsets ordered by unit group; zeros for an uncentered model."""
        if self.offsets is not None:
            return self.offsets.groups()
        return [torch.zeros_like(b) for b in self.biases()]

    def edges(self) -> List[Tuple[int, int, torch.Tensor]]:
        r"""(row group, column group, matrix) for every coupling matrix."""
        edges = [(i, i + 1, w) for i, w in enumerate(self.weights)]
        if self.label_bias.shape[0] > 0:
            edges.append((len(self.weights), len(self.weights) + 1, self.label_weight))
        return edges

    def named_tensors(self) -> NAMED_TENSORS:
        return [
            *((f'weights.{i}', w) for i, w in enumerate(self.weights)),
            ('label_weight', self.label_weight),
            ('visible_bias', self.visible_bias),
            *((f'hidden_biases.{i}', b) for i, b in enumerate(self.hidden_biases)),
            ('label_bias', self.label_bias),
        ]

    def tensors(self) -> List[torch.Tensor]:
        return [t for _, t in self.named_tensors()]

    @classmethod
    def from_named(cls, named: Dict[str, torch.Tensor], offsets: Optional[Offsets] = None):
        n_layers: int = sum(1 for name in named if name.startswith('weights.'))
        return cls(
            weights=tuple(named[f'weights.{i}'] for i in range(n_layers)),
            label_weight=named['label_weight'],
            visible_bias=named['visible_bias'],
            hidden_biases=tuple(named[f'hidden_biases.{i}'] for i in range(n_layers)),
            label_bias=named['label_bias'],
            offsets=offsets,
        )

    def map(self, fn: Callable[[torch.Tensor], torch.Tensor]):
        r"""Apply `fn` to every trainable tensor; offsets are carried over untouched."""
        return type(self).from_named({name: fn(t) for name, t in self.named_tensors()}, offsets=self.offsets)

    def zip_map(self, other: 'Params', fn: Callable[[torch.Tensor, torch.Tensor], torch.Tensor]):
        others = dict(other.named_tensors())
        return type(self).from_named(
            {name: fn(t, others[name]) for name, t in self.named_tensors()}, offsets=self.offsets
        )

    def clone(self):
        return self.map(lambda t: t.detach().clone())

    def detach(self):
        return self.map(lambda t: t.detach())

    def leaves(self):
        r"""Return a copy whose tensors are fresh autograd leaves."""
        return self.map(lambda t: t.detach().clone().requires_grad_(True))

    def with_offsets(self, offsets: Optional[Offsets]) -> 'Params':
        return replace(self, offsets=offsets)


@dataclass(frozen=True)
class Gradient(Params):
    r"""Derivatives with the layout of `Params`, one entry per trainable tensor."""

    @classmethod
    def zeros_like(cls, params: Params) -> 'Gradient':
        return cls.from_named({name: torch.zeros_like(t) for name, t in params.named_tensors()})

    def is_finite(self) -> bool:
        return all(bool(torch.isfinite(t).all()) for t in self.tensors())


@dataclass(frozen=True)
class FullState:
    r"""Joint configuration of all units. Leading batch dims are allowed.

    :param v: torch.Tensor. (..., D) binary visible units.
    :param h: TENSORS. (..., N_i) binary hidden units per layer.
    :param y: Optional[torch.Tensor]. (..., k) one-hot label, absent when k = 0.
    """

    v: torch.Tensor
    h: TENSORS
    y: Optional[torch.Tensor] = None

    def __post_init__(self):
        object.__setattr__(self, 'h', tuple(self.h))

    def units(self) -> List[torch.Tensor]:
        r"""Unit values ordered by group; an empty label group when k = 0."""
        y = self.y if self.y is not None else self.v.new_zeros((*self.v.shape[:-1], 0))
        return [self.v, *self.h, y]

    @classmethod
    def from_units(cls, units: Sequence[torch.Tensor]) -> 'FullState':
        y = units[-1] if units[-1].shape[-1] > 0 else None
        return cls(v=units[0], h=tuple(units[1:-1]), y=y)

    def is_valid(self) -> bool:
        binary = all(bool(((u == 0.0) | (u == 1.0)).all()) for u in self.units())
        one_hot = self.y is None or bool((self.y.sum(dim=-1) == 1.0).all())
        return binary and one_hot


def check_state(params: Params, state: FullState) -> None:
    expected = params.shape.group_sizes
    actual = tuple(u.shape[-1] for u in state.units())
    if len(actual) != len(expected) or actual != expected:
        raise DimensionMismatchError('state', actual, expected)


def energy_of_units(params: Params, units: Sequence[torch.Tensor]) -> torch.Tensor:
    r"""Energy of unit values ordered by group. Multilinear, so it also gives E at factorial means."""
    xs = [u - beta for u, beta in zip(units, params.group_offsets())]

    e = torch.zeros(xs[0].shape[:-1], dtype=xs[0].dtype)
    for a, b, w in params.edges():
        e = e - (transpose_apply(w, xs[a]) * xs[b]).sum(dim=-1)
    for x, bias in zip(xs, params.biases()):
        e = e - (x * bias).sum(dim=-1)

    return e


def energy(params: Params, state: FullState) -> torch.Tensor:
    r"""Energy E(v, h, y) of one state or of a batch of states.

    :param params: Params. model parameters.
    :param state: FullState. states with matching shape.
    """
    check_state(params, state)
    return energy_of_units(params, state.units())


def pre_activation(params: Params, units: Sequence[torch.Tensor], group: int) -> torch.Tensor:
    r"""Total input of every unit of `group` given the values of its neighbouring groups.

        For a centered model the neighbours enter as (u - offset); the result is the natural parameter of the exact
        conditional of the underlying binary (or one-hot) variable.
    """
    n_layers: int = len(params.weights)
    offsets = params.group_offsets()

    def centered(g: int) -> torch.Tensor:
        return units[g] - offsets[g]

    if group == 0:
        return matmul(centered(1), params.weights[0].T) + params.visible_bias

    if group == n_layers + 1:
        return transpose_apply(params.label_weight, centered(n_layers)) + params.label_bias

    total = transpose_apply(params.weights[group - 1], centered(group - 1)) + params.hidden_biases[group - 1]
    if group < n_layers:
        total = total + matmul(centered(group + 1), params.weights[group].T)
    elif params.label_bias.shape[0] > 0:
        total = total + matmul(centered(n_layers + 1), params.label_weight.T)

    return total


def activate(params: Params, pre: torch.Tensor, group: int) -> torch.Tensor:
    r"""Map a pre-activation to conditional means: softmax for the label group, sigmoid otherwise."""
    if group == len(params.weights) + 1:
        return softmax(pre) if pre.shape[-1] > 0 else pre
    return sigmoid(pre)


def conditional_means(params: Params, units: Sequence[torch.Tensor], group: int) -> torch.Tensor:
    return activate(params, pre_activation(params, units, group), group)


def centering_constant(params: Params) -> torch.Tensor:
    r"""E_centered(s) - E_uncentered(s), which does not depend on the state s."""
    if params.offsets is None:
        return torch.zeros((), dtype=params.visible_bias.dtype)

    offsets = params.group_offsets()
    constant = torch.zeros((), dtype=params.visible_bias.dtype)
    for a, b, w in params.edges():
        constant = constant - matvec(offsets[a].unsqueeze(0), matvec(w, offsets[b])).squeeze(0)
    for bias, beta in zip(params.biases(), offsets):
        constant = constant + matvec(bias.unsqueeze(0), beta).squeeze(0)

    return constant


def to_uncentered(params: Params) -> Params:
    r"""Fold centering offsets into the biases. Defines the same Boltzmann distribution without offsets."""
    if params.offsets is None:
        return params

    offsets = params.group_offsets()
    biases = [b.clone() for b in params.biases()]
    for a, b, w in params.edges():
        biases[a] = biases[a] - matmul(w, offsets[b].unsqueeze(-1)).squeeze(-1)
        biases[b] = biases[b] - transpose_apply(w, offsets[a])

    return Params(
        weights=tuple(w.clone() for w in params.weights),
        label_weight=params.label_weight.clone(),
        visible_bias=biases[0],
        hidden_biases=tuple(biases[1:-1]),
        label_bias=biases[-1],
        offsets=None,
    )


def to_centered(params: Params, offsets: Offsets) -> Params:
    r"""Inverse of `to_uncentered`: re-express an uncentered model around `offsets`."""
    base = params if params.offsets is None else to_uncentered(params)
    centered = base.with_offsets(offsets)

    betas = offsets.groups()
    biases = [b.clone() for b in base.biases()]
    for a, b, w in centered.edges():
        biases[a] = biases[a] + matmul(w, betas[b].unsqueeze(-1)).squeeze(-1)
        biases[b] = biases[b] + transpose_apply(w, betas[a])

    return Params(
        weights=tuple(w.clone() for w in base.weights),
        label_weight=base.label_weight.clone(),
        visible_bias=biases[0],
        hidden_biases=tuple(biases[1:-1]),
        label_bias=biases[-1],
        offsets=offsets,
    )


def to_centered_gradient(grad: Gradient, offsets: Offsets) -> Gradient:
    r"""Chain rule from a gradient w.r.t. uncentered parameters to the centered parameterization around `offsets`.

        Bias gradients carry over; every coupling matrix picks up -g_a beta_b^T - beta_a g_b^T from the biases that
        `to_uncentered` makes depend on it.
    """
    betas = offsets.groups()
    biases = grad.biases()
    matrices: Dict[Tuple[int, int], torch.Tensor] = {}
    for a, b, w in grad.edges():
        matrices[(a, b)] = w - torch.outer(biases[a], betas[b]) - torch.outer(betas[a], biases[b])

    n_layers: int = len(grad.weights)
    return Gradient(
        weights=tuple(matrices[(i, i + 1)] for i in range(n_layers)),
        label_weight=matrices.get((n_layers, n_layers + 1), grad.label_weight.clone()),
        visible_bias=grad.visible_bias.clone(),
        hidden_biases=tuple(b.clone() for b in grad.hidden_biases),
        label_bias=grad.label_bias.clone(),
    )


@dataclass(frozen=True)
class InitConfig(Validator):
    r"""Initialization hyperparameters.

    :param weight_scale: float. weights are drawn from uniform(-weight_scale, weight_scale).
    :param visible_bias: float. constant visible bias.
    :param visible_bias_from_data: bool. set the visible bias to logit(pixel means) when data means are given.
    :param hidden_bias: float. constant hidden bias.
    :param label_bias: float. constant label bias.
    :param centered: bool. attach centering offsets.
    :param hidden_offset: float. offset for hidden units.
    :param label_offset: float. offset for label units.
    """

    weight_scale: float = 0.05
    visible_bias: float = 0.0
    visible_bias_from_data: bool = False
    hidden_bias: float = 0.0
    label_bias: float = 0.0
    centered: bool = False
    hidden_offset: float = 0.5
    label_offset: float = 0.5

    def __post_init__(self):
        self.validate_non_negative(self.weight_scale, 'weight_scale')
        self.validate_range(self.hidden_offset, 'hidden_offset', 0.0, 1.0, range_type='[]')
        self.validate_range(self.label_offset, 'label_offset', 0.0, 1.0, range_type='[]')


def init_params(
    shape: ModelShape,
    rng: Rng,
    config: Optional[InitConfig] = None,
    data_mean: Optional[torch.Tensor] = None,
) -> Params:
    r"""Draw initial parameters.

    :param shape: ModelShape. model shape.
    :param rng: Rng. random stream; weights are drawn layer by layer, then the label matrix.
    :param config: Optional[InitConfig]. initialization hyperparameters.
    :param data_mean: Optional[torch.Tensor]. training-set pixel means, used for the visible bias and offsets.
    """
    config = config if config is not None else InitConfig()
    a: float = config.weight_scale

    def uniform(rows: int, cols: int) -> torch.Tensor:
        return rng.uniform((rows, cols)).mul_(2.0 * a).sub_(a)

    sizes = (shape.d, *shape.layer_sizes)
    weights = tuple(uniform(sizes[i], sizes[i + 1]) for i in range(shape.n_layers))
    label_weight = uniform(shape.layer_sizes[-1], shape.k)

    if config.visible_bias_from_data and data_mean is not None:
        visible_bias = logit(data_mean.to(DTYPE))
    else:
        visible_bias = torch.full((shape.d,), config.visible_bias, dtype=DTYPE)

    offsets = None
    if config.centered:
        offsets = Offsets.constant(
            shape, visible=data_mean, hidden=config.hidden_offset, label=config.label_offset
        )

    return Params(
        weights=weights,
        label_weight=label_weight,
        visible_bias=visible_bias,
        hidden_biases=tuple(torch.full((n,), config.hidden_bias, dtype=DTYPE) for n in shape.layer_sizes),
        label_bias=torch.full((shape.k,), config.label_bias, dtype=DTYPE),
        offsets=offsets,
    )


def gradient_of(loss: torch.Tensor, leaves: Params, create_graph: bool = False) -> Gradient:
    r"""Reverse-mode derivative of a scalar `loss` w.r.t. every trainable tensor of `leaves`.

        Tensors that do not reach the loss (e.g. the label matrix of a model without labels) get zero gradients.
    """
    tensors = leaves.tensors()
    grads = torch.autograd.grad(loss, tensors, allow_unused=True, create_graph=create_graph)
    return Gradient.from_named(
        {
            name: torch.zeros_like(t) if g is None else g
            for (name, t), g in zip(leaves.named_tensors(), grads)
        }
    )
