import math
from typing import List, Optional, Sequence, Tuple

import torch

from pytorch_mpdbm.model import FullState, Mask, ModelShape, Offsets, Params
from pytorch_mpdbm.numerics import DTYPE, Rng


def random_tiny_params(shape: ModelShape, rng: Rng, scale: float = 1.0, centered: bool = False) -> Params:
    def uniform(*size: int) -> torch.Tensor:
        return rng.uniform(size) * 2.0 * scale - scale

    sizes = (shape.d, *shape.layer_sizes)
    offsets = None
    if centered:
        offsets = Offsets(
            visible=0.1 + 0.8 * rng.uniform((shape.d,)),
            hidden=tuple(0.1 + 0.8 * rng.uniform((n,)) for n in shape.layer_sizes),
            label=0.1 + 0.8 * rng.uniform((shape.k,)),
        )

    return Params(
        weights=tuple(uniform(sizes[i], sizes[i + 1]) for i in range(shape.n_layers)),
        label_weight=uniform(shape.layer_sizes[-1], shape.k),
        visible_bias=uniform(shape.d),
        hidden_biases=tuple(uniform(n) for n in shape.layer_sizes),
        label_bias=uniform(shape.k),
        offsets=offsets,
    )


def zero_params(shape: ModelShape) -> Params:
    sizes = (shape.d, *shape.layer_sizes)
    return Params(
        weights=tuple(torch.zeros(sizes[i], sizes[i + 1], dtype=DTYPE) for i in range(shape.n_layers)),
        label_weight=torch.zeros(shape.layer_sizes[-1], shape.k, dtype=DTYPE),
        visible_bias=torch.zeros(shape.d, dtype=DTYPE),
        hidden_biases=tuple(torch.zeros(n, dtype=DTYPE) for n in shape.layer_sizes),
        label_bias=torch.zeros(shape.k, dtype=DTYPE),
    )


def random_tiny_data(shape: ModelShape, batch_size: int, rng: Rng) -> Tuple[torch.Tensor, Optional[torch.Tensor]]:
    v = rng.bernoulli(0.5, (batch_size, shape.d))
    if shape.k == 0:
        return v, None
    return v, torch.nn.functional.one_hot(rng.integers(shape.k, (batch_size,)), num_classes=shape.k).to(DTYPE)


def random_state(shape: ModelShape, rng: Rng) -> FullState:
    y = None
    if shape.k > 0:
        y = torch.zeros(shape.k, dtype=DTYPE)
        y[int(rng.integers(shape.k))] = 1.0
    return FullState(
        v=rng.bernoulli(0.5, (shape.d,)), h=tuple(rng.bernoulli(0.5, (n,)) for n in shape.layer_sizes), y=y
    )


def naive_energy(params: Params, state: FullState) -> float:
    r"""Scalar-loop evaluation of the energy of a single state."""
    groups: List[List[float]] = [[float(x) for x in u] for u in state.units()]
    offsets: List[List[float]] = [[float(x) for x in o] for o in params.group_offsets()]
    biases: List[List[float]] = [[float(x) for x in b] for b in params.biases()]

    e: float = 0.0
    for a, b, w in params.edges():
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                e -= (groups[a][i] - offsets[a][i]) * float(w[i, j]) * (groups[b][j] - offsets[b][j])
    for g, bias in enumerate(biases):
        for i, value in enumerate(bias):
            e -= (groups[g][i] - offsets[g][i]) * value

    return e


def naive_mp_loss(
    v_pred: torch.Tensor,
    v_true: torch.Tensor,
    mask: Mask,
    y_pred: Optional[torch.Tensor],
    y_true: Optional[torch.Tensor],
    eps: float = 1e-12,
) -> List[float]:
    r"""Scalar-loop masked cross-entropy, one value per example."""
    losses: List[float] = []
    for n in range(v_true.shape[0]):
        total: float = 0.0
        for i in range(v_true.shape[1]):
            if bool(mask.visible[n, i]):
                continue
            p = min(max(float(v_pred[n, i]), eps), 1.0 - eps)
            total -= math.log(p) if float(v_true[n, i]) == 1.0 else math.log(1.0 - p)
        if y_pred is not None and not bool(mask.label[n]):
            c = int(torch.argmax(y_true[n]))
            total -= math.log(min(max(float(y_pred[n, c]), eps), 1.0 - eps))
        losses.append(total)
    return losses


def average_ranks(values: Sequence[float]) -> torch.Tensor:
    t = torch.tensor(list(values), dtype=DTYPE)
    return torch.stack([(t < x).sum() + 0.5 * ((t == x).sum() - 1) for x in t]).to(DTYPE) + 1.0


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    r"""Rank correlation, ties sharing their average rank."""
    rx, ry = average_ranks(x), average_ranks(y)
    rx, ry = rx - rx.mean(), ry - ry.mean()
    return float((rx * ry).sum() / (rx.norm() * ry.norm()))
