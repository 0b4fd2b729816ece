"""Masked block mean field, unrolled as a fixed-depth recurrent computation.

Every sweep updates the odd block (h^(1), h^(3), ... and the label when it sits opposite h^(L)) and then the even
block (the unobserved visibles, h^(2), ...). The whole computation is built from differentiable torch ops, so the
autograd graph of `mf_run` is the unrolled inference net that multi-prediction training backpropagates through.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import torch

from pytorch_mpdbm.base.type import INFERENCE_MODE, MF_INIT
from pytorch_mpdbm.base.validation import Validator
from pytorch_mpdbm.model.dbm import (
    ModelShape,
    Params,
    activate,
    conditional_means,
    energy_of_units,
    pre_activation,
)
from pytorch_mpdbm.model.mask import Mask
from pytorch_mpdbm.numerics import DTYPE, sigmoid, softmax, transpose_apply
from pytorch_mpdbm.oracle.enumeration import DEFAULT_BOUND, EnumBound, exact_log_partition

RECONSTRUCTION = Callable[[Params, Sequence[torch.Tensor]], torch.Tensor]


@dataclass(frozen=True)
class MeanFieldState:
    r"""Factorial variational parameters for a batch of queries.

    :param v: torch.Tensor. (B, D) visible means; observed positions carry the clamped data.
    :param h: Tuple[torch.Tensor, ...]. (B, N_i) hidden means per layer.
    :param y: torch.Tensor. (B, k) label probabilities, (B, 0) without a label unit.
    :param r: Optional[torch.Tensor]. (B, D) last multi-inference reconstruction of v.
    """

    v: torch.Tensor
    h: Tuple[torch.Tensor, ...]
    y: torch.Tensor
    r: Optional[torch.Tensor] = None

    def __post_init__(self):
        object.__setattr__(self, 'h', tuple(self.h))

    def units(self) -> List[torch.Tensor]:
        return [self.v, *self.h, self.y]

    @classmethod
    def from_units(cls, units: Sequence[torch.Tensor], r: Optional[torch.Tensor] = None) -> 'MeanFieldState':
        return cls(v=units[0], h=tuple(units[1:-1]), y=units[-1], r=r)

    def detach(self) -> 'MeanFieldState':
        return MeanFieldState.from_units(
            [u.detach() for u in self.units()], r=None if self.r is None else self.r.detach()
        )

    def max_change(self, other: 'MeanFieldState') -> float:
        return max(
            (float((a - b).abs().max()) for a, b in zip(self.units(), other.units()) if a.numel() > 0), default=0.0
        )


def _check_labels(shape: ModelShape, mask: Mask, labels: Optional[torch.Tensor]) -> None:
    if shape.k > 0 and labels is None and bool(mask.label.any()):
        raise ValueError('[-] labels must be given when the label is observed')


def _clamp_visible(mask: Mask, data: torch.Tensor, means: torch.Tensor) -> torch.Tensor:
    return torch.where(mask.visible, data, means)


def _clamp_label(shape: ModelShape, mask: Mask, labels: Optional[torch.Tensor], probs: torch.Tensor) -> torch.Tensor:
    if shape.k == 0 or labels is None:
        return probs
    return torch.where(mask.label.unsqueeze(-1), labels.to(probs.dtype), probs)


def mf_init(
    params: Params,
    data: torch.Tensor,
    mask: Mask,
    labels: Optional[torch.Tensor] = None,
    init: MF_INIT = 'bias',
) -> MeanFieldState:
    r"""Initial variational parameters.

        With `init='bias'` every free unit starts at the activation of its own bias. With `init='bottom_up'` the hidden
        layers are filled by one upward pass in which intermediate layers receive their bottom-up input twice, standing
        in for the top-down input they do not have yet.

    :param params: Params. model parameters.
    :param data: torch.Tensor. (B, D) visible data.
    :param mask: Mask. (B, D) batched mask.
    :param labels: Optional[torch.Tensor]. (B, k) one-hot labels, read where the label is observed.
    :param init: MF_INIT. initializer.
    """
    Validator.validate_options(init, 'init', ['bias', 'bottom_up'])

    shape = params.shape
    _check_labels(shape, mask, labels)

    batch_size: int = data.shape[0]
    data = data.to(DTYPE)

    v = _clamp_visible(mask, data, sigmoid(params.visible_bias).expand(batch_size, shape.d))

    if init == 'bias':
        h = [sigmoid(b).expand(batch_size, b.shape[0]) for b in params.hidden_biases]
    else:
        offsets = params.group_offsets()
        h, below = [], v
        for i, (w, b) in enumerate(zip(params.weights, params.hidden_biases)):
            scale: float = 2.0 if i < shape.n_layers - 1 else 1.0
            h.append(sigmoid(scale * transpose_apply(w, below - offsets[i]) + b))
            below = h[-1]

    if shape.k > 0:
        y = softmax(params.label_bias).expand(batch_size, shape.k)
        if init == 'bottom_up':
            y = softmax(pre_activation(params, [v, *h, y], shape.label_group))
        y = _clamp_label(shape, mask, labels, y)
    else:
        y = data.new_zeros((batch_size, 0))

    return MeanFieldState(v=v, h=tuple(h), y=y)


def reconstruct_visible(params: Params, units: Sequence[torch.Tensor]) -> torch.Tensor:
    r"""Mean field update v would receive if it were not observed, sigmoid(W^(1) h^(1) + b_v)."""
    return conditional_means(params, units, 0)


def _sweep(
    params: Params,
    state: MeanFieldState,
    data: torch.Tensor,
    mask: Mask,
    labels: Optional[torch.Tensor],
    reconstruction: Optional[RECONSTRUCTION] = None,
    record: Optional[List[Tuple[int, torch.Tensor]]] = None,
) -> MeanFieldState:
    shape = params.shape
    units = state.units()

    r = None
    inputs = units
    if reconstruction is not None:
        r = reconstruction(params, units)
        inputs = [torch.where(mask.visible, 0.5 * (data + r), units[0]), *units[1:]]

    for parity in (1, 0):
        updates = {}
        for g in shape.block(parity):
            pre = pre_activation(params, inputs, g)
            if record is not None:
                record.append((g, pre))

            means = activate(params, pre, g)
            if g == 0:
                means = _clamp_visible(mask, data, means)
            elif g == shape.label_group:
                means = _clamp_label(shape, mask, labels, means)
            updates[g] = means

        units = [updates.get(g, u) for g, u in enumerate(units)]
        inputs = [updates.get(g, u) for g, u in enumerate(inputs)]

    return MeanFieldState.from_units(units, r=r)


def mf_sweep(
    params: Params,
    state: MeanFieldState,
    data: torch.Tensor,
    mask: Mask,
    labels: Optional[torch.Tensor] = None,
) -> MeanFieldState:
    r"""One standard mean field iteration: the odd block, then the even block. Clamped coordinates never change."""
    _check_labels(params.shape, mask, labels)
    return _sweep(params, state, data.to(DTYPE), mask, labels)


@dataclass
class Trace:
    r"""Record of an unrolled mean field run.

    :param mode: INFERENCE_MODE. inference mode.
    :param states: List[MeanFieldState]. initial state followed by the state after every sweep.
    :param pre_activations: List[List[Tuple[int, torch.Tensor]]]. (group, pre-activation) per update, per sweep.
    :param reconstruction: Optional[RECONSTRUCTION]. reconstruction used by multi-inference.
    """

    mode: str
    states: List[MeanFieldState] = field(default_factory=list)
    pre_activations: List[List[Tuple[int, torch.Tensor]]] = field(default_factory=list)
    reconstruction: Optional[RECONSTRUCTION] = None

    def __len__(self) -> int:
        return len(self.pre_activations)

    @property
    def final(self) -> MeanFieldState:
        return self.states[-1]

    def replay(
        self, params: Params, data: torch.Tensor, mask: Mask, labels: Optional[torch.Tensor] = None
    ) -> MeanFieldState:
        r"""Re-run the recorded sweeps forward from the recorded initial state."""
        state = self.states[0]
        for _ in range(len(self)):
            state = _sweep(params, state, data.to(DTYPE), mask, labels, reconstruction=self.reconstruction)
        return state


def mf_run(
    params: Params,
    data: torch.Tensor,
    mask: Mask,
    n_iters: int,
    mode: INFERENCE_MODE = 'standard',
    labels: Optional[torch.Tensor] = None,
    init: MF_INIT = 'bias',
    tol: Optional[float] = None,
    reconstruction: Optional[RECONSTRUCTION] = None,
) -> Tuple[MeanFieldState, Trace]:
    r"""Run `n_iters` mean field sweeps and record them.

        In multi-inference mode r = sigmoid(W^(1) h^(1) + b_v) is computed at the start of every sweep and
        0.5 (v + r) replaces every observed visible input to that sweep's updates.

    :param params: Params. model parameters.
    :param data: torch.Tensor. (B, D) visible data.
    :param mask: Mask. (B, D) batched mask.
    :param n_iters: int. number of sweeps.
    :param mode: INFERENCE_MODE. 'standard' or 'multi_inference'.
    :param labels: Optional[torch.Tensor]. (B, k) one-hot labels, read where the label is observed.
    :param init: MF_INIT. initializer.
    :param tol: Optional[float]. stop early once no mean moves by more than `tol` in one sweep.
    :param reconstruction: Optional[RECONSTRUCTION]. override of the multi-inference reconstruction.
    """
    Validator.validate_step(n_iters, 'n_iters')
    Validator.validate_options(mode, 'mode', ['standard', 'multi_inference'])
    Validator.validate_non_negative(tol, 'tol')

    data = data.to(DTYPE)
    if mode == 'multi_inference' and reconstruction is None:
        reconstruction = reconstruct_visible
    elif mode == 'standard':
        reconstruction = None

    state = mf_init(params, data, mask, labels=labels, init=init)
    trace = Trace(mode=mode, states=[state], reconstruction=reconstruction)

    for _ in range(n_iters):
        record: List[Tuple[int, torch.Tensor]] = []
        new_state = _sweep(params, state, data, mask, labels, reconstruction=reconstruction, record=record)

        trace.states.append(new_state)
        trace.pre_activations.append(record)

        converged: bool = tol is not None and new_state.max_change(state) <= tol
        state = new_state
        if converged:
            break

    return state, trace


def mf_kl_to_exact(
    params: Params,
    data: torch.Tensor,
    mask: Mask,
    state: MeanFieldState,
    labels: Optional[torch.Tensor] = None,
    bound: EnumBound = DEFAULT_BOUND,
) -> torch.Tensor:
    r"""KL(Q || P(free units | observed)) per query, exactly, by enumeration.

        With Q factorial and the energy multilinear, KL = -H(Q) + E(means of Q) + log Z_observed, where Z_observed is
        the sum of exp(-E) over the completions of the observed assignment.

    :param params: Params. model parameters.
    :param data: torch.Tensor. (B, D) visible data.
    :param mask: Mask. (B, D) batched mask.
    :param state: MeanFieldState. variational parameters to score.
    :param labels: Optional[torch.Tensor]. (B, k) one-hot labels, read where the label is observed.
    :param bound: EnumBound. enumeration bound.
    """
    shape = params.shape
    _check_labels(shape, mask, labels)

    def entropy(q: torch.Tensor) -> torch.Tensor:
        return -(torch.xlogy(q, q) + torch.xlogy(1.0 - q, 1.0 - q)).sum(dim=-1)

    kls = []
    for i in range(data.shape[0]):
        label = None if labels is None else labels[i]
        log_partition = exact_log_partition(params, data[i], mask[i], label=label, bound=bound)

        h_q = entropy(state.v[i][~mask.visible[i]]) + sum(entropy(h[i]) for h in state.h)
        if shape.k > 0 and not bool(mask.label[i]):
            h_q = h_q - torch.xlogy(state.y[i], state.y[i]).sum()

        expected_energy = energy_of_units(params, [u[i] for u in state.units()])
        kls.append(expected_energy - h_q + log_partition)

    return torch.stack(kls)
