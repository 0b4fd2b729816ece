from dataclasses import dataclass
from typing import Optional, Sequence, Union

import torch

from pytorch_mpdbm.base.exception import DimensionMismatchError
from pytorch_mpdbm.model.dbm import ModelShape


@dataclass(frozen=True)
class Mask:
    r"""Partition of the visible and label variables into observed inputs and prediction targets.

        Masks are batched like the data they apply to: `visible` is (..., D) and `label` is (...). With k = 0 the
        label flag is carried but ignored.

    :param visible: torch.Tensor. bool, True where a pixel is observed.
    :param label: torch.Tensor. bool, True where the label is observed.
    """

    visible: torch.Tensor
    label: torch.Tensor

    def __post_init__(self):
        object.__setattr__(self, 'visible', self.visible.to(torch.bool))
        object.__setattr__(self, 'label', torch.as_tensor(self.label, dtype=torch.bool))
        if tuple(self.visible.shape[:-1]) != tuple(self.label.shape):
            raise DimensionMismatchError('mask', self.visible.shape, self.label.shape)

    def __len__(self) -> int:
        return self.visible.shape[0] if self.visible.dim() > 1 else 1

    def __getitem__(self, index: Union[int, slice, torch.Tensor]) -> 'Mask':
        return Mask(visible=self.visible[index], label=self.label[index])

    @classmethod
    def all_observed(cls, shape: ModelShape, batch_size: Optional[int] = None) -> 'Mask':
        size = (shape.d,) if batch_size is None else (batch_size, shape.d)
        return cls(visible=torch.ones(size, dtype=torch.bool), label=torch.ones(size[:-1], dtype=torch.bool))

    @classmethod
    def none_observed(cls, shape: ModelShape, batch_size: Optional[int] = None) -> 'Mask':
        size = (shape.d,) if batch_size is None else (batch_size, shape.d)
        return cls(visible=torch.zeros(size, dtype=torch.bool), label=torch.zeros(size[:-1], dtype=torch.bool))

    @classmethod
    def cat(cls, masks: Sequence['Mask']) -> 'Mask':
        return cls(
            visible=torch.cat([m.visible for m in masks], dim=0), label=torch.cat([m.label for m in masks], dim=0)
        )

    def n_observed(self, shape: ModelShape) -> torch.Tensor:
        n = self.visible.sum(dim=-1)
        return n + self.label.long() if shape.k > 0 else n

    def n_targets(self, shape: ModelShape) -> torch.Tensor:
        n = (~self.visible).sum(dim=-1)
        return n + (~self.label).long() if shape.k > 0 else n

    def is_valid(self, shape: ModelShape) -> torch.Tensor:
        r"""True for masks with at least one input and at least one target."""
        return (self.n_observed(shape) > 0) & (self.n_targets(shape) > 0)
