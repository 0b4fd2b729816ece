from typing import Optional

import torch
from torch import nn

from pytorch_mpdbm.base.validation import Validator
from pytorch_mpdbm.model.mask import Mask


class MultiPredictionLoss(nn.Module):
    r"""Cross-entropy of the prediction targets of a mask, given mean field predictions.

        Per example, binary cross-entropy summed over the unobserved visibles plus, when the label is unobserved,
        the categorical cross-entropy of the true class. Probabilities are clipped to [eps, 1 - eps] before the log.

    :param eps: float. clipping constant.
    :param reduction: str. 'none' (per-example), 'sum' or 'mean' over the batch.
    """

    def __init__(self, eps: float = 1e-12, reduction: str = 'none'):
        super().__init__()
        Validator.validate_range(eps, 'eps', 0.0, 0.5, range_type='()')
        Validator.validate_options(reduction, 'reduction', ['none', 'sum', 'mean'])

        self.eps = eps
        self.reduction = reduction

    def forward(
        self,
        v_pred: torch.Tensor,
        v_true: torch.Tensor,
        mask: Mask,
        y_pred: Optional[torch.Tensor] = None,
        y_true: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        v_pred = torch.clamp(v_pred, self.eps, 1.0 - self.eps)
        v_true = v_true.to(v_pred.dtype)
        bce = -(v_true * torch.log(v_pred) + (1.0 - v_true) * torch.log1p(-v_pred))
        loss = torch.where(mask.visible, torch.zeros_like(bce), bce).sum(dim=-1)

        if y_pred is not None and y_pred.shape[-1] > 0:
            if y_true is None:
                raise ValueError('[-] y_true must be given for a model with a label unit')

            y_pred = torch.clamp(y_pred, self.eps, 1.0 - self.eps)
            ce = -(y_true.to(y_pred.dtype) * torch.log(y_pred)).sum(dim=-1)
            loss = loss + torch.where(mask.label, torch.zeros_like(ce), ce)

        if self.reduction == 'sum':
            return loss.sum()
        if self.reduction == 'mean':
            return loss.mean()
        return loss
