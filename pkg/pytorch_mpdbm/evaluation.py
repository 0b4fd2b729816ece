"""Query-time evaluation suites: classification, classification with missing inputs, general queries, inpainting."""

from typing import Any, Dict, List, Optional, Sequence

import torch

from pytorch_mpdbm.base.exception import DimensionMismatchError, EmptyInputError
from pytorch_mpdbm.base.type import INFERENCE_MODE
from pytorch_mpdbm.data.dataset import Dataset, QuerySet, make_general_queries, make_missing_input_queries
from pytorch_mpdbm.inference.mean_field import mf_run
from pytorch_mpdbm.loss import MultiPredictionLoss
from pytorch_mpdbm.model.dbm import Params
from pytorch_mpdbm.model.mask import Mask

EVAL_BATCH_SIZE: int = 1000


def check_dataset(params: Params, dataset: Dataset) -> None:
    r"""Raise when the dataset does not fit the model's visible layer or label unit."""
    shape = params.shape
    if dataset.d != shape.d:
        raise DimensionMismatchError('dataset', (len(dataset), dataset.d), (len(dataset), shape.d))
    if dataset.labels is not None and dataset.n_classes != shape.k:
        raise DimensionMismatchError('labels', (dataset.n_classes,), (shape.k,))


@torch.no_grad()
def classify(
    params: Params,
    v: torch.Tensor,
    n_iters: int = 10,
    mode: INFERENCE_MODE = 'standard',
    mask: Optional[Mask] = None,
    batch_size: int = EVAL_BATCH_SIZE,
) -> torch.Tensor:
    r"""Predict the class of every row of `v` as the argmax of the mean field label posterior (ties go to the lowest
    class).

    :param params: Params. model parameters, k > 0.
    :param v: torch.Tensor. (N, D) examples.
    :param n_iters: int. mean field sweeps.
    :param mode: INFERENCE_MODE. 'standard' or 'multi_inference'.
    :param mask: Optional[Mask]. (N, D) observed pixels, all of them by default. The label is always inferred.
    :param batch_size: int. queries per mean field run.
    """
    shape = params.shape
    if shape.k == 0:
        raise ValueError('[-] classification needs a model with a label unit')

    if mask is None:
        mask = Mask.all_observed(shape, batch_size=v.shape[0])
    mask = Mask(visible=mask.visible, label=torch.zeros_like(mask.label))

    predictions = [
        mf_run(params, v[start:start + batch_size], mask[start:start + batch_size], n_iters, mode=mode)[0].y.argmax(
            dim=-1
        )
        for start in range(0, v.shape[0], batch_size)
    ]
    return torch.cat(predictions) if predictions else torch.zeros(0, dtype=torch.int64)


def error_rate(
    params: Params,
    dataset: Dataset,
    n_iters: int = 10,
    mode: INFERENCE_MODE = 'standard',
    mask: Optional[Mask] = None,
) -> float:
    r"""Fraction of misclassified examples."""
    if len(dataset) == 0:
        raise EmptyInputError('error_rate')
    if dataset.labels is None:
        raise ValueError('[-] error_rate needs a labeled dataset')
    check_dataset(params, dataset)

    predictions = classify(params, dataset.v, n_iters=n_iters, mode=mode, mask=mask)
    return float((predictions != dataset.labels).to(torch.float64).mean())


def missing_input_errors(
    params: Params,
    dataset: Dataset,
    fractions: Sequence[float],
    n_iters: int = 10,
    mode: INFERENCE_MODE = 'standard',
    seed: int = 0,
) -> Dict[float, float]:
    r"""Classification error rate with a random fraction of the pixels of every example hidden, per fraction."""
    return {
        fraction: error_rate(
            params,
            dataset,
            n_iters=n_iters,
            mode=mode,
            mask=make_missing_input_queries(dataset, fraction, seed=seed).mask,
        )
        for fraction in fractions
    }


@torch.no_grad()
def query_cross_entropy(
    params: Params, queries: QuerySet, n_iters: int = 10, mode: INFERENCE_MODE = 'standard'
) -> float:
    r"""Cross-entropy of all the targets of a query set divided by the number of targets."""
    shape = params.shape
    if len(queries) == 0:
        raise EmptyInputError('query_cross_entropy')

    loss_fn = MultiPredictionLoss(reduction='sum')

    total: float = 0.0
    for start in range(0, len(queries), EVAL_BATCH_SIZE):
        index = slice(start, start + EVAL_BATCH_SIZE)
        v, mask = queries.v[index], queries.mask[index]
        labels = None if queries.labels is None else queries.labels[index]

        state, _ = mf_run(params, v, mask, n_iters, mode=mode, labels=labels)
        total += float(loss_fn(state.v, v, mask, y_pred=state.y, y_true=labels))

    n_targets: int = int(queries.mask.n_targets(shape).sum())
    return total / n_targets


def general_query_cross_entropy(
    params: Params,
    dataset: Dataset,
    sizes: Sequence[int],
    n_iters: int = 10,
    mode: INFERENCE_MODE = 'standard',
    seed: int = 0,
) -> Dict[int, float]:
    r"""Mean per-variable cross-entropy of randomly chosen target subsets given their complements, per subset size."""
    check_dataset(params, dataset)
    return {
        size: query_cross_entropy(params, make_general_queries(dataset, size, seed=seed), n_iters=n_iters, mode=mode)
        for size in sizes
    }


@torch.no_grad()
def inpaint(
    params: Params,
    queries: QuerySet,
    n_iters: int = 10,
    mode: INFERENCE_MODE = 'standard',
) -> List[Dict[str, Any]]:
    r"""Mean field trajectories of a set of queries, one record per example.

        Every record holds the example index, its mask and the v / y means after initialization and after every sweep.
    """
    if len(queries) == 0:
        return []

    _, trace = mf_run(params, queries.v, queries.mask, n_iters, mode=mode, labels=queries.labels)

    records: List[Dict[str, Any]] = []
    for i in range(len(queries)):
        records.append(
            {
                'index': i,
                'observed': queries.mask.visible[i].to(torch.int64).tolist(),
                'label_observed': bool(queries.mask.label[i]),
                'v': [state.v[i].tolist() for state in trace.states],
                'y': [state.y[i].tolist() for state in trace.states],
            }
        )

    return records
