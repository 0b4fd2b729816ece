import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pytorch_mpdbm.base.exception import DimensionMismatchError
from pytorch_mpdbm.cli.checkpoint import Checkpoint, load_checkpoint, read_manifest, save_checkpoint
from pytorch_mpdbm.cli.config import DatasetConfig, RunConfig, to_dict
from pytorch_mpdbm.cli.metrics import EVAL_FIELDS, TRAIN_FIELDS, MetricsWriter
from pytorch_mpdbm.cli.verification import CheckResult, run_oracle_checks
from pytorch_mpdbm.data.dataset import Dataset, binarize, make_missing_input_queries, synth_patterns
from pytorch_mpdbm.data.idx import load_idx
from pytorch_mpdbm.evaluation import (
    check_dataset,
    error_rate,
    general_query_cross_entropy,
    inpaint,
    missing_input_errors,
)
from pytorch_mpdbm.model.dbm import ModelShape, init_params
from pytorch_mpdbm.numerics import Rng
from pytorch_mpdbm.trainer import STREAM_INIT, BaseTrainer, MPTrainer, PCDTrainer

logger = logging.getLogger(__name__)

PATH = Union[str, Path]
CHECKPOINT_DIR: str = 'checkpoint'
BEST_DIR: str = 'best'


def load_datasets(config: DatasetConfig) -> Tuple[Dataset, Optional[Dataset], Optional[Dataset]]:
    r"""Build the (train, validation, test) splits; validation and test are None when empty or absent."""
    if config.kind == 'synthetic':
        full = synth_patterns(
            config.n_classes, config.d, config.noise_rate, config.n_examples + config.n_test, seed=config.data_seed
        )
        train, test = full.split(config.n_test)
    else:
        train = load_idx(config.train_images, config.train_labels)
        test = None
        if config.test_images is not None:
            test = load_idx(
                config.test_images,
                config.test_labels,
                n_classes=train.n_classes if config.test_labels is not None else None,
            )

    train = binarize(train, mode=config.binarize, seed=config.binarize_seed)
    if test is not None:
        test = binarize(test, mode=config.binarize, seed=config.binarize_seed + 1)

    train, validation = train.split(config.n_validation)

    def non_empty(dataset: Optional[Dataset]) -> Optional[Dataset]:
        return dataset if dataset is not None and len(dataset) > 0 else None

    return train, non_empty(validation), non_empty(test)


def _checkpoint_extra(config: RunConfig) -> Dict[str, Any]:
    config_dict = to_dict(config)
    config_dict.pop('out')
    return {'method': config.method, 'config': config_dict}


def build_trainer(
    config: RunConfig,
    train: Dataset,
    validation: Optional[Dataset],
    resume: Optional[PATH] = None,
    verbose: bool = False,
) -> BaseTrainer:
    r"""Fresh trainer from the configured initialization, or one restored from a checkpoint."""
    shape = ModelShape(d=train.d, layer_sizes=config.model.layer_sizes, k=train.n_classes)

    checkpoint: Optional[Checkpoint] = None
    if resume is not None:
        checkpoint = load_checkpoint(resume)
        if checkpoint.shape != shape:
            raise DimensionMismatchError('checkpoint', checkpoint.shape.group_sizes, shape.group_sizes)
        params = checkpoint.params
    else:
        params = init_params(
            shape, Rng(config.seed).derive(STREAM_INIT), config.model.init, data_mean=train.pixel_means()
        )

    trainer_cls = MPTrainer if config.method == 'mp' else PCDTrainer
    trainer = trainer_cls(
        params, train, config.trainer_config, seed=config.seed, validation=validation, verbose=verbose
    )
    if checkpoint is not None:
        checkpoint.restore(trainer)

    return trainer


def cmd_train(config: RunConfig, resume: Optional[PATH] = None, verbose: bool = False) -> Path:
    r"""Train, writing a checkpoint and a metrics record after every epoch. Returns the checkpoint directory.

        When training aborts (for instance on a non-finite loss) the checkpoint of the last completed epoch stays. With
        early stopping on, the parameters of the best validation epoch are also written to `best/`.
    """
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / 'config.json').write_text(json.dumps(to_dict(config), sort_keys=True, indent=2) + '\n', encoding='utf-8')

    train, validation, _ = load_datasets(config.dataset)
    trainer = build_trainer(config, train, validation, resume=resume, verbose=verbose)

    path = out / CHECKPOINT_DIR
    extra = _checkpoint_extra(config)
    if resume is None:
        save_checkpoint(path, Checkpoint.from_trainer(trainer, extra))

    logger.info(
        'training %s on %d examples (%d validation), shape %s',
        config.method,
        len(train),
        0 if validation is None else len(validation),
        trainer.params.shape.group_sizes,
    )

    with MetricsWriter(out, 'train', TRAIN_FIELDS) as writer:

        def on_epoch(t: BaseTrainer, record: Dict[str, Any]) -> None:
            writer.write(record)
            save_checkpoint(path, Checkpoint.from_trainer(t, extra))

        trainer.fit(callback=on_epoch)

    save_checkpoint(path, Checkpoint.from_trainer(trainer, extra))

    best = trainer.result()
    if best is not trainer.params:
        logger.info('best validation error %.4f, written to %s', trainer.best_error, out / BEST_DIR)
        save_checkpoint(out / BEST_DIR, Checkpoint(shape=best.shape, params=best, epoch=trainer.epoch, extra=extra))

    return path


def cmd_eval(config: RunConfig, checkpoint_path: PATH) -> List[Dict[str, Any]]:
    r"""Run the configured evaluation suite on a checkpoint and write `eval.jsonl` / `eval.csv` (and, for
    inpainting, `inpaint.jsonl`)."""
    params = load_checkpoint(checkpoint_path).params
    eval_config = config.eval

    train, validation, test = load_datasets(config.dataset)
    dataset = {'train': train, 'validation': validation, 'test': test}[eval_config.split]
    if dataset is None:
        raise ValueError(f'[-] the {eval_config.split} split is empty')
    if eval_config.n_examples is not None:
        dataset = dataset.subset(slice(0, eval_config.n_examples))
    check_dataset(params, dataset)

    mode, inference, n_iters = eval_config.mode, eval_config.inference, eval_config.n_iters

    values: Dict[Any, float] = {}
    if mode == 'classify':
        values = {'error_rate': error_rate(params, dataset, n_iters=n_iters, mode=inference)}
    elif mode == 'missing_inputs':
        values = missing_input_errors(
            params, dataset, eval_config.fractions, n_iters=n_iters, mode=inference, seed=eval_config.seed
        )
    elif mode == 'general_query':
        values = general_query_cross_entropy(
            params, dataset, eval_config.sizes, n_iters=n_iters, mode=inference, seed=eval_config.seed
        )
    else:
        queries = make_missing_input_queries(dataset, eval_config.inpaint_fraction, seed=eval_config.seed)
        records = inpaint(params, queries, n_iters=n_iters, mode=inference)

        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / 'inpaint.jsonl').open('w', encoding='utf-8') as f:
            for record in records:
                f.write(json.dumps(record) + '\n')
        values = {'n_examples': float(len(records))}

    rows = [{'mode': mode, 'inference': inference, 'key': key, 'value': value} for key, value in values.items()]
    with MetricsWriter(config.out, 'eval', EVAL_FIELDS) as writer:
        for row in rows:
            writer.write(row)
            logger.info('%s (%s) %s: %.6f', mode, inference, row['key'], row['value'])

    return rows


def cmd_oracle_check(config: RunConfig) -> Tuple[bool, List[CheckResult]]:
    r"""Run the verification suite and write `oracle_check.json`. Returns whether every check passed."""
    results = run_oracle_checks(config.oracle)
    passed: bool = all(r.passed for r in results)

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {'passed': passed, 'checks': [r.to_dict() for r in results]}
    (out / 'oracle_check.json').write_text(json.dumps(report, indent=2) + '\n', encoding='utf-8')

    for r in results:
        if not r.passed:
            logger.warning('%s failed: %.3e > %.3e %s', r.name, r.value, r.threshold, r.details)

    return passed, results


def cmd_inspect(checkpoint_path: PATH) -> Dict[str, Any]:
    r"""Summary of a checkpoint: format version, shape, epoch, method and the norm of every tensor."""
    manifest = read_manifest(checkpoint_path)
    checkpoint = load_checkpoint(checkpoint_path)

    return {
        'version': manifest['version'],
        'shape': checkpoint.shape.to_dict(),
        'epoch': checkpoint.epoch,
        'method': checkpoint.extra.get('method'),
        'centered': checkpoint.params.is_centered,
        'sha256': manifest['sha256'],
        'tensors': {
            name: {'dims': list(t.shape), 'norm': float(t.norm()) if t.numel() > 0 else 0.0}
            for name, t in checkpoint.named_tensors()
        },
    }
