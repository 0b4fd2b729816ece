"""Run configuration: a tree of frozen dataclasses loaded from JSON, validated before any work starts."""

import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Type, TypeVar, Union, get_args, get_origin, get_type_hints

from pytorch_mpdbm.base.exception import ConfigError, NegativeLRError, NegativeStepError
from pytorch_mpdbm.base.type import BINARIZE_MODE, EVAL_MODE, INFERENCE_MODE, TRAIN_METHOD
from pytorch_mpdbm.base.validation import Validator
from pytorch_mpdbm.model.dbm import InitConfig
from pytorch_mpdbm.trainer.mp import MpConfig
from pytorch_mpdbm.trainer.pcd import PcdConfig

T = TypeVar('T')

DATASET_KIND = Literal['synthetic', 'idx']
EVAL_SPLIT = Literal['train', 'validation', 'test']


@dataclass(frozen=True)
class ModelConfig(Validator):
    r"""Model shape (the visible size and the number of classes come from the dataset) and initialization."""

    layer_sizes: Tuple[int, ...] = (500, 1000)
    init: InitConfig = field(default_factory=InitConfig)

    def __post_init__(self):
        if len(self.layer_sizes) == 0:
            raise ValueError('[-] layer_sizes must not be empty')
        for size in self.layer_sizes:
            self.validate_positive(size, 'layer_sizes')


@dataclass(frozen=True)
class DatasetConfig(Validator):
    r"""Where the examples come from.

    :param kind: DATASET_KIND. 'synthetic' noisy class templates or 'idx' files.
    :param train_images: Optional[str]. IDX training images.
    :param train_labels: Optional[str]. IDX training labels.
    :param test_images: Optional[str]. IDX test images.
    :param test_labels: Optional[str]. IDX test labels.
    :param n_validation: int. trailing training examples held out for validation.
    :param binarize: BINARIZE_MODE. pixel binarization.
    :param binarize_seed: int. seed of stochastic binarization.
    :param n_classes: int. synthetic classes.
    :param d: int. synthetic pixels.
    :param noise_rate: float. synthetic bit flip probability.
    :param n_examples: int. synthetic training examples (validation included).
    :param n_test: int. synthetic test examples.
    :param data_seed: int. seed of the synthetic templates and noise.
    """

    kind: DATASET_KIND = 'synthetic'
    train_images: Optional[str] = None
    train_labels: Optional[str] = None
    test_images: Optional[str] = None
    test_labels: Optional[str] = None
    n_validation: int = 200
    binarize: BINARIZE_MODE = 'threshold'
    binarize_seed: int = 0
    n_classes: int = 4
    d: int = 16
    noise_rate: float = 0.05
    n_examples: int = 1000
    n_test: int = 500
    data_seed: int = 0

    def __post_init__(self):
        self.validate_options(self.kind, 'kind', ['synthetic', 'idx'])
        self.validate_options(self.binarize, 'binarize', ['threshold', 'stochastic'])
        self.validate_non_negative(self.n_validation, 'n_validation')
        self.validate_non_negative(self.n_test, 'n_test')
        if self.kind == 'idx' and self.train_images is None:
            raise ValueError('[-] train_images must be given for idx datasets')
        if self.kind == 'synthetic' and self.n_validation > self.n_examples:
            raise ValueError('[-] n_validation must not exceed n_examples')


@dataclass(frozen=True)
class EvalConfig(Validator):
    r"""Evaluation suite.

    :param mode: EVAL_MODE. which suite to run.
    :param inference: INFERENCE_MODE. 'standard' mean field or 'multi_inference'.
    :param n_iters: int. mean field sweeps.
    :param fractions: Tuple[float, ...]. missing pixel fractions.
    :param sizes: Tuple[int, ...]. general query sizes.
    :param inpaint_fraction: float. fraction of pixels hidden for inpainting.
    :param split: EVAL_SPLIT. dataset split to evaluate on.
    :param n_examples: Optional[int]. evaluate on the first examples only.
    :param seed: int. seed of the query masks.
    """

    mode: EVAL_MODE = 'classify'
    inference: INFERENCE_MODE = 'standard'
    n_iters: int = 10
    fractions: Tuple[float, ...] = (0.0, 0.25, 0.5, 0.75)
    sizes: Tuple[int, ...] = (1, 2, 4, 8)
    inpaint_fraction: float = 0.5
    split: EVAL_SPLIT = 'test'
    n_examples: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        self.validate_options(self.mode, 'mode', ['classify', 'missing_inputs', 'general_query', 'inpaint'])
        self.validate_options(self.inference, 'inference', ['standard', 'multi_inference'])
        self.validate_options(self.split, 'split', ['train', 'validation', 'test'])
        self.validate_step(self.n_iters, 'n_iters')
        for fraction in self.fractions:
            self.validate_range(fraction, 'fractions', 0.0, 1.0, range_type='[]')
        for size in self.sizes:
            self.validate_positive(size, 'sizes')
        self.validate_range(self.inpaint_fraction, 'inpaint_fraction', 0.0, 1.0, range_type='[]')
        if self.n_examples is not None:
            self.validate_positive(self.n_examples, 'n_examples')


@dataclass(frozen=True)
class OracleCheckConfig(Validator):
    r"""Verification suite on random tiny models.

    :param d: int. visible units.
    :param layer_sizes: Tuple[int, ...]. hidden layer sizes.
    :param k: int. label classes.
    :param n_models: int. random models per check.
    :param weight_scale: float. parameters are drawn from uniform(-weight_scale, weight_scale).
    :param batch_size: int. examples per gradient check.
    :param n_iters: Tuple[int, ...]. mean field depths of the gradient check.
    :param fd_eps: float. central difference step.
    :param fd_tolerance: float. largest relative error.
    :param fd_abs_tolerance: float. absolute error accepted regardless of the relative error.
    :param kl_sweeps: int. sweeps of the KL monotonicity check.
    :param kl_slack: float. tolerated KL increase per sweep.
    :param gibbs_chains: int. parallel chains of the stationarity check.
    :param gibbs_samples: int. samples kept per chain.
    :param gibbs_burn_in: int. sweeps discarded per chain.
    :param gibbs_thin: int. sweeps between kept samples.
    :param gibbs_tolerance: float. largest total variation distance.
    :param centering_tolerance: float. largest probability difference between centered and uncentered models.
    :param max_total_units: int. enumeration bound.
    :param corrupt_gradient: bool. perturb the analytic gradient (fault injection; the gradient check must fail).
    :param seed: int. seed.
    """

    d: int = 3
    layer_sizes: Tuple[int, ...] = (2, 2)
    k: int = 2
    n_models: int = 20
    weight_scale: float = 1.0
    batch_size: int = 4
    n_iters: Tuple[int, ...] = (1, 2, 5)
    fd_eps: float = 1e-5
    fd_tolerance: float = 1e-5
    fd_abs_tolerance: float = 1e-8
    kl_sweeps: int = 20
    kl_slack: float = 1e-10
    gibbs_chains: int = 1000
    gibbs_samples: int = 1000
    gibbs_burn_in: int = 100
    gibbs_thin: int = 5
    gibbs_tolerance: float = 0.01
    centering_tolerance: float = 1e-12
    max_total_units: int = 22
    corrupt_gradient: bool = False
    seed: int = 0

    def __post_init__(self):
        self.validate_positive(self.d, 'd')
        self.validate_non_negative(self.k, 'k')
        self.validate_positive(self.n_models, 'n_models')
        self.validate_positive(self.batch_size, 'batch_size')
        for n in self.n_iters:
            self.validate_step(n, 'n_iters')
        self.validate_positive(self.fd_eps, 'fd_eps')
        self.validate_step(self.kl_sweeps, 'kl_sweeps')
        self.validate_positive(self.gibbs_chains, 'gibbs_chains')
        self.validate_positive(self.gibbs_samples, 'gibbs_samples')
        self.validate_non_negative(self.gibbs_burn_in, 'gibbs_burn_in')
        self.validate_step(self.gibbs_thin, 'gibbs_thin')
        self.validate_positive(self.max_total_units, 'max_total_units')


@dataclass(frozen=True)
class RunConfig(Validator):
    r"""Everything one `mpdbm` invocation needs.

    :param method: TRAIN_METHOD. 'mp' multi-prediction or 'pcd' (centered when model.init.centered is set).
    :param model: ModelConfig. model shape and initialization.
    :param mp: MpConfig. multi-prediction hyperparameters.
    :param pcd: PcdConfig. PCD hyperparameters.
    :param dataset: DatasetConfig. data source.
    :param eval: EvalConfig. evaluation suite.
    :param oracle: OracleCheckConfig. verification suite.
    :param seed: int. seed of the run.
    :param out: str. output directory.
    """

    method: TRAIN_METHOD = 'mp'
    model: ModelConfig = field(default_factory=ModelConfig)
    mp: MpConfig = field(default_factory=MpConfig)
    pcd: PcdConfig = field(default_factory=PcdConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    oracle: OracleCheckConfig = field(default_factory=OracleCheckConfig)
    seed: int = 0
    out: str = 'runs/default'

    def __post_init__(self):
        self.validate_options(self.method, 'method', ['mp', 'pcd'])

    @property
    def trainer_config(self) -> Union[MpConfig, PcdConfig]:
        return self.mp if self.method == 'mp' else self.pcd


def _join(path: str, key: str) -> str:
    return f'{path}.{key}' if path else key


def _convert(tp: Any, value: Any, path: str) -> Any:
    if is_dataclass(tp):
        return from_dict(tp, value, path=path)

    origin = get_origin(tp)
    if origin is Union:
        args = get_args(tp)
        if value is None:
            if type(None) in args:
                return None
            raise ConfigError(path, 'must not be null')
        candidates = [a for a in args if a is not type(None)]
        if len(candidates) == 1:
            return _convert(candidates[0], value, path)
        for arg in candidates:
            try:
                return _convert(arg, value, path)
            except ConfigError:
                continue
        raise ConfigError(path, f'invalid value {value!r}')

    if origin is Literal:
        if value not in get_args(tp):
            raise ConfigError(path, f'{value!r} must be one of {list(get_args(tp))}')
        return value

    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, f'expected a list, got {type(value).__name__}')
        item_type = get_args(tp)[0]
        return tuple(_convert(item_type, item, f'{path}[{i}]') for i, item in enumerate(value))

    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f'expected a boolean, got {value!r}')
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f'expected an integer, got {value!r}')
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f'expected a number, got {value!r}')
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f'expected a string, got {value!r}')
        return value

    return value


def from_dict(cls: Type[T], data: Any, path: str = '') -> T:
    r"""Build the config dataclass `cls` from parsed JSON.

        Unknown keys, wrong types and out-of-range values raise `ConfigError` naming the dotted path of the offending
        entry. Missing keys take their defaults.

    :param cls: Type[T]. config dataclass.
    :param data: Any. parsed JSON object.
    :param path: str. dotted path of `data` inside the whole config.
    """
    if not isinstance(data, dict):
        raise ConfigError(path or '<root>', f'expected an object, got {type(data).__name__}')

    hints = get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(_join(path, key), 'unknown key')

    kwargs = {key: _convert(hints[key], value, _join(path, key)) for key, value in data.items()}
    try:
        return cls(**kwargs)
    except (ValueError, TypeError, NegativeLRError, NegativeStepError) as ex:
        raise ConfigError(path or '<root>', str(ex)) from ex


def load_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    r"""Read a JSON run configuration; defaults when `path` is None."""
    if path is None:
        return RunConfig()

    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as ex:
        raise ConfigError(str(path), f'cannot read config ({ex})') from ex

    return from_dict(RunConfig, data)


def to_dict(config: Any) -> Dict[str, Any]:
    r"""JSON-ready copy of a config tree (tuples become lists)."""
    return json.loads(json.dumps(asdict(config)))
