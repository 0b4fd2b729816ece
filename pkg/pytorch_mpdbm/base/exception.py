from typing import Sequence


class NegativeLRError(Exception):
    """Raised when learning rate is negative."""

    def __init__(self, lr: float, lr_type: str = ''):
        self.note: str = lr_type if lr_type else 'learning rate'
        self.message: str = f'{self.note} must be positive. ({lr} > 0)'
        super().__init__(self.message)


class NegativeStepError(Exception):
    """Raised when step (or iteration count) is not positive."""

    def __init__(self, num_steps: int, step_type: str = ''):
        self.note: str = step_type if step_type else 'step'
        self.message: str = f'{self.note} must be positive. ({num_steps} > 0)'
        super().__init__(self.message)


class NoSparseGradientError(Exception):
    """Raised when the gradient is sparse gradient.

    :param optimizer_name: str. optimizer name.
    :param note: str. special conditions to note (default '').
    """

    def __init__(self, optimizer_name: str, note: str = ''):
        self.note: str = ' ' if not note else f' w/ {note} '
        self.message: str = f'{optimizer_name}{self.note}does not support sparse gradient.'
        super().__init__(self.message)


class DimensionMismatchError(Exception):
    """Raised when the operands of a kernel have incompatible shapes.

    :param op: str. name of the operation.
    :param shape_a: Sequence[int]. shape of the first operand.
    :param shape_b: Sequence[int]. shape of the second operand.
    """

    def __init__(self, op: str, shape_a: Sequence[int], shape_b: Sequence[int]):
        self.message: str = f'{op}: dimension mismatch between {tuple(shape_a)} and {tuple(shape_b)}'
        super().__init__(self.message)


class EmptyInputError(Exception):
    """Raised when a reduction receives no elements."""

    def __init__(self, op: str = ''):
        self.note: str = f'{op}: ' if op else ''
        self.message: str = f'{self.note}empty input'
        super().__init__(self.message)


class InvalidProbabilityError(Exception):
    """Raised when a probability lies outside of [0, 1]."""

    def __init__(self, p: float):
        self.message: str = f'probability must be in the range [0, 1]. got {p}'
        super().__init__(self.message)


class EnumerationBoundError(Exception):
    """Raised when an exact computation would enumerate more states than allowed.

    :param n_units: int. number of units that have to be enumerated.
    :param bound: int. maximum number of enumerable units.
    """

    def __init__(self, n_units: int, bound: int):
        self.message: str = f'enumeration bound exceeded. ({n_units} units > {bound})'
        super().__init__(self.message)


class NoValidMaskError(Exception):
    """Raised when mask sampling cannot produce a mask with both inputs and targets."""

    def __init__(self, n_trials: int):
        self.message: str = f'no valid mask after {n_trials} rejections'
        super().__init__(self.message)


class NonFiniteGradientError(Exception):
    """Raised when a gradient tensor contains NaN or Inf.

    :param name: str. name of the parameter tensor.
    """

    def __init__(self, name: str):
        self.name = name
        self.message: str = f'non-finite gradient in {name}'
        super().__init__(self.message)


class NonFiniteLossError(Exception):
    """Raised when the training loss becomes NaN or Inf."""

    def __init__(self, epoch: int, loss: float):
        self.message: str = f'non-finite loss {loss} at epoch {epoch}'
        super().__init__(self.message)


class BadMagicError(Exception):
    """Raised when an IDX file carries an unexpected magic number."""

    def __init__(self, magic: int, expected: int):
        self.message: str = f'bad magic number 0x{magic:08x} (expected 0x{expected:08x})'
        super().__init__(self.message)


class TruncatedFileError(Exception):
    """Raised when a file ends before its header says it should."""

    def __init__(self, path: str, note: str = ''):
        self.note: str = f' ({note})' if note else ''
        self.message: str = f'{path} is truncated{self.note}'
        super().__init__(self.message)


class CountMismatchError(Exception):
    """Raised when image and label files disagree on the number of items."""

    def __init__(self, n_images: int, n_labels: int):
        self.message: str = f'image/label count mismatch. ({n_images} != {n_labels})'
        super().__init__(self.message)


class UnsupportedVersionError(Exception):
    """Raised when a checkpoint was written by an unknown format version."""

    def __init__(self, version: int, supported: int):
        self.message: str = f'unsupported version {version} (supported: {supported})'
        super().__init__(self.message)


class ChecksumError(Exception):
    """Raised when the checkpoint payload does not match its recorded checksum."""

    def __init__(self, expected: str, actual: str):
        self.message: str = f'checksum mismatch. expected {expected}, got {actual}'
        super().__init__(self.message)


class ConfigError(Exception):
    """Raised when a run configuration does not validate.

    :param path: str. dotted path of the offending key.
    :param note: str. what is wrong with it.
    """

    def __init__(self, path: str, note: str):
        self.path = path
        self.message: str = f'{path}: {note}'
        super().__init__(self.message)
