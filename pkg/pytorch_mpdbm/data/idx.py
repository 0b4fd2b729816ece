"""IDX files (the MNIST container): big-endian magic, big-endian dimension sizes, then raw unsigned bytes."""

import gzip
from pathlib import Path
from typing import Optional, Union

import numpy as np
import torch

from pytorch_mpdbm.base.exception import BadMagicError, CountMismatchError, TruncatedFileError
from pytorch_mpdbm.data.dataset import Dataset
from pytorch_mpdbm.numerics import DTYPE

PATH = Union[str, Path]

IMAGE_MAGIC: int = 0x00000803
LABEL_MAGIC: int = 0x00000801
UBYTE_TYPE: int = 0x08
GZIP_MAGIC: bytes = b'\x1f\x8b'


def _read_bytes(path: PATH) -> bytes:
    raw: bytes = Path(path).read_bytes()
    if raw[:2] == GZIP_MAGIC:
        return gzip.decompress(raw)
    return raw


def read_idx(path: PATH, expected_magic: Optional[int] = None) -> np.ndarray:
    r"""Parse an unsigned-byte IDX file into an array shaped by its header.

    :param path: PATH. file path, plain or gzip-compressed.
    :param expected_magic: Optional[int]. magic number the file must carry.
    """
    raw: bytes = _read_bytes(path)
    if len(raw) < 4:
        raise TruncatedFileError(str(path), 'header')

    magic: int = int(np.frombuffer(raw, dtype='>u4', count=1)[0])
    if expected_magic is not None and magic != expected_magic:
        raise BadMagicError(magic, expected_magic)
    if (magic >> 8) != UBYTE_TYPE:
        raise BadMagicError(magic, expected_magic if expected_magic is not None else IMAGE_MAGIC)

    n_dims: int = magic & 0xFF
    header_size: int = 4 * (1 + n_dims)
    if len(raw) < header_size:
        raise TruncatedFileError(str(path), 'header')

    dims = tuple(int(n) for n in np.frombuffer(raw, dtype='>u4', count=n_dims, offset=4))
    n_bytes: int = int(np.prod(dims, dtype=np.int64))
    if len(raw) < header_size + n_bytes:
        raise TruncatedFileError(str(path), f'expected {n_bytes} payload bytes, got {len(raw) - header_size}')

    return np.frombuffer(raw, dtype=np.uint8, count=n_bytes, offset=header_size).reshape(dims)


def write_idx(path: PATH, array: np.ndarray) -> None:
    r"""Serialize an unsigned-byte array as IDX; the file is gzip-compressed when `path` ends with `.gz`."""
    array = np.ascontiguousarray(array, dtype=np.uint8)

    header = np.array([(UBYTE_TYPE << 8) | array.ndim, *array.shape], dtype='>u4').tobytes()
    raw: bytes = header + array.tobytes()
    if str(path).endswith('.gz'):
        raw = gzip.compress(raw, mtime=0)

    Path(path).write_bytes(raw)


def load_idx(path_images: PATH, path_labels: Optional[PATH] = None, n_classes: Optional[int] = None) -> Dataset:
    r"""Load IDX images (and labels) as a dataset with pixels scaled to [0, 1].

    :param path_images: PATH. image file, magic 0x00000803.
    :param path_labels: Optional[PATH]. label file, magic 0x00000801.
    :param n_classes: Optional[int]. number of classes, defaults to the largest label + 1.
    """
    images = read_idx(path_images, expected_magic=IMAGE_MAGIC)
    image_shape = tuple(images.shape[1:])
    v = torch.from_numpy(images.reshape(images.shape[0], -1).astype(np.float64) / 255.0).to(DTYPE)

    if path_labels is None:
        return Dataset(v=v, labels=None, n_classes=0, image_shape=image_shape)

    labels = read_idx(path_labels, expected_magic=LABEL_MAGIC)
    if labels.shape[0] != images.shape[0]:
        raise CountMismatchError(images.shape[0], labels.shape[0])

    labels = torch.from_numpy(labels.astype(np.int64))
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.numel() > 0 else 0

    return Dataset(v=v, labels=labels, n_classes=n_classes, image_shape=image_shape)
