import gzip

import numpy as np
import pytest
import torch

from pytorch_mpdbm.base.exception import BadMagicError, CountMismatchError, TruncatedFileError
from pytorch_mpdbm.data import (
    IMAGE_MAGIC,
    LABEL_MAGIC,
    Dataset,
    binarize,
    load_idx,
    make_general_queries,
    make_missing_input_queries,
    read_idx,
    synth_patterns,
    write_idx,
)
from pytorch_mpdbm.model import ModelShape
from pytorch_mpdbm.numerics import DTYPE, Rng

IMAGES: bytes = (
    b'\x00\x00\x08\x03'
    b'\x00\x00\x00\x02\x00\x00\x00\x02\x00\x00\x00\x02'
    b'\x00\xff\x80\x00'
    b'\xff\xff\x00\x7f'
)
LABELS: bytes = b'\x00\x00\x08\x01\x00\x00\x00\x02\x01\x00'


@pytest.fixture
def idx_files(tmp_path):
    path_images, path_labels = tmp_path / 'images.idx', tmp_path / 'labels.idx'
    path_images.write_bytes(IMAGES)
    path_labels.write_bytes(LABELS)
    return path_images, path_labels


def test_read_idx(idx_files):
    images = read_idx(idx_files[0], expected_magic=IMAGE_MAGIC)

    assert images.shape == (2, 2, 2)
    np.testing.assert_array_equal(images[0], [[0, 255], [128, 0]])
    np.testing.assert_array_equal(read_idx(idx_files[1], expected_magic=LABEL_MAGIC), [1, 0])


def test_load_idx(idx_files):
    dataset = load_idx(*idx_files)

    assert len(dataset) == 2
    assert dataset.d == 4
    assert dataset.n_classes == 2
    assert dataset.image_shape == (2, 2)
    torch.testing.assert_close(dataset.v[1], torch.tensor([1.0, 1.0, 0.0, 127.0 / 255.0], dtype=DTYPE))
    assert dataset.labels.tolist() == [1, 0]

    unlabeled = load_idx(idx_files[0])
    assert unlabeled.labels is None
    assert unlabeled.n_classes == 0


def test_load_idx_gzip(tmp_path, idx_files):
    path = tmp_path / 'images.idx.gz'
    path.write_bytes(gzip.compress(IMAGES))

    torch.testing.assert_close(load_idx(path).v, load_idx(idx_files[0]).v)


def test_write_idx(tmp_path):
    array = np.arange(24, dtype=np.uint8).reshape(2, 3, 4)

    for name in ('array.idx', 'array.idx.gz'):
        write_idx(tmp_path / name, array)
        np.testing.assert_array_equal(read_idx(tmp_path / name), array)

    write_idx(tmp_path / 'images.idx', np.frombuffer(IMAGES[16:], dtype=np.uint8).reshape(2, 2, 2))
    assert (tmp_path / 'images.idx').read_bytes() == IMAGES


@pytest.mark.parametrize('size', [2, 10, len(IMAGES) - 1])
def test_truncated_idx(tmp_path, size):
    path = tmp_path / 'images.idx'
    path.write_bytes(IMAGES[:size])

    with pytest.raises(TruncatedFileError):
        read_idx(path)


def test_bad_magic(tmp_path, idx_files):
    with pytest.raises(BadMagicError):
        read_idx(idx_files[1], expected_magic=IMAGE_MAGIC)

    path = tmp_path / 'floats.idx'
    path.write_bytes(b'\x00\x00\x0d\x01\x00\x00\x00\x01\x00\x00\x00\x00')
    with pytest.raises(BadMagicError):
        read_idx(path)


def test_count_mismatch(tmp_path, idx_files):
    path_labels = tmp_path / 'three_labels.idx'
    path_labels.write_bytes(b'\x00\x00\x08\x01\x00\x00\x00\x03\x01\x00\x01')

    with pytest.raises(CountMismatchError):
        load_idx(idx_files[0], path_labels)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(v=torch.zeros(4), labels=None, n_classes=0)

    with pytest.raises(ValueError):
        Dataset(v=torch.full((2, 3), 1.5), labels=None, n_classes=0)

    with pytest.raises(ValueError):
        Dataset(v=torch.zeros(2, 3), labels=torch.tensor([0]), n_classes=2)

    with pytest.raises(ValueError):
        Dataset(v=torch.zeros(2, 3), labels=torch.tensor([0, 2]), n_classes=2)


def test_dataset_split_and_subset(patterns):
    train, validation = patterns.split(100)

    assert (len(train), len(validation)) == (300, 100)
    assert torch.equal(validation.v, patterns.v[300:])
    assert torch.equal(patterns.subset([0, 5]).labels, patterns.labels[[0, 5]])

    with pytest.raises(ValueError):
        patterns.split(401)


def test_dataset_batches(patterns):
    batches = list(patterns.batches(150))

    assert [v.shape[0] for v, _ in batches] == [150, 150, 100]
    assert torch.equal(batches[0][0], patterns.v[:150])
    assert torch.equal(batches[0][1].argmax(dim=-1), patterns.labels[:150])

    shuffled = torch.cat([v for v, _ in patterns.batches(150, Rng(0))])
    again = torch.cat([v for v, _ in patterns.batches(150, Rng(0))])
    assert torch.equal(shuffled, again)
    assert not torch.equal(shuffled, patterns.v)
    assert torch.equal(shuffled.sum(dim=0), patterns.v.sum(dim=0))


def test_binarize():
    dataset = Dataset(v=torch.tensor([[0.0, 0.49, 0.5, 1.0]]), labels=None, n_classes=0)

    assert binarize(dataset).v.tolist() == [[0.0, 0.0, 1.0, 1.0]]
    assert binarize(dataset, threshold=0.4).v.tolist() == [[0.0, 1.0, 1.0, 1.0]]

    stochastic = binarize(dataset, mode='stochastic', seed=3)
    assert stochastic.is_binary
    assert stochastic.v[0, 0] == 0.0
    assert stochastic.v[0, 3] == 1.0
    assert torch.equal(stochastic.v, binarize(dataset, mode='stochastic', seed=3).v)

    with pytest.raises(ValueError):
        binarize(dataset, mode='otsu')


def test_synth_patterns(patterns):
    assert patterns.is_binary
    assert patterns.prototypes.shape == (4, 16)
    assert len({tuple(p.tolist()) for p in patterns.prototypes}) == 4
    assert patterns.labels[:6].tolist() == [0, 1, 2, 3, 0, 1]

    flips = (patterns.v - patterns.prototypes[patterns.labels]).abs().mean()
    assert float(flips) == pytest.approx(0.05, abs=0.01)

    noiseless = synth_patterns(n_classes=3, d=8, noise_rate=0.0, n_examples=9, seed=1)
    assert torch.equal(noiseless.v, noiseless.prototypes[noiseless.labels])

    with pytest.raises(ValueError):
        synth_patterns(n_classes=5, d=2, noise_rate=0.1, n_examples=10)


def test_missing_input_queries(patterns):
    queries = make_missing_input_queries(patterns, fraction_missing=0.25, seed=0)

    assert len(queries) == len(patterns)
    assert (queries.mask.visible.sum(dim=-1) == 12).all()
    assert not queries.mask.label.any()

    observed = make_missing_input_queries(patterns, fraction_missing=0.0)
    assert observed.mask.visible.all()


def test_general_queries(patterns):
    queries = make_general_queries(patterns, size=3, seed=0)

    assert (queries.mask.n_targets(ModelShape(d=patterns.d, layer_sizes=(1,), k=patterns.n_classes)) == 3).all()
    assert torch.equal(queries.mask.visible, make_general_queries(patterns, size=3, seed=0).mask.visible)

    with pytest.raises(ValueError):
        make_general_queries(patterns, size=0)

    with pytest.raises(ValueError):
        make_general_queries(patterns, size=17)
