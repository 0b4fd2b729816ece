import json

import pytest
import torch

from pytorch_mpdbm.base.exception import ChecksumError, TruncatedFileError, UnsupportedVersionError
from pytorch_mpdbm.cli.checkpoint import MANIFEST, PAYLOAD, Checkpoint, load_checkpoint, read_manifest, save_checkpoint
from pytorch_mpdbm.model import ModelShape
from pytorch_mpdbm.numerics import Rng
from pytorch_mpdbm.trainer import MpConfig, MPTrainer, PcdConfig, PCDTrainer, ScheduleConfig
from tests.utils import random_tiny_params


def assert_same_params(a, b):
    for (name_a, t_a), (name_b, t_b) in zip(a.named_tensors(), b.named_tensors()):
        assert name_a == name_b
        assert torch.equal(t_a, t_b)


@pytest.fixture
def checkpoint(tiny_shape, centered_tiny_params):
    return Checkpoint(
        shape=tiny_shape,
        params=centered_tiny_params,
        epoch=3,
        rng_state=Rng(0).state,
        velocity={'visible_bias': torch.tensor([0.1, -0.2, 0.3], dtype=torch.float64)},
        extra={'method': 'mp', 'note': [1, 2]},
    )


def test_round_trip(tmp_path, checkpoint):
    save_checkpoint(tmp_path / 'ckpt', checkpoint)
    loaded = load_checkpoint(tmp_path / 'ckpt')

    assert loaded.shape == checkpoint.shape
    assert loaded.epoch == 3
    assert loaded.rng_state == checkpoint.rng_state
    assert loaded.extra == checkpoint.extra
    assert_same_params(loaded.params, checkpoint.params)
    for a, b in zip(loaded.params.offsets.groups(), checkpoint.params.offsets.groups()):
        assert torch.equal(a, b)
    assert torch.equal(loaded.velocity['visible_bias'], checkpoint.velocity['visible_bias'])


def test_uncentered_without_labels(tmp_path):
    shape = ModelShape(d=4, layer_sizes=(3,), k=0)
    params = random_tiny_params(shape, Rng(1))

    save_checkpoint(tmp_path, Checkpoint(shape=shape, params=params))
    loaded = load_checkpoint(tmp_path)

    assert loaded.params.offsets is None
    assert loaded.params.label_weight.shape == (3, 0)
    assert_same_params(loaded.params, params)


def test_deterministic_bytes(tmp_path, checkpoint):
    save_checkpoint(tmp_path / 'a', checkpoint)
    save_checkpoint(tmp_path / 'b', checkpoint)

    for name in (MANIFEST, PAYLOAD):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()

    manifest = read_manifest(tmp_path / 'a')
    assert manifest['version'] == 1
    assert list(manifest) == sorted(manifest)
    assert manifest['tensors'][0] == {'dims': [3, 2], 'length': 6, 'name': 'weights.0', 'offset': 0}


def test_unsupported_version(tmp_path, checkpoint):
    save_checkpoint(tmp_path, checkpoint)
    manifest = read_manifest(tmp_path)
    manifest['version'] = 2
    (tmp_path / MANIFEST).write_text(json.dumps(manifest))

    with pytest.raises(UnsupportedVersionError):
        load_checkpoint(tmp_path)


def test_truncated_payload(tmp_path, checkpoint):
    save_checkpoint(tmp_path, checkpoint)
    payload = (tmp_path / PAYLOAD).read_bytes()
    (tmp_path / PAYLOAD).write_bytes(payload[:-8])

    with pytest.raises(TruncatedFileError):
        load_checkpoint(tmp_path)


def test_checksum_mismatch(tmp_path, checkpoint):
    save_checkpoint(tmp_path, checkpoint)
    payload = bytearray((tmp_path / PAYLOAD).read_bytes())
    payload[5] ^= 0x01
    (tmp_path / PAYLOAD).write_bytes(bytes(payload))

    with pytest.raises(ChecksumError):
        load_checkpoint(tmp_path)


def test_restore_mp_trainer(tmp_path, patterns):
    shape = ModelShape(d=patterns.d, layer_sizes=(6,), k=patterns.n_classes)
    params = random_tiny_params(shape, Rng(0), scale=0.05)
    config = MpConfig(n_mf_iters=2, epochs=3, minibatch_size=100, n_monitor_masks=0, n_eval_iters=2)

    uninterrupted = MPTrainer(params, patterns, config, seed=4).fit()

    first = MPTrainer(params, patterns, config, seed=4)
    first.fit(epochs=1)
    save_checkpoint(tmp_path, Checkpoint.from_trainer(first, {'method': 'mp'}))

    loaded = load_checkpoint(tmp_path)
    resumed = MPTrainer(loaded.params, patterns, config, seed=4)
    loaded.restore(resumed)

    assert resumed.epoch == 1
    assert_same_params(resumed.fit(), uninterrupted)


def test_restore_pcd_trainer(tmp_path, patterns):
    shape = ModelShape(d=patterns.d, layer_sizes=(6,), k=patterns.n_classes)
    params = random_tiny_params(shape, Rng(0), scale=0.05)
    config = PcdConfig(
        learning_rate=ScheduleConfig(value=0.01), n_chains=8, epochs=2, minibatch_size=100, n_monitor_masks=0
    )

    uninterrupted = PCDTrainer(params, patterns, config, seed=4).fit()

    first = PCDTrainer(params, patterns, config, seed=4)
    first.fit(epochs=1)
    save_checkpoint(tmp_path, Checkpoint.from_trainer(first))

    loaded = load_checkpoint(tmp_path)
    assert set(loaded.buffers) == {'chains.0', 'chains.1', 'chains.2'}

    resumed = PCDTrainer(loaded.params, patterns, config, seed=4)
    loaded.restore(resumed)

    assert_same_params(resumed.fit(), uninterrupted)


def test_restore_keeps_best_validation_params(tmp_path, patterns):
    train, validation = patterns.split(100)
    shape = ModelShape(d=patterns.d, layer_sizes=(6,), k=patterns.n_classes)
    params = random_tiny_params(shape, Rng(0), scale=0.05)
    config = MpConfig(n_mf_iters=2, epochs=3, patience=5, minibatch_size=100, n_monitor_masks=0, n_eval_iters=2)

    first = MPTrainer(params, train, config, seed=4, validation=validation)
    first.fit(epochs=2)
    save_checkpoint(tmp_path, Checkpoint.from_trainer(first))

    loaded = load_checkpoint(tmp_path)
    assert {name for name in loaded.buffers if name.startswith('best.')} == {
        f'best.{name}' for name, _ in params.named_tensors()
    }

    resumed = MPTrainer(loaded.params, train, config, seed=4, validation=validation)
    loaded.restore(resumed)

    assert resumed.best_error == first.best_error
    assert_same_params(resumed.result(), first.result())
