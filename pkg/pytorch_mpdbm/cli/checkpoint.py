"""Checkpoints: a JSON manifest next to a payload of little-endian float64 values.

The manifest holds the format version, the model shape, an index of every tensor (name, dims, byte offset, number of
values), the SHA-256 of the payload, the epoch, the random state and free-form JSON extras.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import torch

from pytorch_mpdbm.base.exception import ChecksumError, TruncatedFileError, UnsupportedVersionError
from pytorch_mpdbm.model.dbm import ModelShape, Offsets, Params
from pytorch_mpdbm.numerics import DTYPE
from pytorch_mpdbm.trainer.base import BaseTrainer

PATH = Union[str, Path]

VERSION: int = 1
MANIFEST: str = 'manifest.json'
PAYLOAD: str = 'payload.bin'
ITEM_SIZE: int = 8


@dataclass
class Checkpoint:
    r"""Model parameters plus everything a trainer needs to resume.

    :param shape: ModelShape. model shape.
    :param params: Params. model parameters (with centering offsets when the model is centered).
    :param epoch: int. completed epochs.
    :param rng_state: Optional[Dict]. state of the run's random stream.
    :param velocity: Dict[str, torch.Tensor]. optimizer velocities by parameter name.
    :param buffers: Dict[str, torch.Tensor]. other tensors (persistent chains).
    :param extra: Dict[str, Any]. JSON-serializable extras (config, schedules, early stopping).
    """

    shape: ModelShape
    params: Params
    epoch: int = 0
    rng_state: Optional[Dict[str, Any]] = None
    velocity: Dict[str, torch.Tensor] = field(default_factory=dict)
    buffers: Dict[str, torch.Tensor] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)

    def named_tensors(self) -> List:
        named = list(self.params.named_tensors())
        if self.params.offsets is not None:
            named.extend(self.params.offsets.named_tensors())
        named.extend((f'velocity.{name}', t) for name, t in sorted(self.velocity.items()))
        named.extend((f'buffers.{name}', t) for name, t in sorted(self.buffers.items()))
        return named

    @classmethod
    def from_trainer(cls, trainer: BaseTrainer, extra: Optional[Dict[str, Any]] = None) -> 'Checkpoint':
        r"""Snapshot a trainer between epochs."""
        state = trainer.state_dict()

        buffers: Dict[str, torch.Tensor] = {}
        trainer_extra: Dict[str, Any] = {
            'lr_scheduler': state['lr_scheduler'],
            'momentum_scheduler': state['momentum_scheduler'],
            'early_stopping': state['early_stopping'],
        }
        if 'chains' in state:
            buffers.update(state['chains']['state'])
            trainer_extra['chains_rng_state'] = state['chains']['rng_state']
        if state.get('best_params') is not None:
            buffers.update({f'best.{name}': t for name, t in state['best_params'].items()})

        return cls(
            shape=trainer.params.shape,
            params=trainer.params.clone(),
            epoch=state['epoch'],
            rng_state=state['rng_state'],
            velocity=state['velocity'],
            buffers=buffers,
            extra={**(extra or {}), 'trainer': trainer_extra},
        )

    def restore(self, trainer: BaseTrainer) -> None:
        r"""Load the resumable state into a trainer built from `self.params` and the same config."""
        trainer_extra = self.extra['trainer']
        state: Dict[str, Any] = {
            'epoch': self.epoch,
            'rng_state': self.rng_state,
            'velocity': self.velocity,
            'lr_scheduler': trainer_extra['lr_scheduler'],
            'momentum_scheduler': trainer_extra['momentum_scheduler'],
            'early_stopping': trainer_extra['early_stopping'],
        }
        if 'chains_rng_state' in trainer_extra:
            chains = {name: t for name, t in self.buffers.items() if name.startswith('chains.')}
            state['chains'] = {'state': chains, 'rng_state': trainer_extra['chains_rng_state']}
        best = {name[len('best.'):]: t for name, t in self.buffers.items() if name.startswith('best.')}
        state['best_params'] = best or None

        trainer.load_state_dict(state)


def _replace(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + '.tmp')
    tmp.write_bytes(data)
    os.replace(tmp, path)


def save_checkpoint(path: PATH, checkpoint: Checkpoint) -> None:
    r"""Write `checkpoint` into the directory `path` (created when missing)."""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)

    index: List[Dict[str, Any]] = []
    chunks: List[bytes] = []
    offset: int = 0
    for name, tensor in checkpoint.named_tensors():
        values = tensor.detach().to(DTYPE).contiguous().numpy().astype('<f8', copy=False)
        raw: bytes = values.tobytes(order='C')
        index.append({'name': name, 'dims': list(tensor.shape), 'offset': offset, 'length': int(values.size)})
        chunks.append(raw)
        offset += len(raw)

    payload: bytes = b''.join(chunks)
    manifest: Dict[str, Any] = {
        'version': VERSION,
        'shape': checkpoint.shape.to_dict(),
        'tensors': index,
        'sha256': hashlib.sha256(payload).hexdigest(),
        'epoch': checkpoint.epoch,
        'rng_state': checkpoint.rng_state,
        'extra': checkpoint.extra,
    }

    _replace(directory / PAYLOAD, payload)
    _replace(directory / MANIFEST, (json.dumps(manifest, sort_keys=True, indent=2) + '\n').encode('utf-8'))


def _read_tensor(payload: bytes, entry: Dict[str, Any]) -> torch.Tensor:
    if entry['length'] == 0:
        return torch.zeros(entry['dims'], dtype=DTYPE)
    values = np.frombuffer(payload, dtype='<f8', count=entry['length'], offset=entry['offset'])
    return torch.from_numpy(values.astype(np.float64).reshape(entry['dims']))


def read_manifest(path: PATH) -> Dict[str, Any]:
    return json.loads((Path(path) / MANIFEST).read_text(encoding='utf-8'))


def load_checkpoint(path: PATH) -> Checkpoint:
    r"""Read a checkpoint directory written by `save_checkpoint`.

        Raises `UnsupportedVersionError` for an unknown format version, `TruncatedFileError` when the payload is
        shorter than its index says, and `ChecksumError` when the payload bytes were altered.
    """
    directory = Path(path)
    manifest = read_manifest(directory)

    version = manifest.get('version')
    if version != VERSION:
        raise UnsupportedVersionError(version, VERSION)

    payload: bytes = (directory / PAYLOAD).read_bytes()
    expected_size: int = max((t['offset'] + ITEM_SIZE * t['length'] for t in manifest['tensors']), default=0)
    if len(payload) < expected_size:
        raise TruncatedFileError(str(directory / PAYLOAD), f'expected {expected_size} bytes, got {len(payload)}')

    digest: str = hashlib.sha256(payload).hexdigest()
    if digest != manifest['sha256']:
        raise ChecksumError(manifest['sha256'], digest)

    tensors: Dict[str, torch.Tensor] = {t['name']: _read_tensor(payload, t) for t in manifest['tensors']}

    offsets = None
    if 'offsets.visible' in tensors:
        offsets = Offsets.from_named({name: t for name, t in tensors.items() if name.startswith('offsets.')})

    params = Params.from_named(
        {name: t for name, t in tensors.items() if not name.startswith(('offsets.', 'velocity.', 'buffers.'))},
        offsets=offsets,
    )

    return Checkpoint(
        shape=ModelShape.from_dict(manifest['shape']),
        params=params,
        epoch=int(manifest['epoch']),
        rng_state=manifest['rng_state'],
        velocity={name[len('velocity.'):]: t for name, t in tensors.items() if name.startswith('velocity.')},
        buffers={name[len('buffers.'):]: t for name, t in tensors.items() if name.startswith('buffers.')},
        extra=manifest['extra'],
    )
