# coding=utf-8
# Copyright 2026 The HCE Kit Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Checkpointing of parameter stores, quantized models and prune masks.

A checkpoint is a directory:

  <dir>/arrays.msgpack        flat name -> array map (flax msgpack)
  <dir>/manifest.json         version, kind, spec, fingerprint, digest, ...
  <dir>/quant_manifest.json   quantized checkpoints only

Directories are written under a temporary name and renamed into place, so a
reader never observes a partial checkpoint.
"""

import os
from typing import Any, Dict, Mapping, Optional
import uuid

from absl import logging
from etils import epath
import flax.serialization
import jax.numpy as jnp
import numpy as np

from hcekit import checkpoint_version
from hcekit import errors
from hcekit import io_utils
from hcekit import models
from hcekit import pruner
from hcekit import quantizer

ARRAYS_FILENAME = 'arrays.msgpack'
MANIFEST_FILENAME = 'manifest.json'
QUANT_MANIFEST_FILENAME = 'quant_manifest.json'
KINDS = ('store', 'quantized', 'mask')


def is_checkpoint(directory: epath.PathLike) -> bool:
  directory = epath.Path(directory)
  return ((directory / MANIFEST_FILENAME).exists() and
          (directory / ARRAYS_FILENAME).exists())


def _write_directory(directory: epath.Path,
                     files: Mapping[str, Any]) -> epath.Path:
  """Writes `files` (name -> bytes or str) as one directory, atomically."""
  directory.parent.mkdir(parents=True, exist_ok=True)
  tmp = directory.parent / f'.tmp_{directory.name}.{uuid.uuid4().hex}'
  tmp.mkdir()
  for name, content in files.items():
    if isinstance(content, bytes):
      (tmp / name).write_bytes(content)
    else:
      (tmp / name).write_text(content)
  if directory.exists():
    directory.rmtree()
  os.replace(os.fspath(tmp), os.fspath(directory))
  return directory


def read_manifest(directory: epath.PathLike,
                  kind: Optional[str] = None) -> Dict[str, Any]:
  """Reads and checks a manifest.

  Raises:
    InputError: if the checkpoint is missing, of another kind or written by
      an incompatible version.
  """
  directory = epath.Path(directory)
  if not is_checkpoint(directory):
    raise errors.InputError(f'No checkpoint found at {directory}')
  manifest = io_utils.read_json(directory / MANIFEST_FILENAME)
  version = manifest.get(checkpoint_version.get_version_key())
  if version is None or not checkpoint_version.is_compatible(version):
    raise errors.InputError(
        f'Checkpoint {directory} has version {version}, expected '
        f'{checkpoint_version.get_version()}')
  if kind is not None and manifest.get('kind') != kind:
    raise errors.InputError(
        f'Checkpoint {directory} holds a {manifest.get("kind")!r}, expected '
        f'{kind!r}')
  return manifest


def _read_arrays(directory: epath.Path) -> Dict[str, np.ndarray]:
  restored = flax.serialization.msgpack_restore(
      (directory / ARRAYS_FILENAME).read_bytes())
  return {k: np.asarray(v) for k, v in restored.items()}


def save_store(store: models.ParameterStore,
               directory: epath.PathLike,
               *,
               kind: str = 'store',
               step: Optional[int] = None,
               extra_files: Optional[Mapping[str, Any]] = None
              ) -> epath.Path:
  """Saves a ParameterStore (including normalization statistics)."""
  directory = epath.Path(directory)
  arrays = {k: np.asarray(v) for k, v in store.entries.items()}
  manifest = {
      checkpoint_version.get_version_key(): checkpoint_version.get_version(),
      'kind': kind,
      'spec': store.spec.to_dict(),
      'fingerprint': store.fingerprint,
      'digest': store.digest(),
      'seed': store.seed,
      'step': step,
      'keys': {k: list(v.shape) for k, v in sorted(arrays.items())},
  }
  files = {
      ARRAYS_FILENAME: flax.serialization.msgpack_serialize(arrays),
      MANIFEST_FILENAME: io_utils.dumps(manifest),
  }
  files.update(extra_files or {})
  _write_directory(directory, files)
  logging.info('Saved %s checkpoint %s (digest %s) to %s', kind,
               store.fingerprint, manifest['digest'], directory)
  return directory


def restore_store(directory: epath.PathLike,
                  kind: str = 'store') -> models.ParameterStore:
  """Restores a ParameterStore, checking its shapes and content digest.

  Raises:
    InputError: on a missing, incompatible or corrupted checkpoint.
  """
  directory = epath.Path(directory)
  manifest = read_manifest(directory, kind)
  spec = models.NetworkSpec.from_dict(manifest['spec'])
  arrays = _read_arrays(directory)
  expected = models.entry_shapes(spec)
  if set(arrays) != set(expected):
    missing = sorted(set(expected) - set(arrays))
    unexpected = sorted(set(arrays) - set(expected))
    raise errors.InputError(
        f'Checkpoint {directory} does not match its architecture: missing '
        f'{missing}, unexpected {unexpected}')
  for name, shape in expected.items():
    if tuple(arrays[name].shape) != tuple(shape):
      raise errors.InputError(
          f'Checkpoint {directory}: {name} has shape {arrays[name].shape}, '
          f'expected {tuple(shape)}')
  store = models.ParameterStore(
      entries={k: jnp.asarray(v) for k, v in arrays.items()},
      spec=spec, seed=manifest.get('seed', 0))
  if store.digest() != manifest['digest']:
    raise errors.InputError(
        f'Checkpoint {directory} is corrupted: digest {store.digest()} does '
        f'not match the manifest ({manifest["digest"]})')
  return store


def save_quantized(q: quantizer.QuantizedModel,
                   directory: epath.PathLike) -> epath.Path:
  return save_store(
      q.grid_weights, directory, kind='quantized',
      extra_files={QUANT_MANIFEST_FILENAME: io_utils.dumps(q.manifest())})


def restore_quantized(directory: epath.PathLike) -> quantizer.QuantizedModel:
  """Restores model Q; its outputs match the saved model bit for bit."""
  directory = epath.Path(directory)
  grid = restore_store(directory, kind='quantized')
  meta = io_utils.read_json(directory / QUANT_MANIFEST_FILENAME)
  cfg = quantizer.QuantConfig(**meta['config']).validate()
  return quantizer.QuantizedModel(
      grid_weights=grid,
      scales={k: float(v) for k, v in meta['scales'].items()},
      zero_points={k: int(v) for k, v in meta['zero_points'].items()},
      activation_ranges={
          k: (float(lo), float(hi))
          for k, (lo, hi) in meta['activation_ranges'].items()
      },
      config=cfg)


def save_mask(mask: pruner.PruneMask, spec: models.NetworkSpec,
              directory: epath.PathLike,
              step: Optional[int] = None) -> epath.Path:
  directory = epath.Path(directory)
  arrays = mask.to_arrays()
  manifest = {
      checkpoint_version.get_version_key(): checkpoint_version.get_version(),
      'kind': 'mask',
      'granularity': mask.granularity,
      'spec': spec.to_dict(),
      'step': step,
      'keep_fractions': mask.keep_fractions(),
  }
  return _write_directory(directory, {
      ARRAYS_FILENAME: flax.serialization.msgpack_serialize(arrays),
      MANIFEST_FILENAME: io_utils.dumps(manifest),
  })


def restore_mask(directory: epath.PathLike) -> pruner.PruneMask:
  directory = epath.Path(directory)
  manifest = read_manifest(directory, 'mask')
  spec = models.NetworkSpec.from_dict(manifest['spec'])
  mask = pruner.PruneMask(
      manifest['granularity'],
      {k: v.astype(np.bool_) for k, v in _read_arrays(directory).items()})
  pruner.check_mask(spec, mask)
  return mask
