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

"""Desk-scale datasets: Gaussian-mixture images, separable blobs, CIFAR-10.

All datasets are held in host memory as N x C x H x W float32 arrays. Batch
order depends only on (shuffle seed, epoch).
"""

import dataclasses
import hashlib
from typing import Any, Dict, Iterator, Optional, Sequence, Tuple

from absl import logging
import numpy as np

from hcekit import errors
from hcekit import models

DATASET_NAMES = ('synthetic', 'blobs', 'cifar10')

# Per-channel statistics of the CIFAR-10 training split.
_CIFAR_MEAN = np.array([0.4914, 0.4822, 0.4465], np.float32)
_CIFAR_STD = np.array([0.2470, 0.2435, 0.2616], np.float32)


@dataclasses.dataclass(frozen=True)
class DatasetConfig:
  """Where the data comes from and how much of it to use.

  Attributes:
    name: 'synthetic' (class-prototype Gaussian mixture), 'blobs' (two
      linearly separable classes) or 'cifar10'.
    path: tfds data_dir, required for 'cifar10'.
    num_classes: classes to keep (the first `num_classes` of `classes`).
    train_size: number of training samples (upper bound for cifar10).
    test_size: number of test samples (upper bound for cifar10).
    image_size: square spatial size; cifar10 is average-pooled down to it.
    channels: image channels of the synthetic datasets.
    noise: per-pixel noise standard deviation of the synthetic datasets.
    separation: prototype scale ('synthetic') or margin ('blobs').
    seed: generation seed of the synthetic datasets.
    classes: optional explicit cifar10 class ids.
  """
  name: str = 'synthetic'
  path: Optional[str] = None
  num_classes: int = 10
  train_size: int = 2000
  test_size: int = 1000
  image_size: int = 8
  channels: int = 3
  noise: float = 2.0
  separation: float = 0.5
  seed: int = 0
  classes: Optional[Tuple[int, ...]] = None

  def validate(self) -> 'DatasetConfig':
    if self.name not in DATASET_NAMES:
      raise errors.ConfigError(
          f'dataset.name must be one of {DATASET_NAMES}, got {self.name!r}')
    if self.name == 'cifar10' and not self.path:
      raise errors.ConfigError(
          'dataset.path is required for the cifar10 dataset')
    if self.name == 'blobs' and self.num_classes != 2:
      raise errors.ConfigError('dataset.num_classes must be 2 for blobs')
    if self.num_classes < 2:
      raise errors.ConfigError('dataset.num_classes must be >= 2')
    if self.train_size < 1 or self.test_size < 0:
      raise errors.ConfigError('dataset.train_size must be >= 1 and '
                               'dataset.test_size >= 0')
    if self.image_size < 1 or self.channels < 1:
      raise errors.ConfigError('dataset.image_size and dataset.channels must '
                               'be positive')
    return self

  @property
  def input_shape(self) -> Tuple[int, int, int]:
    channels = 3 if self.name == 'cifar10' else self.channels
    return (channels, self.image_size, self.image_size)


@dataclasses.dataclass
class Dataset:
  """A labeled split held in memory."""
  images: np.ndarray
  labels: np.ndarray
  num_classes: int
  name: str = ''
  metadata: Dict[str, Any] = dataclasses.field(default_factory=dict)

  def __post_init__(self):
    self.images = np.asarray(self.images, np.float32)
    self.labels = np.asarray(self.labels, np.int32)
    if self.images.ndim != 4:
      raise errors.InputError(
          f'images must be N x C x H x W, got shape {self.images.shape}')
    if self.labels.shape != (self.images.shape[0],):
      raise errors.InputError(
          f'{self.images.shape[0]} images but labels of shape '
          f'{self.labels.shape}')
    if self.labels.size and (self.labels.min() < 0 or
                             self.labels.max() >= self.num_classes):
      raise errors.InputError(
          f'labels must lie in [0, {self.num_classes})')

  def __len__(self) -> int:
    return int(self.labels.shape[0])

  @property
  def input_shape(self) -> Tuple[int, int, int]:
    return tuple(self.images.shape[1:])

  def num_distinct_labels(self) -> int:
    return int(np.unique(self.labels).size)

  def digest(self) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(self.images).tobytes())
    h.update(np.ascontiguousarray(self.labels).tobytes())
    return h.hexdigest()[:16]

  def subset(self, indices: Sequence[int]) -> 'Dataset':
    indices = np.asarray(indices, np.int64)
    return Dataset(self.images[indices], self.labels[indices],
                   self.num_classes, self.name, dict(self.metadata))

  def batch(self, indices: Sequence[int]) -> models.Batch:
    indices = np.asarray(indices, np.int64)
    return models.Batch(self.images[indices], self.labels[indices], indices)


def iterate_batches(data: Dataset,
                    batch_size: int,
                    shuffle_seed: Optional[int] = None,
                    epoch: int = 0,
                    drop_remainder: bool = False) -> Iterator[models.Batch]:
  """Yields batches; the order is a pure function of (shuffle_seed, epoch)."""
  if batch_size < 1:
    raise errors.ConfigError(f'batch_size must be >= 1, got {batch_size}')
  n = len(data)
  if shuffle_seed is None:
    order = np.arange(n)
  else:
    order = np.random.default_rng([shuffle_seed, epoch]).permutation(n)
  stop = n - (n % batch_size) if drop_remainder else n
  for start in range(0, stop, batch_size):
    yield data.batch(order[start:start + batch_size])


def _synthetic(cfg: DatasetConfig) -> Tuple[Dataset, Dataset]:
  """Class prototypes at 2x2 resolution, upsampled, plus pixel noise."""
  rng = np.random.default_rng(cfg.seed)
  c, s = cfg.channels, cfg.image_size
  coarse = max(1, min(2, s))
  prototypes = rng.normal(
      scale=cfg.separation, size=(cfg.num_classes, c, coarse, coarse))
  reps = -(-s // coarse)
  prototypes = np.repeat(np.repeat(prototypes, reps, axis=2), reps, axis=3)
  prototypes = prototypes[:, :, :s, :s]

  def draw(n):
    labels = np.arange(n) % cfg.num_classes
    rng.shuffle(labels)
    images = prototypes[labels] + rng.normal(scale=cfg.noise,
                                             size=(n, c, s, s))
    return Dataset(images, labels, cfg.num_classes, 'synthetic')

  return draw(cfg.train_size), draw(cfg.test_size)


def _blobs(cfg: DatasetConfig) -> Tuple[Dataset, Dataset]:
  """Two classes separated by a hyperplane with margin `separation`.

  The separating direction is constant over space within each channel, so the
  signal survives global average pooling.
  """
  rng = np.random.default_rng(cfg.seed)
  c, s = cfg.channels, cfg.image_size
  signs = rng.choice([-1.0, 1.0], size=(c,))
  direction = np.broadcast_to(signs[:, None, None], (c, s, s)).reshape(-1)
  direction = direction / np.linalg.norm(direction)

  def draw(n):
    labels = np.arange(n) % 2
    rng.shuffle(labels)
    x = rng.normal(scale=cfg.noise, size=(n, direction.size))
    x -= np.outer(x @ direction, direction)
    offset = cfg.separation + np.abs(rng.normal(scale=cfg.noise, size=(n,)))
    x += np.outer(np.where(labels == 1, offset, -offset), direction)
    return Dataset(x.reshape(n, c, s, s), labels, 2, 'blobs',
                   {'direction': direction.reshape(c, s, s)})

  return draw(cfg.train_size), draw(cfg.test_size)


def _downsample(images: np.ndarray, size: int) -> np.ndarray:
  n, c, h, w = images.shape
  if h == size:
    return images
  if h % size:
    raise errors.ConfigError(
        f'dataset.image_size must divide {h}, got {size}')
  f = h // size
  return images.reshape(n, c, size, f, size, f).mean(axis=(3, 5))


def _cifar10(cfg: DatasetConfig) -> Tuple[Dataset, Dataset]:
  """Reduced CIFAR-10 from tensorflow-datasets (install the `cifar` extra)."""
  try:
    import tensorflow_datasets as tfds  # pylint: disable=g-import-not-at-top
  except ImportError as e:
    raise errors.ConfigError(
        'The cifar10 dataset needs tensorflow-datasets; install '
        'hcekit[cifar].') from e
  classes = cfg.classes or tuple(range(cfg.num_classes))
  classes = tuple(classes)[:cfg.num_classes]
  remap = np.full((10,), -1, np.int64)
  remap[list(classes)] = np.arange(len(classes))

  def split(name, limit):
    images, labels = tfds.as_numpy(
        tfds.load('cifar10', split=name, data_dir=cfg.path,
                  as_supervised=True, batch_size=-1))
    keep = np.flatnonzero(remap[labels] >= 0)[:limit]
    x = images[keep].astype(np.float32) / 255.0
    x = (x - _CIFAR_MEAN) / _CIFAR_STD
    x = _downsample(np.transpose(x, (0, 3, 1, 2)), cfg.image_size)
    return Dataset(x, remap[labels[keep]], len(classes), 'cifar10')

  logging.info('Loading cifar10 classes %s from %s', classes, cfg.path)
  return split('train', cfg.train_size), split('test', cfg.test_size)


def load(cfg: DatasetConfig) -> Tuple[Dataset, Dataset]:
  """Returns the (train, test) splits described by `cfg`."""
  cfg.validate()
  loader = {'synthetic': _synthetic, 'blobs': _blobs,
            'cifar10': _cifar10}[cfg.name]
  train, test = loader(cfg)
  logging.info('Loaded %s: %d train / %d test samples, input shape %s, '
               '%d classes', cfg.name, len(train), len(test),
               train.input_shape, train.num_classes)
  return train, test
