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

"""Filter (L1) and weight (magnitude) pruning with masks and compaction.

Structured pruning only touches the first conv of each residual block. A
dropped filter zeroes that conv's output channel, the matching normalization
entries and the next conv's input-channel slice; compaction removes them.
Unstructured pruning zeroes individual weights of the block convs.
"""

import dataclasses
import math
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

from absl import logging
import jax.numpy as jnp
import numpy as np

from hcekit import errors
from hcekit import models

GRANULARITIES = ('filter', 'weight')
UNSTRUCTURED_SCOPES = ('global', 'layer')
_BN_FIELDS = ('scale', 'bias', 'mean', 'var')

# train_step(store, mask, finetune_epoch) -> store
TrainStep = Callable[[models.ParameterStore, 'PruneMask', int],
                     models.ParameterStore]


@dataclasses.dataclass(frozen=True)
class SparsitySchedule:
  """How far and in how many steps to prune.

  Attributes:
    target_keep_ratio: fraction of filters (or weights) kept at the end.
    steps: number of prune-then-finetune rounds.
    finetune_epochs_per_step: train_step invocations after each round.
    granularity: 'filter' (structured) or 'weight' (unstructured).
    unstructured_scope: 'global' magnitude threshold over all block convs or
      a per-'layer' threshold.
  """
  target_keep_ratio: float = 0.5
  steps: int = 2
  finetune_epochs_per_step: int = 1
  granularity: str = 'filter'
  unstructured_scope: str = 'global'

  def validate(self, prefix: str = 'schedule') -> 'SparsitySchedule':
    if not self.target_keep_ratio > 0.0:
      raise errors.ConfigError(
          f'{prefix}.target_keep_ratio={self.target_keep_ratio} would prune '
          'every filter; it must lie in (0, 1]')
    if self.target_keep_ratio > 1.0:
      raise errors.ConfigError(f'{prefix}.target_keep_ratio must be <= 1')
    if self.steps < 1:
      raise errors.ConfigError(f'{prefix}.steps must be >= 1')
    if self.finetune_epochs_per_step < 0:
      raise errors.ConfigError(
          f'{prefix}.finetune_epochs_per_step must be >= 0')
    if self.granularity not in GRANULARITIES:
      raise errors.ConfigError(
          f'{prefix}.granularity must be one of {GRANULARITIES}')
    if self.unstructured_scope not in UNSTRUCTURED_SCOPES:
      raise errors.ConfigError(
          f'{prefix}.unstructured_scope must be one of {UNSTRUCTURED_SCOPES}')
    return self

  def keep_ratios(self) -> List[float]:
    """Per-step keep ratios: linear, non-increasing, ending at the target."""
    self.validate()
    t = self.target_keep_ratio
    ratios = [1.0 - (1.0 - t) * i / self.steps for i in range(1, self.steps)]
    return ratios + [t]


def keep_count(ratio: float, size: int) -> int:
  """ceil(ratio * size), at least 1; guards float noise such as 0.7 * 10."""
  return max(1, math.ceil(round(ratio * size, 9)))


@dataclasses.dataclass(frozen=True)
class PruneMask:
  """Keep (True) / drop decisions.

  Filter granularity keys are prunable conv layer names with a length-F
  vector; weight granularity keys are kernel entry names with a boolean array
  of the kernel's shape.
  """
  granularity: str
  masks: Dict[str, np.ndarray]

  def kept(self, name: str) -> int:
    return int(np.sum(self.masks[name]))

  def keep_fractions(self) -> Dict[str, float]:
    return {k: float(np.mean(v)) for k, v in self.masks.items()}

  def densities(self) -> Dict[str, float]:
    """Fraction of non-zero weights per kernel entry (weight granularity)."""
    if self.granularity != 'weight':
      return {}
    return self.keep_fractions()

  def to_arrays(self) -> Dict[str, np.ndarray]:
    return {k: np.asarray(v, np.bool_) for k, v in self.masks.items()}


def full_mask(spec: models.NetworkSpec,
              granularity: str = 'filter') -> PruneMask:
  """A mask keeping everything."""
  if granularity == 'filter':
    return PruneMask('filter', {
        l.name: np.ones((l.out_channels,), np.bool_)
        for l in models.prunable_layers(spec)
    })
  shapes = models.entry_shapes(spec)
  return PruneMask('weight', {
      k: np.ones(shapes[k], np.bool_) for k in unstructured_entries(spec)
  })


def unstructured_entries(spec: models.NetworkSpec) -> List[str]:
  """Kernel entries eligible for weight pruning: every block conv."""
  return [f'{l.name}/kernel' for l in models.weighted_layers(spec)
          if l.name.startswith('stage')]


def rank_filters_l1(weights: Any) -> np.ndarray:
  """Filter indices by descending L1 norm; ties keep the lower index first."""
  w = np.asarray(weights, np.float64)
  norms = np.abs(w.reshape(w.shape[0], -1)).sum(axis=1)
  return np.argsort(-norms, kind='stable')


def filter_l1_norms(weights: Any) -> np.ndarray:
  w = np.asarray(weights, np.float64)
  return np.abs(w.reshape(w.shape[0], -1)).sum(axis=1)


def _block_of(layer: str) -> str:
  return layer.rsplit('/', 1)[0]


def check_mask(spec: models.NetworkSpec, mask: PruneMask) -> None:
  """Raises InputError naming the first layer the mask does not fit."""
  if mask.granularity == 'filter':
    plan = {l.name: l for l in models.layer_plan(spec)}
    for layer, m in mask.masks.items():
      if layer not in plan:
        raise errors.InputError(f'Mask names unknown layer {layer}')
      info = plan[layer]
      if not info.prunable:
        raise errors.InputError(
            f'Layer {layer} is not prunable: its output channels feed the '
            'residual connection, so dropping filters would break the shape '
            'of the block output added to the shortcut')
      if np.shape(m) != (info.out_channels,):
        raise errors.InputError(
            f'Mask for layer {layer} has shape {np.shape(m)}, expected '
            f'({info.out_channels},)')
      if not np.any(m):
        raise errors.InputError(f'Mask for layer {layer} keeps no filter')
  elif mask.granularity == 'weight':
    shapes = models.entry_shapes(spec)
    for name, m in mask.masks.items():
      if name not in shapes:
        raise errors.InputError(f'Mask names unknown entry {name}')
      if tuple(np.shape(m)) != tuple(shapes[name]):
        raise errors.InputError(
            f'Mask for {name} has shape {np.shape(m)}, expected '
            f'{shapes[name]}')
  else:
    raise errors.InputError(f'Unknown mask granularity {mask.granularity!r}')


def mask_multipliers(spec: models.NetworkSpec,
                     mask: PruneMask) -> Dict[str, np.ndarray]:
  """0/1 float arrays (full entry shapes) realizing `mask` on a store."""
  check_mask(spec, mask)
  shapes = models.entry_shapes(spec)
  out = {}
  if mask.granularity == 'weight':
    for name, m in mask.masks.items():
      out[name] = np.asarray(m, np.float32)
    return out
  for layer, m in mask.masks.items():
    block = _block_of(layer)
    m = np.asarray(m, np.float32)
    out[f'{layer}/kernel'] = np.broadcast_to(
        m[:, None, None, None], shapes[f'{layer}/kernel']).copy()
    for field in _BN_FIELDS:
      out[f'{block}/bn1/{field}'] = m.copy()
    out[f'{block}/conv2/kernel'] = np.broadcast_to(
        m[None, :, None, None], shapes[f'{block}/conv2/kernel']).copy()
  return out


def apply_mask(model: models.ParameterStore,
               mask: PruneMask) -> models.ParameterStore:
  """Zeroes dropped weights; kept weights are unchanged bit for bit.

  Raises:
    InputError: naming the layer whose mask does not fit the model.
  """
  spec = models.spec_from_shapes(
      model.spec, {k: v.shape for k, v in model.entries.items()})
  multipliers = mask_multipliers(spec, mask)
  entries = dict(model.entries)
  for name, mult in multipliers.items():
    entries[name] = entries[name] * jnp.asarray(mult, entries[name].dtype)
  return model.with_entries(entries)


def pruned_spec(spec: models.NetworkSpec,
                keep_ratio: float) -> models.NetworkSpec:
  """Architecture after keeping ceil(r * F) filters of every block conv1."""
  widths = tuple(keep_count(keep_ratio, w) for w in spec.internal_widths())
  return spec.replace(block_widths=widths).validate()


def compact(model: models.ParameterStore,
            mask: PruneMask) -> Tuple[models.ParameterStore, models.NetworkSpec]:
  """Physically removes dropped filters.

  Returns:
    (smaller store, its NetworkSpec with per-block widths).

  Raises:
    InputError: for weight granularity, non-prunable layers or a layer with
      no kept filter.
  """
  if mask.granularity != 'filter':
    raise errors.InputError(
        'Only filter-granularity masks can be compacted; weight pruning does '
        'not change shapes')
  check_mask(model.spec, mask)
  entries = dict(model.entries)
  widths = list(model.spec.internal_widths())
  for i, block in enumerate(models.block_names(model.spec)):
    layer = f'{block}/conv1'
    if layer not in mask.masks:
      continue
    keep = np.flatnonzero(np.asarray(mask.masks[layer]))
    entries[f'{layer}/kernel'] = jnp.asarray(entries[f'{layer}/kernel'])[keep]
    for field in _BN_FIELDS:
      name = f'{block}/bn1/{field}'
      entries[name] = jnp.asarray(entries[name])[keep]
    name = f'{block}/conv2/kernel'
    entries[name] = jnp.asarray(entries[name])[:, keep]
    widths[i] = int(keep.size)
  spec = model.spec
  if tuple(widths) != spec.internal_widths():
    spec = spec.replace(block_widths=tuple(widths)).validate()
  return models.ParameterStore(entries=entries, spec=spec,
                               seed=model.seed), spec


def _prune_filters(store: models.ParameterStore, mask: PruneMask,
                   ratio: float) -> Tuple[PruneMask, Dict[str, Any]]:
  """Keeps the ceil(ratio * F) largest-L1 filters among those still kept."""
  new_masks, log = {}, {}
  for layer, current in mask.masks.items():
    kernel = np.asarray(store.entries[f'{layer}/kernel'])
    alive = np.flatnonzero(current)
    norms = filter_l1_norms(kernel)
    count = min(keep_count(ratio, current.size), alive.size)
    order = rank_filters_l1(kernel[alive])
    kept = np.sort(alive[order[:count]])
    m = np.zeros_like(current)
    m[kept] = True
    new_masks[layer] = m
    log[layer] = {'norms': norms[alive].tolist(), 'candidates': alive.tolist(),
                  'kept': kept.tolist()}
  return PruneMask('filter', new_masks), log


def _prune_weights(store: models.ParameterStore, mask: PruneMask, ratio: float,
                   scope: str) -> Tuple[PruneMask, Dict[str, Any]]:
  """Keeps the largest-magnitude weights among those still kept."""
  mags = {
      k: np.where(m, np.abs(np.asarray(store.entries[k], np.float64)), -1.0)
      for k, m in mask.masks.items()
  }
  new_masks = {}
  if scope == 'layer':
    for k, mag in mags.items():
      count = keep_count(ratio, mag.size)
      order = np.argsort(-mag.reshape(-1), kind='stable')
      m = np.zeros(mag.size, np.bool_)
      m[order[:count]] = True
      new_masks[k] = m.reshape(mag.shape)
  else:
    names = list(mags)
    flat = np.concatenate([mags[k].reshape(-1) for k in names])
    count = keep_count(ratio, flat.size)
    order = np.argsort(-flat, kind='stable')
    keep = np.zeros(flat.size, np.bool_)
    keep[order[:count]] = True
    offset = 0
    for k in names:
      size = mags[k].size
      new_masks[k] = keep[offset:offset + size].reshape(mags[k].shape)
      offset += size
  log = {k: {'kept': int(m.sum()), 'size': int(m.size)}
         for k, m in new_masks.items()}
  return PruneMask('weight', new_masks), log


@dataclasses.dataclass
class PruneProgress:
  """State after a completed prune step, enough to resume the schedule."""
  step: int
  store: models.ParameterStore
  mask: PruneMask
  history: List[Dict[str, Any]]


def iterative_prune(
    O: models.ParameterStore,  # pylint: disable=invalid-name
    schedule: SparsitySchedule,
    train_step: TrainStep,
    *,
    resume_from: Optional[PruneProgress] = None,
    step_callback: Optional[Callable[[PruneProgress], None]] = None,
) -> Tuple[models.ParameterStore, PruneMask, List[Dict[str, Any]]]:
  """Alternates ranking, masking and fine-tuning, starting from O's weights.

  Every step re-ranks the filters that are still alive on the current
  weights, keeps ceil(r_i * F) of them, then calls `train_step`
  `schedule.finetune_epochs_per_step` times on the masked model.

  Args:
    O: the trained baseline; S starts as a copy of it.
    schedule: sparsity schedule.
    train_step: fine-tuning callback (store, mask, finetune_epoch) -> store.
    resume_from: progress of an earlier, interrupted run.
    step_callback: called with the progress after every completed step.

  Returns:
    (S, final mask, history) where history holds one record per step with
    the norms every pruning decision was based on.

  Raises:
    ConfigError: if the schedule would remove every filter.
  """
  schedule.validate()
  ratios = schedule.keep_ratios()
  if resume_from is not None:
    store, mask = resume_from.store, resume_from.mask
    history = list(resume_from.history)
    first = resume_from.step + 1
    logging.info('Resuming pruning after step %d', resume_from.step)
  else:
    store, mask = O, full_mask(O.spec, schedule.granularity)
    history, first = [], 1
  finetune_epoch = (first - 1) * schedule.finetune_epochs_per_step
  for step in range(first, schedule.steps + 1):
    ratio = ratios[step - 1]
    if schedule.granularity == 'filter':
      mask, log = _prune_filters(store, mask, ratio)
    else:
      mask, log = _prune_weights(store, mask, ratio,
                                 schedule.unstructured_scope)
    store = apply_mask(store, mask)
    logging.info('Prune step %d/%d: keep ratio %.4f', step, schedule.steps,
                 ratio)
    for _ in range(schedule.finetune_epochs_per_step):
      store = apply_mask(train_step(store, mask, finetune_epoch), mask)
      finetune_epoch += 1
    history.append({'step': step, 'keep_ratio': ratio, 'layers': log})
    if step_callback is not None:
      step_callback(PruneProgress(step, store, mask, list(history)))
  return store, mask, history
