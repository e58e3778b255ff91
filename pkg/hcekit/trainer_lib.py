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

"""Shared training loop: baseline training and masked fine-tuning."""

import dataclasses
import math
from typing import Callable, Dict, Mapping, Optional, Tuple

from absl import logging
import jax
import jax.numpy as jnp
import numpy as np
import optax

from hcekit import datasets
from hcekit import errors
from hcekit import eval_lib
from hcekit import learners
from hcekit import metric_utils
from hcekit import models
from hcekit import train_states

JTensor = jnp.ndarray
# (logits, batch) -> (scalar loss, aux scalars). `batch` holds 'labels' plus
# any per-sample extras gathered for the batch.
Objective = Callable[[JTensor, Mapping[str, JTensor]],
                     Tuple[JTensor, Dict[str, JTensor]]]


@dataclasses.dataclass(frozen=True)
class TrainingConfig:
  """Optimization hyperparameters; defaults are chosen for the toy tasks."""
  epochs: int = 10
  batch_size: int = 64
  learning_rate: float = 0.05
  momentum: float = 0.9
  nesterov: bool = False
  weight_decay: float = 5e-4
  lr_decay_epochs: Tuple[int, ...] = ()
  lr_decay_factor: float = 0.1
  clip_gradient_norm: float = 0.0
  eval_batch_size: int = 256

  def validate(self, prefix: str = 'training') -> 'TrainingConfig':
    if self.epochs < 0:
      raise errors.ConfigError(f'{prefix}.epochs must be >= 0')
    if self.batch_size < 1 or self.eval_batch_size < 1:
      raise errors.ConfigError(
          f'{prefix}.batch_size and {prefix}.eval_batch_size must be >= 1')
    if self.learning_rate <= 0:
      raise errors.ConfigError(f'{prefix}.learning_rate must be positive')
    if not 0.0 <= self.momentum < 1.0:
      raise errors.ConfigError(f'{prefix}.momentum must lie in [0, 1)')
    if self.weight_decay < 0:
      raise errors.ConfigError(f'{prefix}.weight_decay must be >= 0')
    return self


def cross_entropy(logits: JTensor, labels: JTensor) -> JTensor:
  """Mean negative log-likelihood of the true labels."""
  return jnp.mean(
      optax.softmax_cross_entropy_with_integer_labels(logits, labels))


def cross_entropy_objective(
    logits: JTensor,
    batch: Mapping[str, JTensor]) -> Tuple[JTensor, Dict[str, JTensor]]:
  ce = cross_entropy(logits, batch['labels'])
  zero = jnp.zeros((), ce.dtype)
  return ce, {'ce': ce, 'kl': zero, 'kl_weight': zero}


class Trainer:
  """Runs epochs of jitted SGD steps over a ParameterStore's entries.

  Attributes:
    spec: architecture being trained.
    config: optimization hyperparameters.
    objective: loss over (logits, batch).
    seed: shuffling seed; batch order is a function of (seed, epoch).
    stage: label attached to metric records.
  """

  def __init__(self,
               spec: models.NetworkSpec,
               config: TrainingConfig,
               num_samples: int,
               objective: Objective = cross_entropy_objective,
               *,
               seed: int = 0,
               stage: str = 'baseline',
               metrics_writer: Optional[metric_utils.MetricsWriter] = None):
    self.spec = spec
    self.config = config.validate()
    self.objective = objective
    self.seed = seed
    self.stage = stage
    self.metrics_writer = metrics_writer
    self.steps_per_epoch = max(1, math.ceil(num_samples / config.batch_size))
    self.learner = learners.Learner.from_config(config, self.steps_per_epoch)
    self._step_fn = jax.jit(self._train_step)

  def init_state(self, store: models.ParameterStore) -> train_states.TrainState:
    params, _ = train_states.split_entries(store.entries)
    return train_states.TrainState.from_store(store, self.learner.init(params))

  def _train_step(self, state: train_states.TrainState, inputs: JTensor,
                  batch: Dict[str, JTensor],
                  multipliers: Dict[str, JTensor]):
    def loss_fn(params):
      entries = {**params, **state.model_state}
      logits, new_stats, _ = models.apply_network(
          entries, inputs, spec=self.spec, train=True)
      loss, aux = self.objective(logits, batch)
      return loss, (aux, new_stats, logits)

    (loss, (aux, new_stats, logits)), grads = jax.value_and_grad(
        loss_fn, has_aux=True)(state.params)
    params, opt_state = self.learner.apply_gradient(
        state.params, grads, state.opt_state, multipliers)
    new_stats = {
        k: v * multipliers[k] if k in multipliers else v
        for k, v in new_stats.items()
    }
    correct = jnp.sum(jnp.argmax(logits, axis=-1) == batch['labels'])
    grad_norm = learners.compute_grad_norm(grads)
    return (state.new_state(params, new_stats, opt_state), loss, aux, correct,
            grad_norm)

  def train_epoch(
      self,
      state: train_states.TrainState,
      data: datasets.Dataset,
      epoch: int,
      multipliers: Optional[Mapping[str, JTensor]] = None,
      extras: Optional[Mapping[str, np.ndarray]] = None,
  ) -> Tuple[train_states.TrainState, Dict[str, float]]:
    """Runs one pass over `data`.

    Args:
      state: current train state.
      data: training split.
      epoch: global epoch index; selects the shuffle order.
      multipliers: 0/1 masks keeping pruned entries at zero.
      extras: per-sample arrays aligned with `data` (e.g. distillation
        targets), gathered by batch indices.

    Returns:
      (new state, epoch summary).

    Raises:
      NumericError: if a loss becomes non-finite.
    """
    multipliers = dict(multipliers or {})
    totals = {'ce': 0.0, 'kl': 0.0, 'total': 0.0}
    correct, seen = 0, 0
    for batch_index, batch in enumerate(
        datasets.iterate_batches(data, self.config.batch_size, self.seed,
                                 epoch)):
      batch_dict = {'labels': jnp.asarray(batch.labels)}
      for name, values in (extras or {}).items():
        batch_dict[name] = jnp.asarray(values[batch.indices])
      step = int(state.step)
      state, loss, aux, batch_correct, grad_norm = self._step_fn(
          state, jnp.asarray(batch.inputs), batch_dict, multipliers)
      loss = float(loss)
      if not np.isfinite(loss):
        raise errors.NumericError(
            f'Non-finite loss {loss} in stage {self.stage}', epoch=epoch,
            batch_index=batch_index)
      n = len(batch)
      seen += n
      correct += int(batch_correct)
      totals['total'] += loss * n
      totals['ce'] += float(aux['ce']) * n
      totals['kl'] += float(aux['kl']) * n
      if self.metrics_writer is not None:
        self.metrics_writer.write(
            self.stage, step, epoch=epoch, batch=batch_index, total=loss,
            ce=aux['ce'], kl=aux['kl'], kl_weight=aux['kl_weight'],
            grad_norm=grad_norm,
            learning_rate=self.learner.schedule(state.step - 1))
    summary = {k: v / max(seen, 1) for k, v in totals.items()}
    summary['train_accuracy'] = correct / max(seen, 1)
    if self.metrics_writer is not None:
      self.metrics_writer.write(
          self.stage, int(state.step), epoch=epoch, event='epoch_end',
          **summary)
    logging.info('[%s] epoch %d: loss=%.4f ce=%.4f kl=%.4f acc=%.4f',
                 self.stage, epoch, summary['total'], summary['ce'],
                 summary['kl'], summary['train_accuracy'])
    return state, summary

  def to_store(self, state: train_states.TrainState,
               template: models.ParameterStore) -> models.ParameterStore:
    """Writes the state's entries back into a store shaped like `template`."""
    entries = state.entries()
    return template.with_entries({k: entries[k] for k in template.entries})


def train_baseline(spec: models.NetworkSpec,
                   data: datasets.Dataset,
                   hyper: TrainingConfig,
                   *,
                   seed: int = 0,
                   metrics_writer: Optional[metric_utils.MetricsWriter] = None,
                   init: Optional[models.ParameterStore] = None
                  ) -> models.ParameterStore:
  """Trains the full-precision, full-size model O.

  Args:
    spec: architecture of O.
    data: training split; needs at least `spec.num_classes` distinct labels.
    hyper: optimization hyperparameters; zero epochs returns the
      initialization unchanged.
    seed: initialization and shuffle seed.
    metrics_writer: optional sink of per-step records (stage 'baseline').
    init: optional starting point instead of `build_model(spec, seed)`.

  Returns:
    The trained ParameterStore.

  Raises:
    InputError: if the data does not fit `spec`.
    NumericError: if the loss diverges.
  """
  spec.validate()
  hyper.validate()
  if data.input_shape != spec.input_shape:
    raise errors.InputError(
        f'Dataset input shape {data.input_shape} does not match network '
        f'input shape {spec.input_shape}')
  if data.num_distinct_labels() < spec.num_classes:
    raise errors.InputError(
        f'Training data has {data.num_distinct_labels()} distinct labels, '
        f'need at least num_classes={spec.num_classes}')
  store = init if init is not None else models.build_model(spec, seed)
  if hyper.epochs == 0:
    logging.info('Zero training epochs: returning the initialization.')
    return store
  trainer = Trainer(spec, hyper, len(data), seed=seed, stage='baseline',
                    metrics_writer=metrics_writer)
  state = trainer.init_state(store)
  for epoch in range(hyper.epochs):
    state, _ = trainer.train_epoch(state, data, epoch)
  store = trainer.to_store(state, store)
  accuracy = eval_lib.evaluate(store, data, hyper.eval_batch_size).accuracy
  chance = 1.0 / spec.num_classes
  logging.info('Baseline training accuracy %.4f (chance %.4f)', accuracy,
               chance)
  if accuracy <= chance:
    logging.warning('Baseline training accuracy %.4f is not above chance '
                    'level %.4f', accuracy, chance)
  if metrics_writer is not None:
    metrics_writer.write('baseline', int(state.step), event='final',
                         train_accuracy=accuracy)
  return store
