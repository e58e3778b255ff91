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

"""Learner: the optax gradient transformation applied to a parameter map."""

from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import jax
import jax.numpy as jnp
import optax

from hcekit import models

JTensor = jnp.ndarray
Params = Dict[str, JTensor]


def compute_grad_norm(grads: Mapping[str, JTensor]) -> JTensor:
  """Computes the total gradient norm."""
  squared = jax.tree_util.tree_leaves(
      jax.tree_util.tree_map(lambda x: jnp.sum(x * x), grads))
  return jnp.sqrt(jnp.sum(jnp.stack(squared)))


class Learner:
  """Momentum SGD with step decay, weight decay on kernels and clipping.

  Example client code:

    learner = Learner(learning_rate=0.1, decay_boundaries=(100, 200))
    opt_state = learner.init(params)
    params, opt_state = learner.apply_gradient(params, grads, opt_state)

  Attributes:
    learning_rate: initial learning rate.
    momentum: momentum coefficient; 0 disables momentum.
    nesterov: use Nesterov momentum.
    weight_decay: L2 coefficient applied to conv and dense kernels only.
    decay_boundaries: optimizer steps at which the rate is multiplied by
      `decay_factor`.
    decay_factor: step-decay multiplier.
    clip_gradient_norm: if positive, clip gradients to this global norm.
  """

  def __init__(self,
               learning_rate: float = 0.1,
               momentum: float = 0.9,
               nesterov: bool = False,
               weight_decay: float = 0.0,
               decay_boundaries: Sequence[int] = (),
               decay_factor: float = 0.1,
               clip_gradient_norm: float = 0.0):
    self.learning_rate = learning_rate
    self.momentum = momentum
    self.nesterov = nesterov
    self.weight_decay = weight_decay
    self.decay_boundaries = tuple(int(b) for b in decay_boundaries)
    self.decay_factor = decay_factor
    self.clip_gradient_norm = clip_gradient_norm
    self.schedule = optax.piecewise_constant_schedule(
        learning_rate, {b: decay_factor for b in self.decay_boundaries})
    self._grad_tx = self.get_grad_tx()

  @classmethod
  def from_config(cls, cfg: Any, steps_per_epoch: int) -> 'Learner':
    """Builds a learner from a `trainer_lib.TrainingConfig`."""
    return cls(
        learning_rate=cfg.learning_rate,
        momentum=cfg.momentum,
        nesterov=cfg.nesterov,
        weight_decay=cfg.weight_decay,
        decay_boundaries=[e * steps_per_epoch for e in cfg.lr_decay_epochs],
        decay_factor=cfg.lr_decay_factor,
        clip_gradient_norm=cfg.clip_gradient_norm)

  def get_grad_tx(self) -> optax.GradientTransformation:
    chain = []
    if self.clip_gradient_norm > 0:
      chain.append(optax.clip_by_global_norm(self.clip_gradient_norm))
    if self.weight_decay > 0:
      chain.append(
          optax.masked(
              optax.add_decayed_weights(self.weight_decay),
              lambda params: {k: models.is_kernel(k) for k in params}))
    chain.append(
        optax.sgd(self.schedule, momentum=self.momentum or None,
                  nesterov=self.nesterov))
    return optax.chain(*chain)

  def init(self, params: Params) -> optax.OptState:
    return self._grad_tx.init(params)

  def apply_gradient(
      self,
      params: Params,
      grads: Params,
      opt_state: optax.OptState,
      multipliers: Optional[Mapping[str, JTensor]] = None,
  ) -> Tuple[Params, optax.OptState]:
    """Applies one optimizer update.

    Args:
      params: trainable parameters.
      grads: gradients with the same structure.
      opt_state: optimizer state from `init` or a previous update.
      multipliers: optional 0/1 arrays; listed gradients and parameters are
        multiplied by them so that pruned weights stay exactly zero.

    Returns:
      (updated params, updated optimizer state).
    """
    if multipliers:
      grads = {
          k: g * multipliers[k] if k in multipliers else g
          for k, g in grads.items()
      }
    updates, opt_state = self._grad_tx.update(grads, opt_state, params)
    params = optax.apply_updates(params, updates)
    if multipliers:
      params = {
          k: p * multipliers[k] if k in multipliers else p
          for k, p in params.items()
      }
    return params, opt_state
