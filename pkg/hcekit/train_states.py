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

"""TrainState class for encapsulating model weights and optimizer states."""

from __future__ import annotations

from typing import Dict

from flax import struct as flax_struct
import jax.numpy as jnp
import optax

from hcekit import models

JTensor = jnp.ndarray


class TrainState(flax_struct.PyTreeNode):
  """Simple train state.

  `params` are the gradient-trained entries of a ParameterStore and
  `model_state` the normalization running statistics.
  """

  step: JTensor
  params: Dict[str, JTensor]
  model_state: Dict[str, JTensor]
  opt_state: optax.OptState

  @classmethod
  def from_store(cls, store: models.ParameterStore,
                 opt_state: optax.OptState) -> TrainState:
    params, model_state = split_entries(store.entries)
    return cls(step=jnp.zeros((), jnp.int32), params=params,
               model_state=model_state, opt_state=opt_state)

  def new_state(self, params: Dict[str, JTensor],
                model_state: Dict[str, JTensor],
                opt_state: optax.OptState) -> TrainState:
    """Returns a new TrainState with the step advanced by one."""
    return TrainState(step=self.step + 1, params=params,
                      model_state=model_state, opt_state=opt_state)

  def entries(self) -> Dict[str, JTensor]:
    return {**self.params, **self.model_state}


def split_entries(
    entries: Dict[str, JTensor]
) -> tuple[Dict[str, JTensor], Dict[str, JTensor]]:
  """Splits entries into (trainable params, running statistics)."""
  params = {k: v for k, v in entries.items() if not models.is_statistic(k)}
  stats = {k: v for k, v in entries.items() if models.is_statistic(k)}
  return params, stats
