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

"""Diversity-aware distillation objective of the pruned ensemble member.

  loss(S) = alpha * CE(softmax(s_S), y)
            + (1 - alpha) * -tau^2 * mean_n sum_k p_D[k] * log p_S[k]

with p = softmax(s / tau) and p_D = p_O - p_Q, the gap between the baseline
and the quantized model. p_D is signed and each row sums to zero, so the
second term is not a true divergence; `clamp_negative` switches to the
clamped and renormalized target.
"""

import dataclasses
from typing import Any, Dict, Mapping, Tuple

import jax
import jax.numpy as jnp
import numpy as np
import optax

from hcekit import errors
from hcekit import eval_lib
from hcekit import models
from hcekit import quantizer

JTensor = jnp.ndarray
PROBABILITY_FLOOR = 1e-12


@dataclasses.dataclass(frozen=True)
class HceLossConfig:
  """Attributes: alpha weighs CE against the KL term; temperature is tau."""
  alpha: float = 0.3
  temperature: float = 4.0
  clamp_negative: bool = False

  def validate(self, prefix: str = 'loss') -> 'HceLossConfig':
    if not 0.0 <= self.alpha <= 1.0:
      raise errors.ConfigError(
          f'{prefix}.alpha must lie in [0, 1], got {self.alpha}')
    if self.temperature < 1.0:
      raise errors.ConfigError(
          f'{prefix}.temperature must be >= 1, got {self.temperature}')
    return self


def _is_concrete(x: Any) -> bool:
  return not isinstance(x, jax.core.Tracer)


def soften(scores: Any, temperature: float) -> JTensor:
  """Temperature-scaled softmax, max-subtracted for stability."""
  if temperature < 1.0:
    raise errors.ConfigError(f'temperature must be >= 1, got {temperature}')
  scores = jnp.asarray(scores)
  if _is_concrete(scores) and not bool(jnp.all(jnp.isfinite(scores))):
    raise errors.InputError('Cannot soften non-finite scores.')
  return jax.nn.softmax(scores / temperature, axis=-1)


@dataclasses.dataclass(frozen=True)
class DistillTargets:
  """Softened baseline and quantized probabilities and their difference."""
  p_o: JTensor
  p_q: JTensor

  @property
  def p_d(self) -> JTensor:
    return self.p_o - self.p_q


def clamp_and_renormalize(p_d: JTensor) -> JTensor:
  """Drops negative entries and rescales rows to sum to one (zero rows stay)."""
  clipped = jnp.maximum(p_d, 0.0)
  total = jnp.sum(clipped, axis=-1, keepdims=True)
  return jnp.where(total > 0, clipped / jnp.where(total > 0, total, 1.0), 0.0)


def make_targets(O: models.ParameterStore,  # pylint: disable=invalid-name
                 Q: quantizer.QuantizedModel,  # pylint: disable=invalid-name
                 batch: Any, temperature: float) -> DistillTargets:
  """Targets of a batch; no gradient flows back into O or Q.

  Raises:
    InputError: if O and Q do not share an architecture.
  """
  if O.fingerprint != Q.fingerprint:
    raise errors.InputError(
        f'Architecture mismatch between O ({O.fingerprint}) and Q '
        f'({Q.fingerprint})')
  inputs = batch.inputs if isinstance(batch, models.Batch) else batch
  p_o = soften(jax.lax.stop_gradient(models.forward(O, inputs)), temperature)
  p_q = soften(jax.lax.stop_gradient(quantizer.forward_quantized(Q, inputs)),
               temperature)
  return DistillTargets(jax.lax.stop_gradient(p_o), jax.lax.stop_gradient(p_q))


def precompute_targets(O: models.ParameterStore,  # pylint: disable=invalid-name
                       Q: quantizer.QuantizedModel,  # pylint: disable=invalid-name
                       images: np.ndarray,
                       temperature: float,
                       batch_size: int = 256) -> Dict[str, np.ndarray]:
  """Softened O and Q probabilities for every image, aligned by index."""
  if O.fingerprint != Q.fingerprint:
    raise errors.InputError(
        f'Architecture mismatch between O ({O.fingerprint}) and Q '
        f'({Q.fingerprint})')
  scores_o = eval_lib.predict_scores(O, images, batch_size)
  scores_q = eval_lib.predict_scores(Q, images, batch_size)
  return {
      'p_o': np.asarray(soften(scores_o, temperature)),
      'p_q': np.asarray(soften(scores_q, temperature)),
  }


def kl_term(p_d: Any, p_s: Any, temperature: float) -> JTensor:
  """-tau^2 * mean over samples of sum_k p_d[k] * log(max(p_s[k], 1e-12)).

  Raises:
    NumericError: if a floored p_s entry is still not positive (NaN input).
  """
  p_s = jnp.maximum(jnp.asarray(p_s), PROBABILITY_FLOOR)
  if _is_concrete(p_s) and not bool(jnp.all(p_s > 0)):
    raise errors.NumericError('Non-positive probability in the KL term.')
  per_sample = jnp.sum(jnp.asarray(p_d) * jnp.log(p_s), axis=-1)
  return -(temperature**2) * jnp.mean(per_sample)


def hce_loss_terms(s_scores: JTensor, labels: JTensor, targets: DistillTargets,
                   cfg: HceLossConfig) -> Tuple[JTensor, Dict[str, JTensor]]:
  """Returns (total, {'ce', 'kl', 'kl_weight'})."""
  cfg.validate()
  s_scores = jnp.asarray(s_scores)
  ce = jnp.mean(
      optax.softmax_cross_entropy_with_integer_labels(s_scores,
                                                      jnp.asarray(labels)))
  p_d = targets.p_d
  if cfg.clamp_negative:
    p_d = clamp_and_renormalize(p_d)
  kl = kl_term(p_d, soften(s_scores, cfg.temperature), cfg.temperature)
  total = cfg.alpha * ce + (1.0 - cfg.alpha) * kl
  return total, {'ce': ce, 'kl': kl,
                 'kl_weight': jnp.asarray(1.0 - cfg.alpha, ce.dtype)}


def hce_loss(s_scores: JTensor, labels: JTensor, targets: DistillTargets,
             cfg: HceLossConfig) -> JTensor:
  """alpha * CE(tau=1) + (1 - alpha) * KL term at tau."""
  return hce_loss_terms(s_scores, labels, targets, cfg)[0]


class HceObjective:
  """Trainer objective reading precomputed 'p_o' / 'p_q' from the batch."""

  def __init__(self, cfg: HceLossConfig):
    self.cfg = cfg.validate()

  def __call__(self, logits: JTensor,
               batch: Mapping[str, JTensor]) -> Tuple[JTensor, Dict[str,
                                                                     JTensor]]:
    targets = DistillTargets(batch['p_o'], batch['p_q'])
    return hce_loss_terms(logits, batch['labels'], targets, self.cfg)
