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

"""Evaluation of any predictor: stores, quantized models and ensembles.

A predictor is a ParameterStore, any object with a `scores(inputs)` method
(QuantizedModel, Ensemble) or a plain callable mapping inputs to N x K
scores.
"""

import dataclasses
from typing import Any, FrozenSet

import jax.numpy as jnp
import numpy as np

from hcekit import datasets
from hcekit import errors
from hcekit import models


@dataclasses.dataclass(frozen=True)
class EvalResult:
  accuracy: float
  error_set: FrozenSet[int]
  num_samples: int

  def to_dict(self):
    return {'accuracy': self.accuracy, 'num_errors': len(self.error_set),
            'num_samples': self.num_samples}


def scores_fn(model: Any):
  """Returns inputs -> scores for a predictor."""
  if isinstance(model, models.ParameterStore):
    return lambda inputs: models.forward(model, inputs)
  if hasattr(model, 'scores'):
    return model.scores
  if callable(model):
    return model
  raise errors.InputError(f'Not a predictor: {type(model).__name__}')


def predict_scores(model: Any, images: np.ndarray,
                   batch_size: int = 256) -> np.ndarray:
  """Scores for every image, computed in batches, as a host array."""
  fn = scores_fn(model)
  out = []
  for start in range(0, images.shape[0], batch_size):
    out.append(np.asarray(fn(jnp.asarray(images[start:start + batch_size]))))
  if not out:
    raise errors.InputError('Cannot score an empty set of inputs.')
  return np.concatenate(out, axis=0)


def predict_labels(model: Any, images: np.ndarray,
                   batch_size: int = 256) -> np.ndarray:
  # np.argmax returns the lowest index among ties.
  return np.argmax(predict_scores(model, images, batch_size), axis=-1)


def result_from_predictions(predictions: np.ndarray,
                            labels: np.ndarray) -> EvalResult:
  n = int(labels.shape[0])
  if n == 0:
    raise errors.InputError('Cannot evaluate on an empty dataset.')
  wrong = frozenset(int(i) for i in np.flatnonzero(predictions != labels))
  return EvalResult(accuracy=1.0 - len(wrong) / n, error_set=wrong,
                    num_samples=n)


def evaluate(model: Any, data: datasets.Dataset,
             batch_size: int = 256) -> EvalResult:
  """Accuracy and the set of misclassified sample indices.

  accuracy is computed as 1 - |error_set| / N so the two always agree.

  Raises:
    InputError: on an empty dataset or inputs that do not fit the model.
  """
  if len(data) == 0:
    raise errors.InputError('Cannot evaluate on an empty dataset.')
  return result_from_predictions(
      predict_labels(model, data.images, batch_size), data.labels)
