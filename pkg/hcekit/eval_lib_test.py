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

"""Tests for eval_lib."""

from absl.testing import absltest
import numpy as np
from hcekit import datasets
from hcekit import errors
from hcekit import eval_lib
from hcekit import models


def _data(labels):
  n = len(labels)
  return datasets.Dataset(np.zeros((n, 1, 2, 2)), labels, 3)


class EvalLibTest(absltest.TestCase):

  def test_callable_predictor(self):
    data = _data([0, 1, 2, 1])
    # Always predicts class 1.
    predictor = lambda x: np.tile([0.0, 1.0, 0.0], (x.shape[0], 1))
    result = eval_lib.evaluate(predictor, data, batch_size=3)
    self.assertEqual(result.error_set, frozenset({0, 2}))
    self.assertEqual(result.accuracy, 0.5)
    self.assertEqual(result.to_dict(), {'accuracy': 0.5, 'num_errors': 2,
                                        'num_samples': 4})

  def test_ties_pick_lowest_class(self):
    predictor = lambda x: np.zeros((x.shape[0], 3))
    labels = eval_lib.predict_labels(predictor, np.zeros((2, 1, 2, 2)))
    np.testing.assert_array_equal(labels, [0, 0])

  def test_store_predictor(self):
    spec = models.NetworkSpec(family='plain', depth=8, num_classes=3,
                              input_shape=(1, 2, 2))
    store = models.build_model(spec, 0)
    data = _data([0, 1, 2])
    scores = eval_lib.predict_scores(store, data.images, batch_size=2)
    self.assertEqual(scores.shape, (3, 3))
    np.testing.assert_allclose(scores, models.forward(store, data.images),
                               rtol=1e-5, atol=1e-6)

  def test_empty_dataset(self):
    with self.assertRaises(errors.InputError):
      eval_lib.evaluate(lambda x: x, _data([]))

  def test_not_a_predictor(self):
    with self.assertRaises(errors.InputError):
      eval_lib.scores_fn(42)


if __name__ == '__main__':
  absltest.main()
