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

"""Tests for Learners."""

from absl.testing import absltest
from absl.testing import parameterized
import jax.numpy as jnp
import numpy as np
from hcekit import learners
from hcekit import trainer_lib


class LearnersTest(parameterized.TestCase):

  def test_compute_grad_norm(self):
    grads = {'a': jnp.array([3.0, 0.0]), 'b': jnp.array([[4.0]])}
    self.assertAlmostEqual(float(learners.compute_grad_norm(grads)), 5.0)

  def test_plain_sgd_step(self):
    learner = learners.Learner(learning_rate=0.5, momentum=0.0)
    params = {'w/kernel': jnp.array([1.0, 2.0])}
    grads = {'w/kernel': jnp.array([1.0, -1.0])}
    new, _ = learner.apply_gradient(params, grads, learner.init(params))
    np.testing.assert_allclose(new['w/kernel'], [0.5, 2.5])

  @parameterized.parameters((0.5, 0.5, 1.5, 1.0), (0.0, 0.0, 1.5, 1.0),
                            (0.3, 0.4, 0.0, 10.0))
  def test_clip_gradients(self, g1a, g1b, g2, clip):
    learner = learners.Learner(learning_rate=1.0, momentum=0.0,
                               clip_gradient_norm=clip)
    params = {'a': jnp.zeros((2,)), 'b': jnp.zeros((1,))}
    grads = {'a': jnp.array([g1a, g1b]), 'b': jnp.array([g2])}
    new, _ = learner.apply_gradient(params, grads, learner.init(params))
    norm = np.linalg.norm([g1a, g1b, g2])
    factor = clip / max(norm, clip)
    np.testing.assert_allclose(new['a'], [-g1a * factor, -g1b * factor],
                               rtol=1e-6)
    np.testing.assert_allclose(new['b'], [-g2 * factor], rtol=1e-6)

  def test_weight_decay_only_touches_kernels(self):
    learner = learners.Learner(learning_rate=1.0, momentum=0.0,
                               weight_decay=0.1)
    params = {'conv/kernel': jnp.array([1.0]), 'bn/scale': jnp.array([1.0])}
    grads = {k: jnp.zeros((1,)) for k in params}
    new, _ = learner.apply_gradient(params, grads, learner.init(params))
    np.testing.assert_allclose(new['conv/kernel'], [0.9], rtol=1e-6)
    np.testing.assert_allclose(new['bn/scale'], [1.0])

  def test_multipliers_keep_pruned_entries_at_zero(self):
    learner = learners.Learner(learning_rate=0.1, momentum=0.9)
    params = {'k/kernel': jnp.array([0.0, 1.0])}
    mask = {'k/kernel': jnp.array([0.0, 1.0])}
    opt_state = learner.init(params)
    for _ in range(3):
      grads = {'k/kernel': jnp.array([5.0, 1.0])}
      params, opt_state = learner.apply_gradient(params, grads, opt_state,
                                                 mask)
    self.assertEqual(float(params['k/kernel'][0]), 0.0)
    self.assertLess(float(params['k/kernel'][1]), 1.0)

  def test_step_decay_schedule(self):
    cfg = trainer_lib.TrainingConfig(learning_rate=0.1, lr_decay_epochs=(2,),
                                     lr_decay_factor=0.1)
    learner = learners.Learner.from_config(cfg, steps_per_epoch=5)
    self.assertEqual(learner.decay_boundaries, (10,))
    self.assertAlmostEqual(float(learner.schedule(9)), 0.1)
    self.assertAlmostEqual(float(learner.schedule(10)), 0.01)


if __name__ == '__main__':
  absltest.main()
