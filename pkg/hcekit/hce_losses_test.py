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

"""Tests for hce_losses."""

import itertools

from absl.testing import absltest
from absl.testing import parameterized
import jax
import jax.numpy as jnp
import numpy as np
import optax
from hcekit import errors
from hcekit import hce_losses
from hcekit import models
from hcekit import quantizer

SPEC = models.NetworkSpec(family='plain', depth=8, num_classes=5,
                          input_shape=(3, 4, 4))


def _instance(rng, n=4, k=5):
  s = rng.normal(scale=2.0, size=(n, k))
  labels = rng.integers(0, k, size=(n,))
  p_o = np.asarray(jax.nn.softmax(rng.normal(scale=3.0, size=(n, k))))
  p_q = np.asarray(jax.nn.softmax(rng.normal(scale=3.0, size=(n, k))))
  return s, labels, hce_losses.DistillTargets(jnp.asarray(p_o),
                                              jnp.asarray(p_q))


class HceLossGradientTest(parameterized.TestCase):

  def setUp(self):
    super().setUp()
    previous = jax.config.jax_enable_x64
    jax.config.update('jax_enable_x64', True)
    self.addCleanup(jax.config.update, 'jax_enable_x64', previous)

  @parameterized.parameters(itertools.product((0.0, 0.3, 1.0), (1.0, 4.0)))
  def test_gradient_matches_central_differences(self, alpha, tau):
    cfg = hce_losses.HceLossConfig(alpha=alpha, temperature=tau)
    rng = np.random.default_rng(int(alpha * 10) * 10 + int(tau))
    eps = 1e-5
    for instance in range(20):
      s, labels, targets = _instance(rng)
      loss = lambda x: hce_losses.hce_loss(x, labels, targets, cfg)  # pylint: disable=cell-var-from-loop
      grad = np.asarray(jax.grad(loss)(jnp.asarray(s, jnp.float64)))
      self.assertEqual(grad.dtype, np.float64)
      numeric = np.zeros_like(s)
      for idx in np.ndindex(*s.shape):
        step = np.zeros_like(s)
        step[idx] = eps
        numeric[idx] = (float(loss(jnp.asarray(s + step))) -
                        float(loss(jnp.asarray(s - step)))) / (2 * eps)
      rel = np.max(np.abs(grad - numeric)) / max(np.max(np.abs(grad)), 1e-8)
      self.assertLessEqual(rel, 1e-4, f'instance {instance}')


class HceLossTest(parameterized.TestCase):

  def test_alpha_one_is_cross_entropy(self):
    s, labels, targets = _instance(np.random.default_rng(0))
    cfg = hce_losses.HceLossConfig(alpha=1.0, temperature=4.0)
    ce = jnp.mean(optax.softmax_cross_entropy_with_integer_labels(
        jnp.asarray(s, jnp.float32), jnp.asarray(labels)))
    self.assertEqual(
        float(hce_losses.hce_loss(jnp.asarray(s, jnp.float32), labels,
                                  targets, cfg)), float(ce))

  def test_terms(self):
    s, labels, targets = _instance(np.random.default_rng(1))
    cfg = hce_losses.HceLossConfig(alpha=0.3, temperature=4.0)
    total, aux = hce_losses.hce_loss_terms(s, labels, targets, cfg)
    self.assertAlmostEqual(float(total),
                           0.3 * float(aux['ce']) + 0.7 * float(aux['kl']),
                           places=5)
    self.assertAlmostEqual(float(aux['kl_weight']), 0.7, places=6)
    p_s = hce_losses.soften(s, 4.0)
    expected = -16.0 * np.mean(
        np.sum(np.asarray(targets.p_d) * np.log(np.asarray(p_s)), axis=-1))
    self.assertAlmostEqual(float(aux['kl']), expected, places=4)

  def test_p_d_rows_sum_to_zero(self):
    rng = np.random.default_rng(2)
    for _ in range(20):
      _, _, targets = _instance(rng, n=8, k=10)
      np.testing.assert_allclose(np.sum(targets.p_d, axis=-1), 0.0,
                                 atol=1e-6)

  def test_identical_targets_give_zero_kl(self):
    s, labels, targets = _instance(np.random.default_rng(3))
    same = hce_losses.DistillTargets(targets.p_o, targets.p_o)
    _, aux = hce_losses.hce_loss_terms(
        s, labels, same, hce_losses.HceLossConfig(alpha=0.0))
    self.assertEqual(float(aux['kl']), 0.0)

  def test_clamp_negative(self):
    p_d = jnp.array([[0.2, -0.1, -0.1], [0.0, 0.0, 0.0], [0.1, 0.3, -0.4]])
    np.testing.assert_allclose(
        hce_losses.clamp_and_renormalize(p_d),
        [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.25, 0.75, 0.0]], rtol=1e-6)
    s, labels, targets = _instance(np.random.default_rng(4))
    cfg = hce_losses.HceLossConfig(alpha=0.0, clamp_negative=True)
    _, aux = hce_losses.hce_loss_terms(s, labels, targets, cfg)
    # A proper distribution target makes the term a scaled cross-entropy.
    self.assertGreater(float(aux['kl']), 0.0)

  def test_objective_reads_batch_targets(self):
    s, labels, targets = _instance(np.random.default_rng(5))
    cfg = hce_losses.HceLossConfig()
    objective = hce_losses.HceObjective(cfg)
    batch = {'labels': jnp.asarray(labels), 'p_o': targets.p_o,
             'p_q': targets.p_q}
    total, aux = objective(jnp.asarray(s), batch)
    expected, _ = hce_losses.hce_loss_terms(s, labels, targets, cfg)
    self.assertAlmostEqual(float(total), float(expected), places=6)
    self.assertEqual(set(aux), {'ce', 'kl', 'kl_weight'})

  @parameterized.named_parameters(
      ('alpha_low', dict(alpha=-0.1)),
      ('alpha_high', dict(alpha=1.1)),
      ('tau', dict(temperature=0.5)),
  )
  def test_invalid_config(self, changes):
    with self.assertRaises(errors.ConfigError):
      hce_losses.HceLossConfig(**changes).validate()


class SoftenTest(absltest.TestCase):

  def test_rows_sum_to_one_and_large_scores_are_stable(self):
    p = hce_losses.soften(jnp.array([[1e4, 0.0, -1e4], [1.0, 2.0, 3.0]]), 4.0)
    self.assertTrue(np.all(np.isfinite(np.asarray(p))))
    np.testing.assert_allclose(np.sum(p, axis=-1), 1.0, rtol=1e-6)

  def test_errors(self):
    with self.assertRaises(errors.ConfigError):
      hce_losses.soften(jnp.zeros((1, 2)), 0.9)
    with self.assertRaises(errors.InputError):
      hce_losses.soften(jnp.array([[np.inf, 0.0]]), 1.0)
    with self.assertRaises(errors.NumericError):
      hce_losses.kl_term(jnp.zeros((1, 2)), jnp.array([[np.nan, 1.0]]), 1.0)


class TargetsTest(absltest.TestCase):

  def setUp(self):
    super().setUp()
    self.o = models.build_model(SPEC, 0)
    self.images = np.random.default_rng(0).normal(size=(6, 3, 4, 4))

  def _unquantized(self, store):
    return quantizer.QuantizedModel(store, {}, {}, {},
                                    quantizer.QuantConfig())

  def test_equal_models_drive_kl_to_zero(self):
    q = self._unquantized(self.o)
    targets = hce_losses.make_targets(self.o, q, self.images, 4.0)
    kl = hce_losses.kl_term(targets.p_d, hce_losses.soften(
        models.forward(self.o, self.images), 4.0), 4.0)
    self.assertLessEqual(abs(float(kl)), 1e-3)

  def test_precompute_targets(self):
    q = self._unquantized(models.build_model(SPEC, 1))
    out = hce_losses.precompute_targets(self.o, q, self.images, 4.0,
                                        batch_size=4)
    self.assertEqual(out['p_o'].shape, (6, 5))
    np.testing.assert_allclose(out['p_q'].sum(axis=-1), 1.0, rtol=1e-5)
    direct = hce_losses.make_targets(self.o, q, self.images, 4.0)
    np.testing.assert_allclose(out['p_o'], direct.p_o, rtol=1e-5, atol=1e-7)

  def test_architecture_mismatch(self):
    other = models.build_model(SPEC.replace(block_widths=(8, 8, 8)), 0)
    with self.assertRaises(errors.InputError):
      hce_losses.make_targets(self.o, self._unquantized(other), self.images,
                              4.0)
    with self.assertRaises(errors.InputError):
      hce_losses.precompute_targets(self.o, self._unquantized(other),
                                    self.images, 4.0)


if __name__ == '__main__':
  absltest.main()
