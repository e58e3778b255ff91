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

"""Tests for pruner."""

from absl.testing import absltest
from absl.testing import parameterized
import jax.numpy as jnp
import numpy as np
from hcekit import errors
from hcekit import models
from hcekit import pruner

SPEC = models.NetworkSpec(family='resnet', depth=8, num_classes=4,
                          input_shape=(3, 4, 4))


def _no_finetune(store, mask, epoch):
  del mask, epoch
  return store


def _random_store(seed=0):
  """A store with non-trivial normalization parameters."""
  store = models.build_model(SPEC, seed)
  rng = np.random.default_rng(seed)
  entries = dict(store.entries)
  for name, value in entries.items():
    if name.endswith(('/scale', '/var')):
      entries[name] = jnp.asarray(rng.uniform(0.5, 1.5, value.shape),
                                  jnp.float32)
    elif name.endswith(('/bn1/bias', '/bn2/bias', '/mean')):
      entries[name] = jnp.asarray(rng.normal(size=value.shape), jnp.float32)
  return store.with_entries(entries)


class ScheduleTest(parameterized.TestCase):

  @parameterized.parameters((0.7, 10, 7), (0.5, 16, 8), (0.01, 16, 1),
                            (0.25, 9, 3), (1.0, 5, 5))
  def test_keep_count(self, ratio, size, expected):
    self.assertEqual(pruner.keep_count(ratio, size), expected)

  def test_keep_ratios(self):
    schedule = pruner.SparsitySchedule(target_keep_ratio=0.5, steps=2)
    self.assertEqual(schedule.keep_ratios(), [0.75, 0.5])
    one = pruner.SparsitySchedule(target_keep_ratio=0.4, steps=1)
    self.assertEqual(one.keep_ratios(), [0.4])

  @parameterized.named_parameters(
      ('zero_keep', dict(target_keep_ratio=0.0)),
      ('above_one', dict(target_keep_ratio=1.5)),
      ('no_steps', dict(steps=0)),
      ('granularity', dict(granularity='channel')),
      ('scope', dict(unstructured_scope='block')),
  )
  def test_invalid(self, changes):
    with self.assertRaises(errors.ConfigError):
      pruner.SparsitySchedule(**changes).validate()


class RankingTest(absltest.TestCase):

  def test_rank_by_l1_with_stable_ties(self):
    w = np.array([[1.0, -1.0], [3.0, 0.0], [0.5, 0.5], [-2.0, 0.0]])
    np.testing.assert_array_equal(pruner.rank_filters_l1(w), [1, 0, 3, 2])
    np.testing.assert_allclose(pruner.filter_l1_norms(w), [2.0, 3.0, 1.0, 2.0])


class MaskTest(parameterized.TestCase):

  def test_full_masks(self):
    mask = pruner.full_mask(SPEC)
    self.assertEqual(set(mask.masks),
                     {l.name for l in models.prunable_layers(SPEC)})
    weight = pruner.full_mask(SPEC, 'weight')
    self.assertEqual(set(weight.masks), set(pruner.unstructured_entries(SPEC)))
    self.assertEqual(weight.densities(),
                     {k: 1.0 for k in pruner.unstructured_entries(SPEC)})
    self.assertEqual(mask.densities(), {})

  @parameterized.named_parameters(
      ('residual_output', {'stem/conv': np.ones((16,), bool)}),
      ('unknown', {'stage9/block0/conv1': np.ones((16,), bool)}),
      ('shape', {'stage0/block0/conv1': np.ones((15,), bool)}),
      ('empty', {'stage0/block0/conv1': np.zeros((16,), bool)}),
  )
  def test_check_mask_rejects(self, masks):
    with self.assertRaises(errors.InputError):
      pruner.check_mask(SPEC, pruner.PruneMask('filter', masks))

  def test_non_prunable_message(self):
    mask = pruner.PruneMask('filter',
                            {'stage0/block0/conv2': np.ones((16,), bool)})
    with self.assertRaisesRegex(errors.InputError, 'residual'):
      pruner.check_mask(SPEC, mask)

  def test_apply_mask_keeps_other_weights(self):
    store = _random_store()
    m = np.ones((16,), bool)
    m[[1, 5]] = False
    masked = pruner.apply_mask(
        store, pruner.PruneMask('filter', {'stage0/block0/conv1': m}))
    kernel = np.asarray(masked.entries['stage0/block0/conv1/kernel'])
    np.testing.assert_array_equal(kernel[[1, 5]], 0.0)
    np.testing.assert_array_equal(
        kernel[m], np.asarray(store.entries['stage0/block0/conv1/kernel'])[m])
    conv2 = np.asarray(masked.entries['stage0/block0/conv2/kernel'])
    np.testing.assert_array_equal(conv2[:, [1, 5]], 0.0)
    np.testing.assert_array_equal(masked.entries['stem/conv/kernel'],
                                  store.entries['stem/conv/kernel'])


class IterativePruneTest(parameterized.TestCase):

  def test_exact_kept_counts(self):
    schedule = pruner.SparsitySchedule(target_keep_ratio=0.5, steps=2,
                                       finetune_epochs_per_step=0)
    s, mask, history = pruner.iterative_prune(_random_store(), schedule,
                                              _no_finetune)
    for layer in models.prunable_layers(SPEC):
      self.assertEqual(mask.kept(layer.name), layer.out_channels // 2)
    self.assertLen(history, 2)
    first = history[0]['layers']['stage1/block0/conv1']
    self.assertLen(first['kept'], 24)
    self.assertLen(first['norms'], 32)
    second = history[1]['layers']['stage1/block0/conv1']
    self.assertEqual(second['candidates'], first['kept'])
    self.assertTrue(set(second['kept']) <= set(first['kept']))
    self.assertEqual(s.fingerprint, _random_store().fingerprint)

  def test_keeps_largest_filters(self):
    store = _random_store()
    schedule = pruner.SparsitySchedule(target_keep_ratio=0.25, steps=1,
                                       finetune_epochs_per_step=0)
    _, mask, _ = pruner.iterative_prune(store, schedule, _no_finetune)
    name = 'stage0/block0/conv1'
    norms = pruner.filter_l1_norms(store.entries[f'{name}/kernel'])
    kept = np.flatnonzero(mask.masks[name])
    self.assertGreaterEqual(norms[kept].min(),
                            np.delete(norms, kept).max())

  def test_masked_and_compacted_agree(self):
    schedule = pruner.SparsitySchedule(target_keep_ratio=0.4, steps=2,
                                       finetune_epochs_per_step=0)
    s, mask, _ = pruner.iterative_prune(_random_store(), schedule,
                                        _no_finetune)
    compacted, spec = pruner.compact(s, mask)
    self.assertEqual(spec, pruner.pruned_spec(SPEC, 0.4))
    self.assertEqual(spec.internal_widths(), (7, 13, 26))
    inputs = np.random.default_rng(3).normal(size=(100, 3, 4, 4))
    np.testing.assert_allclose(
        models.forward(compacted, inputs), models.forward(s, inputs),
        atol=1e-5, rtol=1e-5)
    self.assertLess(compacted.num_params(), s.num_params())

  def test_finetune_is_called_and_mask_reapplied(self):
    calls = []

    def finetune(store, mask, epoch):
      calls.append(epoch)
      return store.with_entries(
          {k: v + 1.0 for k, v in store.entries.items()})

    schedule = pruner.SparsitySchedule(target_keep_ratio=0.5, steps=2,
                                       finetune_epochs_per_step=2)
    s, mask, _ = pruner.iterative_prune(_random_store(), schedule, finetune)
    self.assertEqual(calls, [0, 1, 2, 3])
    multipliers = pruner.mask_multipliers(SPEC, mask)
    for name, mult in multipliers.items():
      np.testing.assert_array_equal(np.asarray(s.entries[name])[mult == 0],
                                    0.0)

  def test_resume_matches_uninterrupted_run(self):
    schedule = pruner.SparsitySchedule(target_keep_ratio=0.5, steps=3,
                                       finetune_epochs_per_step=1)

    def finetune(store, mask, epoch):
      del mask
      return store.with_entries(
          {k: v * (1.0 + 0.01 * epoch) for k, v in store.entries.items()})

    progress = []
    full, full_mask, full_history = pruner.iterative_prune(
        _random_store(), schedule, finetune, step_callback=progress.append)
    self.assertEqual([p.step for p in progress], [1, 2, 3])
    resumed, mask, history = pruner.iterative_prune(
        _random_store(), schedule, finetune, resume_from=progress[0])
    self.assertEqual(resumed.digest(), full.digest())
    self.assertEqual(history, full_history)
    for k, m in full_mask.masks.items():
      np.testing.assert_array_equal(mask.masks[k], m)

  @parameterized.parameters('global', 'layer')
  def test_weight_granularity(self, scope):
    schedule = pruner.SparsitySchedule(target_keep_ratio=0.3, steps=2,
                                       finetune_epochs_per_step=0,
                                       granularity='weight',
                                       unstructured_scope=scope)
    store = _random_store()
    s, mask, _ = pruner.iterative_prune(store, schedule, _no_finetune)
    self.assertEqual(s.fingerprint, store.fingerprint)
    sizes = {k: m.size for k, m in mask.masks.items()}
    kept = {k: int(np.sum(m)) for k, m in mask.masks.items()}
    if scope == 'layer':
      for k in sizes:
        self.assertEqual(kept[k], pruner.keep_count(0.3, sizes[k]))
    else:
      self.assertEqual(sum(kept.values()),
                       pruner.keep_count(0.3, sum(sizes.values())))
    for k, m in mask.masks.items():
      np.testing.assert_array_equal(np.asarray(s.entries[k])[~m], 0.0)
    with self.assertRaises(errors.InputError):
      pruner.compact(s, mask)


if __name__ == '__main__':
  absltest.main()
