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

"""Tests for checkpoints."""

import json

from absl.testing import absltest
from absl.testing import parameterized
from etils import epath
import numpy as np
from hcekit import checkpoint_version
from hcekit import checkpoints
from hcekit import datasets
from hcekit import errors
from hcekit import models
from hcekit import pruner
from hcekit import quantizer

SPEC = models.NetworkSpec(family='resnet', depth=8, num_classes=4,
                          input_shape=(3, 4, 4))


class CheckpointsTest(parameterized.TestCase):

  def setUp(self):
    super().setUp()
    self.dir = epath.Path(self.create_tempdir().full_path)
    self.store = models.build_model(SPEC, seed=5)

  def _edit_manifest(self, directory, **changes):
    path = directory / checkpoints.MANIFEST_FILENAME
    manifest = json.loads(path.read_text())
    manifest.update(changes)
    path.write_text(json.dumps(manifest))

  def test_store_round_trip(self):
    ckpt = checkpoints.save_store(self.store, self.dir / 'o', step=3)
    self.assertTrue(checkpoints.is_checkpoint(ckpt))
    restored = checkpoints.restore_store(ckpt)
    self.assertEqual(restored.digest(), self.store.digest())
    self.assertEqual(restored.spec, SPEC)
    self.assertEqual(restored.seed, 5)
    manifest = checkpoints.read_manifest(ckpt, 'store')
    self.assertEqual(manifest['step'], 3)
    self.assertEqual(manifest[checkpoint_version.get_version_key()],
                     checkpoint_version.get_version())

  def test_overwrite_leaves_no_temporaries(self):
    checkpoints.save_store(self.store, self.dir / 'o')
    other = models.build_model(SPEC, seed=6)
    checkpoints.save_store(other, self.dir / 'o')
    self.assertEqual(checkpoints.restore_store(self.dir / 'o').digest(),
                     other.digest())
    self.assertEqual([p.name for p in self.dir.iterdir()], ['o'])

  def test_compacted_store_round_trip(self):
    schedule = pruner.SparsitySchedule(target_keep_ratio=0.5, steps=1,
                                       finetune_epochs_per_step=0)
    s, mask, _ = pruner.iterative_prune(self.store, schedule,
                                        lambda st, m, e: st)
    compacted, spec = pruner.compact(s, mask)
    restored = checkpoints.restore_store(
        checkpoints.save_store(compacted, self.dir / 's'))
    self.assertEqual(restored.spec, spec)
    self.assertEqual(restored.fingerprint, compacted.fingerprint)

  def test_missing(self):
    with self.assertRaisesRegex(errors.InputError, 'No checkpoint'):
      checkpoints.restore_store(self.dir / 'nothing')

  def test_corrupted_digest(self):
    ckpt = checkpoints.save_store(self.store, self.dir / 'o')
    self._edit_manifest(ckpt, digest='0' * 16)
    with self.assertRaisesRegex(errors.InputError, 'corrupted'):
      checkpoints.restore_store(ckpt)

  def test_incompatible_version(self):
    ckpt = checkpoints.save_store(self.store, self.dir / 'o')
    self._edit_manifest(ckpt, version=2.0)
    with self.assertRaisesRegex(errors.InputError, 'version'):
      checkpoints.restore_store(ckpt)
    self.assertTrue(checkpoint_version.is_compatible(1.0))

  def test_wrong_kind(self):
    ckpt = checkpoints.save_store(self.store, self.dir / 'o')
    with self.assertRaisesRegex(errors.InputError, 'quantized'):
      checkpoints.restore_quantized(ckpt)

  def test_architecture_mismatch(self):
    ckpt = checkpoints.save_store(self.store, self.dir / 'o')
    self._edit_manifest(
        ckpt, spec=SPEC.replace(block_widths=(8, 8, 8)).to_dict())
    with self.assertRaisesRegex(errors.InputError, 'shape'):
      checkpoints.restore_store(ckpt)

  def test_quantized_round_trip_is_bit_exact(self):
    data, _ = datasets.load(datasets.DatasetConfig(
        num_classes=4, train_size=32, test_size=4, image_size=4))
    cfg = quantizer.QuantConfig(calibration_batches=2,
                                calibration_batch_size=16)
    q = quantizer.quantize_model(self.store, data, cfg)
    restored = checkpoints.restore_quantized(
        checkpoints.save_quantized(q, self.dir / 'q'))
    self.assertEqual(restored.digest(), q.digest())
    self.assertEqual(restored.config, cfg)
    self.assertEqual(restored.activation_ranges, q.activation_ranges)
    np.testing.assert_array_equal(restored.scores(data.images),
                                  q.scores(data.images))

  def test_mask_round_trip(self):
    mask = pruner.full_mask(SPEC)
    m = np.array(mask.masks['stage0/block0/conv1'])
    m[:3] = False
    masks = dict(mask.masks)
    masks['stage0/block0/conv1'] = m
    mask = pruner.PruneMask('filter', masks)
    restored = checkpoints.restore_mask(
        checkpoints.save_mask(mask, SPEC, self.dir / 'mask', step=1))
    self.assertEqual(restored.granularity, 'filter')
    for name, value in mask.masks.items():
      np.testing.assert_array_equal(restored.masks[name], value)
    with self.assertRaises(errors.InputError):
      checkpoints.restore_store(self.dir / 'mask')


if __name__ == '__main__':
  absltest.main()
