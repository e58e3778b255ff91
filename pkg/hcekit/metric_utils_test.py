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

"""Tests for metric_utils."""

from absl.testing import absltest
from absl.testing import parameterized
from etils import epath
import jax.numpy as jnp
import numpy as np
from hcekit import metric_utils


class MetricUtilsTest(parameterized.TestCase):

  @parameterized.parameters(
      (1, True), (1.5, True), (np.float32(2.0), True),
      (np.array([3.0]), True), (jnp.array(1.0), True),
      (np.array([1.0, 2.0]), False), ('a', False), (None, False))
  def test_is_scalar(self, value, expected):
    self.assertEqual(metric_utils.is_scalar(value), expected)

  def test_as_float_dict(self):
    out = metric_utils.as_float_dict({
        'loss': jnp.array(0.25),
        'acc': np.array([0.5]),
        'flag': True,
        'vec': np.ones((2,)),
    })
    self.assertEqual(out, {'loss': 0.25, 'acc': 0.5})

  def test_writer_in_memory(self):
    writer = metric_utils.MetricsWriter()
    record = writer.write('prune', 7, epoch=1, event='epoch_end',
                          ce=jnp.array(0.5), kl=None)
    self.assertEqual(record, {'stage': 'prune', 'step': 7, 'epoch': 1,
                              'event': 'epoch_end', 'ce': 0.5, 'kl': None})
    self.assertIsNone(writer.path)
    self.assertEqual(writer.read(), [record])

  def test_writer_appends_jsonl(self):
    directory = epath.Path(self.create_tempdir().full_path)
    writer = metric_utils.MetricsWriter(directory, log_every_n_steps=1)
    writer.write('baseline', 0, total=1.0)
    writer.write('baseline', 1, total=0.5)
    self.assertEqual(writer.path, directory / metric_utils.METRICS_FILENAME)
    self.assertEqual([r['total'] for r in writer.read()], [1.0, 0.5])
    reread = metric_utils.MetricsWriter(directory)
    self.assertLen(reread.read(), 2)


if __name__ == '__main__':
  absltest.main()
