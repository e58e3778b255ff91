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

"""Tests for run_registry."""

from absl.testing import absltest
from hcekit import errors
from hcekit import run_registry
from hcekit import test_helper


class RunRegistryTest(absltest.TestCase):

  def test_register_and_list(self):
    tmp = test_helper.tempdir(self)
    registry = run_registry.RunRegistry.for_output(tmp / 'run_a')
    self.assertEqual(registry.directory, tmp / run_registry.REGISTRY_DIRNAME)
    self.assertEqual(registry.list(), [])
    config = {'name': 'toy', 'seed': 0}
    first = registry.register('run-hce', tmp / 'run_a', config, seed=0)
    second = registry.register('sweep-alpha', tmp / 'sweep', config)
    self.assertTrue(first['run_id'].startswith('run-hce-'))
    self.assertEqual(first['name'], 'toy')
    self.assertEqual(first['seed'], 0)
    self.assertEqual(first['config_digest'], second['config_digest'])
    self.assertNotEqual(first['run_id'], second['run_id'])
    self.assertLen(registry.list(), 2)
    self.assertEqual([r['run_id'] for r in registry.list('sweep-alpha')],
                     [second['run_id']])
    self.assertEqual(registry.get(first['run_id']), first)

  def test_config_digest_ignores_key_order(self):
    self.assertEqual(run_registry.config_digest({'a': 1, 'b': [1, 2]}),
                     run_registry.config_digest({'b': (1, 2), 'a': 1}))
    self.assertNotEqual(run_registry.config_digest({'a': 1}),
                        run_registry.config_digest({'a': 2}))

  def test_unknown_run(self):
    registry = run_registry.RunRegistry(test_helper.tempdir(self))
    with self.assertRaisesRegex(errors.InputError, 'No run'):
      registry.get('run-hce-missing')


if __name__ == '__main__':
  absltest.main()
