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

"""Tests for experiment_registry."""
from absl.testing import absltest
from hcekit import base_experiment
from hcekit import datasets
from hcekit import errors
from hcekit import experiment_registry
from hcekit import models
from hcekit.tasks.test import synthetic


@experiment_registry.register
class DummyExperiment(base_experiment.BaseExperiment):

  def network(self):
    return models.NetworkSpec(depth=8, num_classes=2, input_shape=(3, 4, 4))

  def dataset(self):
    return datasets.DatasetConfig(name='blobs', num_classes=2)


@experiment_registry.register()
class SharedNameExperiment(DummyExperiment):
  pass


# Explicit re-registration.
@experiment_registry.register(allow_overwrite=True)
class SharedNameExperiment(DummyExperiment):  # pylint: disable=function-redefined
  pass


@experiment_registry.register(tags=['foo_tag'])
class TaggedExperiment(DummyExperiment):
  pass


class ExperimentRegistryTest(absltest.TestCase):

  def test_get(self):
    cls = experiment_registry.get(f'{__name__}.DummyExperiment')
    self.assertIs(cls, DummyExperiment)
    self.assertEqual(cls().experiment_config().network.depth, 8)
    self.assertIs(experiment_registry.get('DummyExperiment'), cls)
    self.assertIsNone(experiment_registry.get('DummyExperimentNotDefined'))

  def test_secondary_keys(self):
    keys = [
        'hcekit.tasks.test.synthetic.ToySyntheticHce',
        'tasks.test.synthetic.ToySyntheticHce',
        'test.synthetic.ToySyntheticHce',
        'synthetic.ToySyntheticHce',
        'ToySyntheticHce',
    ]
    classes = {experiment_registry.get(k) for k in keys}
    self.assertEqual(classes, {synthetic.ToySyntheticHce})

  def test_params_component_is_optional(self):
    cls = experiment_registry.get_experiment(
        'hcekit.tasks.vision.params.cifar_resnets.CifarResNet20')
    self.assertIs(experiment_registry.get('vision.cifar_resnets.CifarResNet20'),
                  cls)
    self.assertIs(
        experiment_registry.get('tasks.vision.cifar_resnets.CifarResNet20'),
        cls)

  def test_get_experiment_imports_default_modules(self):
    self.assertIs(experiment_registry.get_experiment('TinySyntheticHce'),
                  synthetic.TinySyntheticHce)
    with self.assertRaisesRegex(errors.ConfigError, 'Could not find'):
      experiment_registry.get_experiment('NoSuchExperiment')

  def test_ambiguous_key(self):
    twin = type('AmbiguousExperiment', (DummyExperiment,),
                {'__module__': 'hcekit.elsewhere'})
    experiment_registry.register(twin)
    experiment_registry.register(
        type('AmbiguousExperiment', (DummyExperiment,),
             {'__module__': 'hcekit.other'}))
    self.assertIs(
        experiment_registry.get('elsewhere.AmbiguousExperiment'), twin)
    with self.assertRaisesRegex(errors.ConfigError, 'uniquely'):
      experiment_registry.get('AmbiguousExperiment')

  def test_duplicate_registration(self):
    with self.assertRaisesRegex(ValueError, 'already registered'):
      experiment_registry.register(DummyExperiment)

  def test_tags(self):
    self.assertEqual(
        experiment_registry.get_registry_tags(f'{__name__}.TaggedExperiment'),
        ['foo_tag'])
    self.assertEqual(
        experiment_registry.get_registry_tags(
            'hcekit.tasks.test.synthetic.ToySyntheticHce'), ['acceptance'])
    self.assertEqual(
        experiment_registry.get_registry_tags(f'{__name__}.DummyExperiment'),
        [])

  def test_get_all(self):
    self.assertIn(f'{__name__}.SharedNameExperiment',
                  experiment_registry.get_all())


if __name__ == '__main__':
  absltest.main()
