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

"""Tests for the command line exit codes."""

import os
from unittest import mock

from absl import app
from absl.testing import absltest
from absl.testing import flagsaver
from absl.testing import parameterized
from hcekit import experiment_config
from hcekit import main


class MainTest(parameterized.TestCase):

  def setUp(self):
    super().setUp()
    if not main.FLAGS.is_parsed():
      main.FLAGS.mark_as_parsed()

  def test_requires_one_command(self):
    with self.assertRaises(app.UsageError) as ctx:
      main.main(['hcekit'])
    self.assertEqual(ctx.exception.exitcode, main.EXIT_CONFIG)

  def test_unknown_command(self):
    self.assertEqual(main.dispatch('train-everything'), main.EXIT_CONFIG)

  @parameterized.named_parameters(
      ('missing_config', 'run-hce', {}, main.EXIT_CONFIG),
      ('unknown_experiment', 'quantize', {'config': 'NoSuchExperiment'},
       main.EXIT_CONFIG),
      ('missing_out', 'train-baseline', {'config': 'TinySyntheticHce'},
       main.EXIT_CONFIG),
      ('bad_alphas', 'sweep-alpha',
       {'config': 'TinySyntheticHce', 'alphas': ['x']}, main.EXIT_CONFIG),
      ('counts', 'diversity-report', {'counts': ['1181', '654', '401']},
       main.EXIT_OK),
      ('two_counts', 'diversity-report', {'counts': ['1', '2']},
       main.EXIT_CONFIG),
      ('impossible_counts', 'diversity-report', {'counts': ['10', '5', '6']},
       main.EXIT_FAILURE),
      ('cost_report', 'cost-report', {'config': 'TinySyntheticHce'},
       main.EXIT_OK),
      ('cost_report_without_input', 'cost-report', {}, main.EXIT_CONFIG),
  )
  def test_exit_codes(self, command, flags, expected):
    with flagsaver.flagsaver(**flags):
      self.assertEqual(main.dispatch(command), expected)

  def test_missing_run_directory(self):
    missing = self.create_tempdir().full_path + '/nothing'
    with flagsaver.flagsaver(run_dir=missing):
      self.assertEqual(main.dispatch('evaluate'), main.EXIT_FAILURE)

  def test_cifar_cost_report_needs_a_dataset_path(self):
    with flagsaver.flagsaver(config='CifarResNet56'):
      with mock.patch.dict(os.environ, {}):
        os.environ.pop(experiment_config.DATASET_PATH_ENV, None)
        self.assertEqual(main.dispatch('cost-report'), main.EXIT_CONFIG)
      with mock.patch.dict(
          os.environ, {experiment_config.DATASET_PATH_ENV: '/data/tfds'}):
        self.assertEqual(main.dispatch('cost-report'), main.EXIT_OK)


if __name__ == '__main__':
  absltest.main()
