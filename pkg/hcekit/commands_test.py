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

"""Tests for commands."""

from absl.testing import absltest
from absl.testing import parameterized
from etils import epath
from hcekit import commands
from hcekit import errors
from hcekit import experiment_config
from hcekit import io_utils
from hcekit import pipeline
from hcekit import reports
from hcekit import run_registry
from hcekit import test_helper


class CommandsTest(parameterized.TestCase):

  @classmethod
  def setUpClass(cls):
    super().setUpClass()
    cls.exp = test_helper.tiny_experiment()
    root = epath.Path(absltest.get_default_test_tmpdir()) / 'commands'
    if root.exists():
      root.rmtree()
    cls.run_dir = root / 'run'
    cls.result = commands.run_hce(cls.exp, out=cls.run_dir)

  def test_run_hce(self):
    self.assertTrue(
        (pipeline.stage_dir(self.run_dir, 'report') /
         reports.REPORT_FILENAME).exists())
    registry = run_registry.RunRegistry.for_output(self.run_dir)
    (record,) = registry.list('run-hce')
    self.assertEqual(record['run_dir'], str(self.run_dir))
    self.assertEqual(record['accuracy'], self.result.report['accuracy'])
    self.assertEqual(commands.run_config_from_dir(self.run_dir),
                     self.exp.run_config(output_dir=str(self.run_dir)))

  def test_output_dir_is_required(self):
    with self.assertRaisesRegex(errors.ConfigError,
                                experiment_config.OUTPUT_DIR_ENV):
      commands.train_baseline(self.exp)
    with self.assertRaisesRegex(errors.ConfigError,
                                experiment_config.OUTPUT_DIR_ENV):
      commands.sweep_alpha(self.exp, alphas=[0.5], keep_ratios=[0.5])

  def test_train_baseline_then_quantize(self):
    out = test_helper.tempdir(self) / 'run'
    o = commands.train_baseline(self.exp, out=out)
    self.assertIsNone(o.quantized)
    q = commands.quantize(self.exp, out=out)
    self.assertEqual(q.baseline.digest(), o.baseline.digest())
    statuses = [(r['stage'], r['status'])
                for r in pipeline.read_stage_log(out)]
    self.assertEqual(statuses, [('baseline', 'trained'),
                                ('baseline', 'restored'),
                                ('quantize', 'trained')])
    registry = run_registry.RunRegistry.for_output(out)
    self.assertLen(registry.list(), 2)

  def test_evaluate(self):
    results = commands.evaluate(self.run_dir)
    self.assertEqual(set(results), {'O', 'Q', 'S', 'ensemble_probability',
                                    'ensemble_logit'})
    report = self.result.report
    self.assertEqual(results['O']['accuracy'], report['accuracy']['O'])
    self.assertEqual(results['Q']['accuracy'], report['accuracy']['Q'])
    self.assertAlmostEqual(results['ensemble_probability']['accuracy'],
                           report['ensemble_accuracy']['probability'],
                           delta=0.02)
    self.assertEqual(
        io_utils.read_json(self.run_dir / commands.EVALUATION_FILENAME),
        results)

  def test_diversity_report_from_counts(self):
    report, text = commands.diversity_report(counts=(1181, 654, 401))
    self.assertAlmostEqual(100.0 * report.overlap_ratio, 27.96, delta=0.01)
    self.assertEqual(report.union, 1434)
    self.assertIn('region', text)

  def test_diversity_report_from_run(self):
    report, _ = commands.diversity_report(run_dir=self.run_dir)
    self.assertEqual(report.to_dict(), self.result.report['diversity'])

  def test_diversity_report_needs_input(self):
    with self.assertRaisesRegex(errors.ConfigError, '--counts'):
      commands.diversity_report()
    with self.assertRaises(errors.InputError):
      commands.diversity_report(counts=(10, 5, 6))

  def test_cost_report(self):
    predicted = commands.cost_report(exp=self.exp)
    measured = commands.cost_report(run_dir=self.run_dir)
    self.assertEqual(predicted, measured)
    with self.assertRaisesRegex(errors.ConfigError, '--config'):
      commands.cost_report()

  def test_visualize_region(self):
    out = test_helper.tempdir(self)
    summary = commands.visualize_region(self.run_dir, [0, 3], resolution=5,
                                        out=out)
    self.assertEqual(list(summary), ['point_0', 'point_3'])
    self.assertEqual(list(summary['point_0']), ['O', 'Q', 'S', 'HCE'])
    self.assertTrue((out / 'point_3_panel.png').exists())
    with self.assertRaisesRegex(errors.InputError, 'outside the test split'):
      commands.visualize_region(self.run_dir, [10_000], resolution=5,
                                out=out)

  def test_visualize_compression_series(self):
    out = test_helper.tempdir(self)
    summary = commands.visualize_region(self.run_dir, [1], resolution=3,
                                        series=True, out=out)
    self.assertEqual(list(summary['series_1']), [
        'O', 'Q5bit', 'Q4bit', 'Q3bit', 'S90pct', 'S70pct', 'S40pct',
        'S10pct'
    ])

  def test_report(self):
    paths = commands.report(self.run_dir)
    self.assertEqual(list(paths), ['run'])

  def test_sweep_alpha(self):
    out = test_helper.tempdir(self) / 'sweep'
    summary = commands.sweep_alpha(self.exp, alphas=[0.1, 0.9],
                                   keep_ratios=[0.5], out=out)
    rows = summary['rows']
    self.assertEqual([(r['keep_ratio'], r['alpha']) for r in rows],
                     [(0.5, 0.1), (0.5, 0.9)])
    self.assertLen({(r['fingerprint_o'], r['fingerprint_q']) for r in rows},
                   1)
    self.assertLen({(r['digest_o'], r['digest_q']) for r in rows}, 1)
    self.assertEqual(rows[0]['run_dir'], str(out / 'keep_0.5' / 'alpha_0.1'))
    self.assertTrue((out / reports.SWEEP_REPORT_FILENAME).exists())
    self.assertEqual(io_utils.read_json(out / reports.SWEEP_FILENAME),
                     io_utils.normalize(summary))
    paths = commands.report(out)
    self.assertIn('sweep', paths)
    self.assertLen(paths, 3)


if __name__ == '__main__':
  absltest.main()
