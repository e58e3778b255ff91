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

"""Tests for reports."""

from absl.testing import absltest
from etils import epath
from hcekit import errors
from hcekit import io_utils
from hcekit import pipeline
from hcekit import reports
from hcekit import test_helper


def _row(keep, alpha, acc_s):
  return {'keep_ratio': keep, 'alpha': alpha, 'accuracy_o': 0.9,
          'accuracy_q': 0.8, 'accuracy_s': acc_s, 'accuracy_ensemble': 0.85,
          'overlap_ratio': 0.3, 'fingerprint_o': 'fo', 'fingerprint_q': 'fq',
          'run_dir': f'/runs/keep_{keep:g}/alpha_{alpha:g}'}


class ReportsTest(absltest.TestCase):

  @classmethod
  def setUpClass(cls):
    super().setUpClass()
    cls.run_dir = epath.Path(absltest.get_default_test_tmpdir()) / 'reports'
    if cls.run_dir.exists():
      cls.run_dir.rmtree()
    pipeline.run_hce(test_helper.tiny_run_config(cls.run_dir))
    cls.raw = io_utils.read_json(pipeline.raw_report_path(cls.run_dir))

  def test_raw_report_schema(self):
    reports.check_report_fields(self.raw)
    with self.assertRaisesRegex(errors.InputError, 'missing'):
      reports.check_report_fields({k: v for k, v in self.raw.items()
                                   if k != 'venn'})
    with self.assertRaisesRegex(errors.InputError, 'unexpected'):
      reports.check_report_fields(dict(self.raw, extra=1))

  def test_flops_rows(self):
    rows = reports.flops_rows(self.raw)
    names = [r[0] for r in rows]
    self.assertEqual(names, [
        'Baseline O', 'Quantized Q', 'Pruned S',
        'HCE {S, Q} (probability)', 'HCE {S, Q} (logit)',
        'HCE pruned member only'
    ])
    self.assertEqual(rows[0][3], 1.0)
    self.assertAlmostEqual(rows[1][3], 9 / 23)
    self.assertLess(rows[2][3], 1.0)
    self.assertIsNone(rows[-1][1])
    self.assertAlmostEqual(rows[3][2], rows[1][2] + rows[2][2])

  def test_render_run_report(self):
    text = reports.render_run_report(self.raw)
    self.assertTrue(text.startswith('# HCE report: TinySyntheticHce\n'))
    for expected in ('Baseline O', '## Error diversity', 'overlap ratio:',
                     '## Venn regions', 'Q frozen through pruning: True'):
      self.assertIn(expected, text)
    self.assertNotIn('Deep ensemble', text)
    self.assertNotIn('Decision-region panels', text)

  def test_write_run_report(self):
    path = reports.write_run_report(self.run_dir)
    self.assertEqual(path, pipeline.stage_dir(self.run_dir, 'report') /
                     reports.REPORT_FILENAME)
    self.assertEqual(path.read_text(), reports.render_run_report(self.raw))
    self.assertEqual(reports.write_report(self.run_dir), {'run': path})

  def test_missing_raw_records(self):
    empty = test_helper.tempdir(self)
    with self.assertRaisesRegex(errors.InputError, 'missing raw records'):
      reports.write_run_report(empty)

  def test_render_sweep(self):
    rows = [_row(0.25, 0.5, 0.6), _row(0.5, 0.5, 0.75),
            _row(0.5, 0.1, 0.7)]
    lines = reports.render_sweep(rows).splitlines()
    self.assertEqual(lines[0], '# alpha sweep')
    self.assertEqual(lines[1], "# shared O/Q fingerprints: [('fo', 'fq')]")
    self.assertEqual(lines[3], '## keep ratio 0.5')
    self.assertTrue(lines[5].startswith('0.1'))
    self.assertIn('70.00%', lines[5])
    self.assertTrue(lines[6].startswith('0.5'))
    self.assertIn('## keep ratio 0.25', lines)

  def test_render_sweep_rejects_incomplete_rows(self):
    row = _row(0.5, 0.1, 0.7)
    del row['overlap_ratio']
    with self.assertRaisesRegex(errors.InputError, 'overlap_ratio'):
      reports.render_sweep([row])

  def test_write_sweep_report(self):
    tmp = test_helper.tempdir(self)
    io_utils.write_json(tmp / reports.SWEEP_FILENAME,
                        {'rows': [_row(0.5, 0.3, 0.7)]})
    path = reports.write_sweep_report(tmp)
    self.assertEqual(path.name, reports.SWEEP_REPORT_FILENAME)
    self.assertIn('## keep ratio 0.5', path.read_text())


if __name__ == '__main__':
  absltest.main()
