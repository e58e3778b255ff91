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

"""Human-readable reports regenerated from stored raw records.

Every number printed here is read from `raw_report.json` (or `sweep.json`);
rendering only formats values and takes ratios, so regenerating a report is
idempotent and byte-stable.
"""

from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from etils import epath

from hcekit import cost_model
from hcekit import errors
from hcekit import io_utils
from hcekit import pipeline

REPORT_FILENAME = 'report.txt'
SWEEP_FILENAME = 'sweep.json'
SWEEP_REPORT_FILENAME = 'sweep.txt'

# Top-level keys of a raw run report.
REPORT_FIELDS = frozenset({
    'name', 'seed', 'alpha', 'target_keep_ratio', 'granularity',
    'eval_split', 'num_samples', 'accuracy', 'ensemble_accuracy',
    'ensemble_mode', 'masked_compacted_max_diff', 'error_sets', 'diversity',
    'venn', 'cost', 'fingerprints', 'digests', 'q_frozen', 'prune_history',
    'keep_fractions', 'deep_ensemble', 'regions',
})
SWEEP_ROW_FIELDS = ('keep_ratio', 'alpha', 'accuracy_o', 'accuracy_q',
                    'accuracy_s', 'accuracy_ensemble', 'overlap_ratio',
                    'fingerprint_o', 'fingerprint_q', 'run_dir')


def check_report_fields(report: Mapping[str, Any]) -> None:
  """Raises InputError unless `report` holds exactly REPORT_FIELDS."""
  missing = sorted(REPORT_FIELDS - set(report))
  extra = sorted(set(report) - REPORT_FIELDS)
  if missing or extra:
    raise errors.InputError(
        f'Raw report does not match the report schema: missing {missing}, '
        f'unexpected {extra}')


def _pct(value: float) -> str:
  return f'{100.0 * value:.2f}%'


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> List[str]:
  widths = [max(len(r[i]) for r in [header] + list(rows))
            for i in range(len(header))]
  lines = []
  for row in [header] + list(rows):
    lines.append('  '.join(
        cell.ljust(widths[i]) if i == 0 else cell.rjust(widths[i])
        for i, cell in enumerate(row)).rstrip())
  return lines


def flops_rows(report: Mapping[str, Any]
              ) -> List[Tuple[str, Optional[float], float, float]]:
  """(approach, accuracy or None, effective FLOPs, share of O's FLOPs)."""
  cost = report['cost']
  base = cost['O']['totals']['effective_flops']
  acc = report['accuracy']
  hce = cost['HCE']
  rows = [
      ('Baseline O', acc['O'], base),
      ('Quantized Q', acc['Q'], cost['Q']['totals']['effective_flops']),
      ('Pruned S', acc['S_compact'], cost['S']['totals']['effective_flops']),
  ]
  for mode, value in report['ensemble_accuracy'].items():
    rows.append((f'HCE {{S, Q}} ({mode})', value,
                 hce['totals']['effective_flops']))
  rows.append(('HCE pruned member only', None, hce['pruned_member_flops']))
  if report.get('deep_ensemble'):
    rows.append(('Deep ensemble {O, O\'}', report['deep_ensemble']['accuracy'],
                 report['deep_ensemble']['flops']))
  return [(name, a, f, f / base if base else 0.0) for name, a, f in rows]


def render_run_report(report: Mapping[str, Any]) -> str:
  """Accuracy/FLOPs table, diversity, Venn table and per-layer costs."""
  check_report_fields(report)
  lines = [
      f'# HCE report: {report["name"]}',
      f'# seed={report["seed"]} alpha={report["alpha"]} '
      f'keep={report["target_keep_ratio"]} granularity={report["granularity"]}'
      f' eval={report["eval_split"]} N={report["num_samples"]}',
      '',
  ]
  rows = [(name, '-' if a is None else _pct(a), f'{f / 1e6:.3f}',
           f'{100.0 * r:.1f}%') for name, a, f, r in flops_rows(report)]
  lines += _table(('Approach', 'Accuracy', 'FLOPs(M)', 'FLOPs(%)'), rows)
  div = report['diversity']
  lines += [
      '',
      '## Error diversity',
      f'|E_Q|={div["num_e_q"]} |E_S|={div["num_e_s"]} '
      f'|E_Q & E_S|={div["intersection"]} |E_Q | E_S|={div["union"]}',
      f'overlap ratio: {_pct(div["overlap_ratio"])}',
      f'corrected by the ensemble: {_pct(div["corrected_fraction"])} of '
      f'E_Q | E_S, {_pct(div["corrected_q_only_fraction"])} of E_Q - E_S',
      f'|E_ens|={div["num_e_ens"]} |E_O|={div["num_e_base"]}',
      '',
      '## Venn regions (Q, S, ensemble errors)',
  ]
  lines += _table(('region', 'count'),
                  [(k, str(v)) for k, v in report['venn'].items()])
  lines += [
      '',
      f'Q frozen through pruning: {report["q_frozen"]}',
      f'masked vs compacted S max |diff|: '
      f'{report["masked_compacted_max_diff"]:.3g}',
  ]
  for member in ('O', 'Q', 'S', 'HCE'):
    lines.append('')
    lines.append(cost_model.render_cost_table(
        cost_model.CostReport.from_dict(report['cost'][member])).rstrip('\n'))
  if report.get('regions'):
    lines += ['', '## Decision-region panels']
    for tag, summary in sorted(report['regions']['panels'].items()):
      cells = ', '.join(
          f'{name}: roughness={s["roughness"]} center={s["center_label"]}'
          for name, s in summary.items())
      lines.append(f'{tag}: {cells}')
  return '\n'.join(lines) + '\n'


def _require(paths: Mapping[str, epath.Path], run_dir: epath.Path) -> None:
  missing = [name for name, p in paths.items() if not p.exists()]
  if missing:
    raise errors.InputError(
        f'Cannot render {run_dir}: missing raw records {missing}. Rerun '
        f'`run-hce --resume --out={run_dir}` with the same config to '
        'regenerate them.')


def write_run_report(run_dir: epath.PathLike) -> epath.Path:
  """Renders `<run_dir>/stage_4_report/report.txt` from the raw report."""
  run_dir = epath.Path(run_dir)
  raw = pipeline.raw_report_path(run_dir)
  _require({pipeline.CONFIG_FILENAME: run_dir / pipeline.CONFIG_FILENAME,
            pipeline.STAGES_FILENAME: run_dir / pipeline.STAGES_FILENAME,
            pipeline.RAW_REPORT_FILENAME: raw}, run_dir)
  return io_utils.write_text_atomic(raw.parent / REPORT_FILENAME,
                                    render_run_report(io_utils.read_json(raw)))


def render_sweep(rows: Sequence[Mapping[str, Any]]) -> str:
  """Accuracy-vs-alpha tables, one per keep ratio."""
  for row in rows:
    missing = [k for k in SWEEP_ROW_FIELDS if k not in row]
    if missing:
      raise errors.InputError(f'Sweep row is missing {missing}')
  fingerprints = sorted({(r['fingerprint_o'], r['fingerprint_q'])
                         for r in rows})
  lines = ['# alpha sweep', f'# shared O/Q fingerprints: {fingerprints}']
  for keep in sorted({r['keep_ratio'] for r in rows}, reverse=True):
    subset = sorted((r for r in rows if r['keep_ratio'] == keep),
                    key=lambda r: r['alpha'])
    lines += ['', f'## keep ratio {keep}']
    lines += _table(
        ('alpha', 'S', 'HCE', 'Q', 'O', 'overlap'),
        [(f'{r["alpha"]:g}', _pct(r['accuracy_s']),
          _pct(r['accuracy_ensemble']), _pct(r['accuracy_q']),
          _pct(r['accuracy_o']), _pct(r['overlap_ratio'])) for r in subset])
  return '\n'.join(lines) + '\n'


def write_sweep_report(sweep_dir: epath.PathLike) -> epath.Path:
  sweep_dir = epath.Path(sweep_dir)
  path = sweep_dir / SWEEP_FILENAME
  _require({SWEEP_FILENAME: path}, sweep_dir)
  rows = io_utils.read_json(path)['rows']
  return io_utils.write_text_atomic(sweep_dir / SWEEP_REPORT_FILENAME,
                                    render_sweep(rows))


def write_report(directory: epath.PathLike) -> Dict[str, epath.Path]:
  """Regenerates every report a run or sweep directory supports."""
  directory = epath.Path(directory)
  if (directory / SWEEP_FILENAME).exists():
    out = {'sweep': write_sweep_report(directory)}
    for row in io_utils.read_json(directory / SWEEP_FILENAME)['rows']:
      out[row['run_dir']] = write_run_report(row['run_dir'])
    return out
  return {'run': write_run_report(directory)}
