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

"""The subcommands of the `hcekit` command line.

Each command takes a resolved ExperimentConfig (or a run directory), does
its work through the library and returns what it produced; `main.py` only
parses flags and dispatches.
"""

import dataclasses
from typing import Any, Dict, Optional, Sequence, Tuple

from absl import logging
from etils import epath

from hcekit import cost_model
from hcekit import datasets
from hcekit import ensemble_analysis
from hcekit import errors
from hcekit import eval_lib
from hcekit import experiment_config
from hcekit import io_utils
from hcekit import models
from hcekit import pipeline
from hcekit import pruner
from hcekit import quantizer
from hcekit import region_viz
from hcekit import reports
from hcekit import run_registry

EVALUATION_FILENAME = 'evaluation.json'
COMMANDS = ('train-baseline', 'quantize', 'run-hce', 'sweep-alpha',
            'evaluate', 'diversity-report', 'visualize-region', 'cost-report',
            'report')


def _run_config(exp: experiment_config.ExperimentConfig,
                seed: Optional[int],
                out: Optional[epath.PathLike]) -> pipeline.HceRunConfig:
  out = out or exp.output_dir
  if not out:
    raise errors.ConfigError(
        'An output directory is required: pass --out, set output_dir in the '
        f'config or {experiment_config.OUTPUT_DIR_ENV}')
  return exp.run_config(seed=seed, output_dir=str(out)).validate()


def _register(command: str, cfg: pipeline.HceRunConfig,
              **fields: Any) -> Dict[str, Any]:
  registry = run_registry.RunRegistry.for_output(cfg.output_dir)
  return registry.register(command, cfg.output_dir, cfg.to_dict(),
                           seed=cfg.seed, **fields)


def run_config_from_dir(run_dir: epath.PathLike) -> pipeline.HceRunConfig:
  """The HceRunConfig a run directory was produced with."""
  data = io_utils.read_json(epath.Path(run_dir) / pipeline.CONFIG_FILENAME)
  return experiment_config.parse_dataclass(pipeline.HceRunConfig, data)


def train_baseline(exp: experiment_config.ExperimentConfig,
                   *,
                   seed: Optional[int] = None,
                   out: Optional[epath.PathLike] = None,
                   resume: bool = False) -> pipeline.HceResult:
  """Stage 1 only; the run directory can later be resumed by run-hce."""
  cfg = _run_config(exp, seed, out)
  result = pipeline.run_hce(cfg, resume=resume,
                            stop_after=pipeline.STAGE_BASELINE)
  _register('train-baseline', cfg,
            fingerprint_o=result.baseline.fingerprint,
            digest_o=result.baseline.digest())
  return result


def quantize(exp: experiment_config.ExperimentConfig,
             *,
             seed: Optional[int] = None,
             out: Optional[epath.PathLike] = None) -> pipeline.HceResult:
  """Stages 1 and 2, restoring O from the run directory when present."""
  cfg = _run_config(exp, seed, out)
  result = pipeline.run_hce(cfg, resume=True,
                            stop_after=pipeline.STAGE_QUANTIZE)
  _register('quantize', cfg, digest_o=result.baseline.digest(),
            digest_q=result.quantized.digest())
  return result


def run_hce(exp: experiment_config.ExperimentConfig,
            *,
            seed: Optional[int] = None,
            out: Optional[epath.PathLike] = None,
            resume: bool = False) -> pipeline.HceResult:
  """All four stages plus the rendered report."""
  cfg = _run_config(exp, seed, out)
  result = pipeline.run_hce(cfg, resume=resume)
  reports.write_run_report(result.run_dir)
  report = result.report
  _register('run-hce', cfg, accuracy=report['accuracy'],
            ensemble_accuracy=report['ensemble_accuracy'],
            overlap_ratio=report['diversity']['overlap_ratio'])
  return result


def sweep_alpha(exp: experiment_config.ExperimentConfig,
                *,
                alphas: Optional[Sequence[float]] = None,
                keep_ratios: Optional[Sequence[float]] = None,
                seed: Optional[int] = None,
                out: Optional[epath.PathLike] = None,
                resume: bool = False) -> Dict[str, Any]:
  """Runs the pipeline for every (keep ratio, alpha), sharing O and Q.

  O and Q do not depend on alpha or on the sparsity, so they are built once
  under `<out>/shared` and handed to every row.
  """
  sweep = experiment_config.SweepConfig(
      alphas=tuple(alphas or exp.sweep.alphas),
      keep_ratios=tuple(keep_ratios or exp.sweep.keep_ratios)).validate()
  if not (out or exp.output_dir):
    raise errors.ConfigError(
        'An output directory is required: pass --out, set output_dir in the '
        f'config or {experiment_config.OUTPUT_DIR_ENV}')
  out = epath.Path(out or exp.output_dir)
  base = _run_config(exp, seed, out / 'shared')
  data = datasets.load(base.dataset)
  shared = pipeline.run_hce(base, resume=True, data=data,
                            stop_after=pipeline.STAGE_QUANTIZE)
  rows = []
  for keep in sweep.keep_ratios:
    for alpha in sweep.alphas:
      cfg = base.replace(
          loss=dataclasses.replace(base.loss, alpha=alpha),
          schedule=dataclasses.replace(base.schedule,
                                       target_keep_ratio=keep),
          output_dir=str(out / f'keep_{keep:g}' / f'alpha_{alpha:g}'))
      logging.info('Sweep row keep=%g alpha=%g', keep, alpha)
      result = pipeline.run_hce(cfg, resume=resume, baseline=shared.baseline,
                                quantized=shared.quantized, data=data)
      reports.write_run_report(result.run_dir)
      report = result.report
      rows.append({
          'keep_ratio': keep,
          'alpha': alpha,
          'accuracy_o': report['accuracy']['O'],
          'accuracy_q': report['accuracy']['Q'],
          'accuracy_s': report['accuracy']['S_compact'],
          'accuracy_ensemble':
              report['ensemble_accuracy'][report['ensemble_mode']],
          'overlap_ratio': report['diversity']['overlap_ratio'],
          'fingerprint_o': report['fingerprints']['O'],
          'fingerprint_q': report['fingerprints']['Q'],
          'digest_o': report['digests']['O'],
          'digest_q': report['digests']['Q'],
          'run_dir': str(result.run_dir),
      })
  summary = {'alphas': list(sweep.alphas),
             'keep_ratios': list(sweep.keep_ratios), 'rows': rows}
  io_utils.write_json(out / reports.SWEEP_FILENAME, summary)
  reports.write_sweep_report(out)
  run_registry.RunRegistry.for_output(out).register(
      'sweep-alpha', out, exp.to_dict(), num_rows=len(rows))
  return summary


def evaluate(run_dir: epath.PathLike,
             batch_size: int = 256) -> Dict[str, Any]:
  """Accuracies of every model a run directory holds, on its test split."""
  run_dir = epath.Path(run_dir)
  cfg = run_config_from_dir(run_dir)
  artifacts = pipeline.load_artifacts(run_dir)
  _, test = datasets.load(cfg.dataset)
  members = {'O': artifacts.baseline, 'Q': artifacts.quantized,
             'S': artifacts.pruned}
  members = {k: v for k, v in members.items() if v is not None}
  if not members:
    raise errors.InputError(f'{run_dir} holds no checkpoint to evaluate')
  results = {k: eval_lib.evaluate(v, test, batch_size).to_dict()
             for k, v in members.items()}
  if artifacts.pruned is not None and artifacts.quantized is not None:
    for mode in ensemble_analysis.MODES:
      ens = ensemble_analysis.Ensemble(artifacts.pruned, artifacts.quantized,
                                       mode)
      results[f'ensemble_{mode}'] = eval_lib.evaluate(ens, test,
                                                      batch_size).to_dict()
  io_utils.write_json(run_dir / EVALUATION_FILENAME, results)
  return results


def diversity_report(run_dir: Optional[epath.PathLike] = None,
                     counts: Optional[Tuple[int, int, int]] = None
                    ) -> Tuple[ensemble_analysis.DiversityReport, str]:
  """Diversity statistics from a run's error sets or from raw counts.

  Args:
    run_dir: a finished run directory.
    counts: (|E_Q|, |E_S|, |E_Q & E_S|), used instead of a run.

  Returns:
    (report, rendered text).
  """
  if counts is not None:
    sets = ensemble_analysis.sets_from_counts(*counts)
  elif run_dir is not None:
    raw = io_utils.read_json(pipeline.raw_report_path(run_dir))
    sets = ensemble_analysis.ErrorSets.from_dict(raw['error_sets'])
  else:
    raise errors.ConfigError('diversity-report needs --run_dir or --counts')
  report = ensemble_analysis.diversity_report(sets)
  text = (io_utils.dumps(report.to_dict()) +
          ensemble_analysis.render_venn(sets))
  return report, text


def visualize_region(run_dir: epath.PathLike,
                     points: Sequence[int],
                     *,
                     seed: int = 0,
                     extent: float = region_viz.DEFAULT_EXTENT,
                     resolution: int = region_viz.DEFAULT_RESOLUTION,
                     series: bool = False,
                     out: Optional[epath.PathLike] = None) -> Dict[str, Any]:
  """Decision-region panels around test points of a run.

  Panels show O / Q / S / HCE, or with `series` the baseline next to its
  quantized and one-shot pruned variants without fine-tuning.
  """
  run_dir = epath.Path(run_dir)
  cfg = run_config_from_dir(run_dir)
  artifacts = pipeline.load_artifacts(run_dir)
  if artifacts.baseline is None:
    raise errors.InputError(f'{run_dir} holds no baseline checkpoint')
  train, test = datasets.load(cfg.dataset)
  if series:
    predictors = region_viz.compression_series(artifacts.baseline, train,
                                               quant=cfg.quant)
  else:
    predictors = {'O': artifacts.baseline}
    if artifacts.quantized is not None:
      predictors['Q'] = artifacts.quantized
    if artifacts.pruned is not None:
      predictors['S'] = artifacts.pruned
    if artifacts.quantized is not None and artifacts.pruned is not None:
      predictors['HCE'] = ensemble_analysis.Ensemble(artifacts.pruned,
                                                     artifacts.quantized)
  out = epath.Path(out) if out else run_dir / 'regions'
  summary = {}
  for index in points:
    if not 0 <= index < len(test):
      raise errors.InputError(
          f'Point {index} is outside the test split of {len(test)} samples')
    grids = region_viz.compare_on_shared_plane(
        predictors, test.images[index], seed, extent, resolution)
    tag = f'{"series" if series else "point"}_{index}'
    summary[tag] = region_viz.export_panels(grids, out, tag)['summary']
  return summary


def cost_report(exp: Optional[experiment_config.ExperimentConfig] = None,
                run_dir: Optional[epath.PathLike] = None) -> str:
  """Per-layer cost tables of O, Q, S and HCE plus O's parameter summary.

  With a run directory the pruned member's cost follows its actual mask;
  otherwise it is predicted from the sparsity schedule.
  """
  if run_dir is not None:
    cfg = run_config_from_dir(run_dir)
    artifacts = pipeline.load_artifacts(run_dir)
    mask = artifacts.mask
    if mask is None:
      raise errors.InputError(f'{run_dir} holds no pruned model')
    if mask.granularity == 'filter':
      _, s_spec = pruner.compact(artifacts.pruned, mask)
    else:
      s_spec = artifacts.pruned.spec
    densities = mask.densities()
  elif exp is not None:
    cfg = exp.run_config(output_dir='')
    keep = cfg.schedule.target_keep_ratio
    if cfg.schedule.granularity == 'filter':
      s_spec, densities = pruner.pruned_spec(cfg.network, keep), {}
    else:
      s_spec = cfg.network
      densities = {k: keep for k in pruner.unstructured_entries(s_spec)}
  else:
    raise errors.ConfigError('cost-report needs --config or --run_dir')
  base = cost_model.cost_report(cfg.network, 'O')
  quantized_layers = quantizer.quantized_layer_names(
      cfg.network, cfg.quant.exempt_first_last)
  exempt = [l.name for l in models.weighted_layers(cfg.network)
            if l.name not in quantized_layers]
  q = cost_model.cost_report(
      cfg.network, 'Q', bits=(cfg.quant.weight_bits, cfg.quant.activation_bits),
      exempt_layers=exempt, baseline=base)
  s = cost_model.cost_report(s_spec, 'S', densities=densities, baseline=base)
  hce = cost_model.hce_cost(s, q, base)
  parts = [cost_model.render_cost_table(r) for r in (base, q, s, hce)]
  parts.append(cost_model.render_parameter_summary(
      cost_model.parameter_summary(cfg.network)))
  return '\n'.join(parts)


def report(directory: epath.PathLike) -> Dict[str, epath.Path]:
  return reports.write_report(directory)
