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

"""The four-stage HCE procedure with checkpointing and resume.

  1. train the full-precision, full-size model O;
  2. quantize O into Q and freeze Q;
  3. prune a copy of O into S, fine-tuning it on the diversity-aware
     objective built from the frozen O and Q;
  4. evaluate O, Q, S and the ensemble {S, Q} and write the raw report.

Run directory layout:

  <run_dir>/config.json
  <run_dir>/stages.jsonl
  <run_dir>/metrics.jsonl
  <run_dir>/stage_1_baseline/{checkpoint/, stage_manifest.json}
  <run_dir>/stage_2_quantize/{checkpoint/, stage_manifest.json}
  <run_dir>/stage_3_prune/step_XX/{checkpoint/, mask/, progress.json}
  <run_dir>/stage_3_prune/stage_manifest.json
  <run_dir>/stage_4_report/{raw_report.json, regions/}

A run owns its directory; resume is possible after stage 1, after stage 2 and
after every prune step.
"""

import dataclasses
import time
from typing import Any, Dict, List, Mapping, Optional, Tuple

from absl import logging
from etils import epath
import numpy as np

from hcekit import checkpoints
from hcekit import cost_model
from hcekit import datasets
from hcekit import ensemble_analysis
from hcekit import errors
from hcekit import eval_lib
from hcekit import hce_losses
from hcekit import io_utils
from hcekit import metric_utils
from hcekit import models
from hcekit import pruner
from hcekit import quantizer
from hcekit import region_viz
from hcekit import trainer_lib
from hcekit import train_states

STAGE_BASELINE = 'baseline'
STAGE_QUANTIZE = 'quantize'
STAGE_PRUNE = 'prune'
STAGE_REPORT = 'report'
STAGE_DIRS = {
    STAGE_BASELINE: 'stage_1_baseline',
    STAGE_QUANTIZE: 'stage_2_quantize',
    STAGE_PRUNE: 'stage_3_prune',
    STAGE_REPORT: 'stage_4_report',
}
CONFIG_FILENAME = 'config.json'
STAGES_FILENAME = 'stages.jsonl'
STAGE_MANIFEST_FILENAME = 'stage_manifest.json'
RAW_REPORT_FILENAME = 'raw_report.json'
STATUSES = ('trained', 'restored', 'shared', 'failed')


@dataclasses.dataclass(frozen=True)
class ReportConfig:
  """What the final report holds beyond accuracies, costs and diversity.

  Attributes:
    ensemble_modes: averaging domains evaluated; the first one is used for
      the error sets and the diversity statistics.
    deep_ensemble: also train a second baseline from another initialization
      and report the two-full-model ensemble.
    region_grids: render decision-region panels O / Q / S / HCE.
    region_points: test points per panel kind.
    region_resolution: odd grid resolution.
    region_extent: half-width of the plane in units of ||v|| / sqrt(d).
    region_seed: direction seed; every panel shares it.
    eval_batch_size: inference batch size.
  """
  ensemble_modes: Tuple[str, ...] = ('probability', 'logit')
  deep_ensemble: bool = False
  region_grids: bool = False
  region_points: int = 2
  region_resolution: int = 51
  region_extent: float = 2.0
  region_seed: int = 0
  eval_batch_size: int = 256

  def validate(self, prefix: str = 'report') -> 'ReportConfig':
    if not self.ensemble_modes:
      raise errors.ConfigError(f'{prefix}.ensemble_modes must not be empty')
    for mode in self.ensemble_modes:
      if mode not in ensemble_analysis.MODES:
        raise errors.ConfigError(
            f'{prefix}.ensemble_modes entries must be one of '
            f'{ensemble_analysis.MODES}, got {mode!r}')
    if self.region_resolution < 3 or self.region_resolution % 2 == 0:
      raise errors.ConfigError(
          f'{prefix}.region_resolution must be odd and >= 3')
    if self.region_extent < 0 or self.region_points < 0:
      raise errors.ConfigError(
          f'{prefix}.region_extent and {prefix}.region_points must be >= 0')
    if self.eval_batch_size < 1:
      raise errors.ConfigError(f'{prefix}.eval_batch_size must be >= 1')
    return self


@dataclasses.dataclass(frozen=True)
class HceRunConfig:
  """Everything one pipeline run depends on.

  Attributes:
    name: run name.
    network: architecture of O (and Q, and S before compaction).
    dataset: data source.
    training: optimizer and epochs of the baseline.
    finetune: optimizer of the fine-tuning of S; the number of epochs comes
      from `schedule.finetune_epochs_per_step`, `finetune.epochs` is unused.
    quant: post-training quantization of Q.
    schedule: sparsity schedule of S.
    loss: objective of S.
    report: contents of the final report.
    seed: initialization, shuffling and fine-tuning seed.
    output_dir: run directory; None keeps everything in memory.
  """
  name: str = 'hce'
  network: models.NetworkSpec = models.NetworkSpec(
      family='plain', depth=8, input_shape=(3, 8, 8))
  dataset: datasets.DatasetConfig = datasets.DatasetConfig()
  training: trainer_lib.TrainingConfig = trainer_lib.TrainingConfig()
  finetune: trainer_lib.TrainingConfig = trainer_lib.TrainingConfig(
      epochs=0, learning_rate=0.01)
  quant: quantizer.QuantConfig = quantizer.QuantConfig()
  schedule: pruner.SparsitySchedule = pruner.SparsitySchedule()
  loss: hce_losses.HceLossConfig = hce_losses.HceLossConfig()
  report: ReportConfig = ReportConfig()
  seed: int = 0
  output_dir: Optional[str] = None

  def validate(self) -> 'HceRunConfig':
    """Validates every component and their agreement.

    Raises:
      ConfigError: naming the offending key.
    """
    self.network.validate()
    self.dataset.validate()
    self.training.validate('training')
    self.finetune.validate('finetune')
    self.quant.validate('quant')
    self.schedule.validate('schedule')
    self.loss.validate('loss')
    self.report.validate('report')
    if self.network.input_shape != self.dataset.input_shape:
      raise errors.ConfigError(
          f'network.input_shape {self.network.input_shape} does not match '
          f'the dataset input shape {self.dataset.input_shape}')
    if self.network.num_classes != self.dataset.num_classes:
      raise errors.ConfigError(
          f'network.num_classes={self.network.num_classes} does not match '
          f'dataset.num_classes={self.dataset.num_classes}')
    return self

  def to_dict(self) -> Dict[str, Any]:
    d = dataclasses.asdict(self)
    d['network'] = self.network.to_dict()
    return d

  def replace(self, **changes: Any) -> 'HceRunConfig':
    return dataclasses.replace(self, **changes)


@dataclasses.dataclass
class HceResult:
  """Outputs of a run: the three models, the final mask and the report."""
  baseline: models.ParameterStore
  quantized: Optional[quantizer.QuantizedModel] = None
  pruned: Optional[models.ParameterStore] = None
  mask: Optional[pruner.PruneMask] = None
  report: Optional[Dict[str, Any]] = None
  run_dir: Optional[epath.Path] = None


def stage_dir(run_dir: epath.PathLike, stage: str) -> epath.Path:
  return epath.Path(run_dir) / STAGE_DIRS[stage]


def prune_step_dir(run_dir: epath.PathLike, step: int) -> epath.Path:
  return stage_dir(run_dir, STAGE_PRUNE) / f'step_{step:02d}'


def raw_report_path(run_dir: epath.PathLike) -> epath.Path:
  return stage_dir(run_dir, STAGE_REPORT) / RAW_REPORT_FILENAME


class StageLog:
  """Appends one record per stage to `stages.jsonl`."""

  def __init__(self, run_dir: Optional[epath.Path]):
    self._path = None if run_dir is None else run_dir / STAGES_FILENAME
    self.records: List[Dict[str, Any]] = []

  @property
  def completed(self) -> List[str]:
    return [r['stage'] for r in self.records if r['status'] != 'failed']

  def record(self, stage: str, status: str, **fields: Any) -> None:
    if status not in STATUSES:
      raise ValueError(f'Unknown stage status {status!r}')
    record = {'stage': stage, 'status': status, 'time': time.time()}
    record.update(fields)
    self.records.append(record)
    if self._path is not None:
      io_utils.append_jsonl(self._path, [record])
    logging.info('Stage %s: %s', stage, status)


def read_stage_log(run_dir: epath.PathLike) -> List[Dict[str, Any]]:
  return io_utils.read_jsonl(epath.Path(run_dir) / STAGES_FILENAME)


class MaskedFinetuner:
  """The `train_step` of iterative pruning: one epoch of masked training.

  The optimizer state (and learning-rate schedule) restarts whenever the
  mask changes, i.e. at every prune step.
  """

  def __init__(self,
               trainer: trainer_lib.Trainer,
               data: datasets.Dataset,
               extras: Optional[Mapping[str, np.ndarray]] = None):
    self.trainer = trainer
    self.data = data
    self.extras = dict(extras or {})
    self._mask = None
    self._state = None
    self._multipliers = None

  def __call__(self, store: models.ParameterStore, mask: pruner.PruneMask,
               finetune_epoch: int) -> models.ParameterStore:
    if mask is not self._mask:
      self._mask = mask
      self._state = self.trainer.init_state(store)
      self._multipliers = pruner.mask_multipliers(store.spec, mask)
    else:
      params, stats = train_states.split_entries(dict(store.entries))
      self._state = self._state.replace(params=params, model_state=stats)
    self._state, _ = self.trainer.train_epoch(
        self._state, self.data, finetune_epoch, self._multipliers,
        self.extras)
    return self.trainer.to_store(self._state, store)


def _write_stage_manifest(directory: Optional[epath.Path], stage: str,
                          inputs: Mapping[str, Any],
                          outputs: Mapping[str, Any]) -> None:
  if directory is None:
    return
  io_utils.write_json(directory / STAGE_MANIFEST_FILENAME, {
      'stage': stage, 'inputs': dict(inputs), 'outputs': dict(outputs)})


def _read_stage_inputs(directory: epath.Path) -> Optional[Dict[str, Any]]:
  path = directory / STAGE_MANIFEST_FILENAME
  if not path.exists():
    return None
  return io_utils.read_json(path)['inputs']


def _model_ids(model: Any) -> Dict[str, str]:
  return {'fingerprint': model.fingerprint, 'digest': model.digest()}


def _prepare_run_dir(cfg: HceRunConfig, resume: bool) -> Optional[epath.Path]:
  """Creates the run directory and records the resolved config.

  Raises:
    ConfigError: when resuming with a different config, or when starting a
      fresh run in a directory that already holds one.
  """
  if not cfg.output_dir:
    if resume:
      raise errors.ConfigError('output_dir is required to resume a run')
    return None
  run_dir = epath.Path(cfg.output_dir)
  run_dir.mkdir(parents=True, exist_ok=True)
  config_path = run_dir / CONFIG_FILENAME
  resolved = cfg.to_dict()
  if config_path.exists():
    previous = io_utils.read_json(config_path)
    if resume and previous != io_utils.normalize(resolved):
      raise errors.ConfigError(
          f'Cannot resume {run_dir}: its config.json differs from the given '
          'config')
    if not resume and (run_dir / STAGES_FILENAME).exists():
      raise errors.ConfigError(
          f'{run_dir} already holds a run; pass --resume or choose another '
          '--out')
  io_utils.write_json(config_path, resolved)
  return run_dir


def _latest_prune_progress(run_dir: Optional[epath.Path],
                           spec: models.NetworkSpec,
                           seed: int) -> Optional[pruner.PruneProgress]:
  if run_dir is None:
    return None
  latest = None
  step = 1
  while True:
    d = prune_step_dir(run_dir, step)
    if not (checkpoints.is_checkpoint(d / 'checkpoint') and
            checkpoints.is_checkpoint(d / 'mask') and
            (d / 'progress.json').exists()):
      break
    latest = d
    step += 1
  if latest is None:
    return None
  store = checkpoints.restore_store(latest / 'checkpoint')
  if store.spec != spec:
    raise errors.InputError(
        f'Prune checkpoint {latest} holds architecture {store.spec}, expected '
        f'{spec}')
  progress = io_utils.read_json(latest / 'progress.json')
  return pruner.PruneProgress(
      step=progress['step'], store=store.replace(seed=seed),
      mask=checkpoints.restore_mask(latest / 'mask'),
      history=progress['history'])


def _stage_baseline(cfg, run_dir, log, train, writer, baseline):
  directory = None if run_dir is None else stage_dir(run_dir, STAGE_BASELINE)
  ckpt = None if directory is None else directory / 'checkpoint'
  inputs = {'dataset': train.digest(), 'seed': cfg.seed}
  if baseline is not None:
    if baseline.spec != cfg.network:
      raise errors.InputError(
          f'Shared baseline has architecture {baseline.fingerprint}, the '
          f'config asks for {cfg.network}')
    status, model = 'shared', baseline
  elif (ckpt is not None and checkpoints.is_checkpoint(ckpt) and
        _read_stage_inputs(directory) == io_utils.normalize(inputs)):
    status, model = 'restored', checkpoints.restore_store(ckpt)
  else:
    status = 'trained'
    model = trainer_lib.train_baseline(cfg.network, train, cfg.training,
                                       seed=cfg.seed, metrics_writer=writer)
  if ckpt is not None and status != 'restored':
    checkpoints.save_store(model, ckpt)
    _write_stage_manifest(directory, STAGE_BASELINE, inputs,
                          _model_ids(model))
  log.record(STAGE_BASELINE, status, **_model_ids(model))
  return model


def _stage_quantize(cfg, run_dir, log, train, baseline, quantized):
  directory = None if run_dir is None else stage_dir(run_dir, STAGE_QUANTIZE)
  ckpt = None if directory is None else directory / 'checkpoint'
  inputs = {'O': _model_ids(baseline), 'quant': cfg.quant.to_dict()}
  if quantized is not None:
    if quantized.fingerprint != baseline.fingerprint:
      raise errors.InputError(
          f'Shared Q ({quantized.fingerprint}) does not match O '
          f'({baseline.fingerprint})')
    if quantized.config != cfg.quant:
      raise errors.ConfigError(
          'Shared Q was built with a different quant config than this run')
    status, model = 'shared', quantized
  elif (ckpt is not None and checkpoints.is_checkpoint(ckpt) and
        _read_stage_inputs(directory) == io_utils.normalize(inputs)):
    status, model = 'restored', checkpoints.restore_quantized(ckpt)
  else:
    status = 'trained'
    model = quantizer.quantize_model(baseline, train, cfg.quant)
  if ckpt is not None and status != 'restored':
    checkpoints.save_quantized(model, ckpt)
    _write_stage_manifest(directory, STAGE_QUANTIZE, inputs,
                          _model_ids(model))
  log.record(STAGE_QUANTIZE, status, source=baseline.digest(),
             **_model_ids(model))
  return model


def _stage_prune(cfg, run_dir, log, train, baseline, quantized, writer,
                 resume):
  """Iterative pruning of a copy of O with the HCE objective."""
  directory = None if run_dir is None else stage_dir(run_dir, STAGE_PRUNE)
  targets = hce_losses.precompute_targets(
      baseline, quantized, train.images, cfg.loss.temperature,
      cfg.report.eval_batch_size)
  trainer = trainer_lib.Trainer(
      cfg.network, cfg.finetune, len(train),
      hce_losses.HceObjective(cfg.loss), seed=cfg.seed, stage=STAGE_PRUNE,
      metrics_writer=writer)
  finetuner = MaskedFinetuner(trainer, train, targets)
  progress = None
  if resume:
    progress = _latest_prune_progress(run_dir, cfg.network, cfg.seed)
    if progress is not None and progress.history and (
        _read_stage_inputs(directory) or {}).get('O') != baseline.digest():
      logging.warning('Prune checkpoints in %s were built from another O; '
                      'starting over', directory)
      progress = None

  def save_step(p: pruner.PruneProgress) -> None:
    log.record(f'{STAGE_PRUNE}/step_{p.step:02d}', 'trained',
               **_model_ids(p.store))
    if run_dir is None:
      return
    d = prune_step_dir(run_dir, p.step)
    checkpoints.save_store(p.store, d / 'checkpoint', step=p.step)
    checkpoints.save_mask(p.mask, p.store.spec, d / 'mask', step=p.step)
    io_utils.write_json(d / 'progress.json',
                        {'step': p.step, 'history': p.history})

  if directory is not None:
    _write_stage_manifest(directory, STAGE_PRUNE,
                          {'O': baseline.digest(), 'Q': quantized.digest(),
                           'loss': dataclasses.asdict(cfg.loss),
                           'schedule': dataclasses.asdict(cfg.schedule)}, {})
  if progress is not None and progress.step >= cfg.schedule.steps:
    pruned, mask, history = progress.store, progress.mask, progress.history
    log.record(STAGE_PRUNE, 'restored', **_model_ids(pruned))
  else:
    if progress is not None:
      log.record(f'{STAGE_PRUNE}/step_{progress.step:02d}', 'restored',
                 **_model_ids(progress.store))
    pruned, mask, history = pruner.iterative_prune(
        baseline, cfg.schedule, finetuner, resume_from=progress,
        step_callback=save_step)
    log.record(STAGE_PRUNE, 'trained', source_o=baseline.digest(),
               source_q=quantized.digest(), **_model_ids(pruned))
  if directory is not None:
    _write_stage_manifest(directory, STAGE_PRUNE,
                          {'O': baseline.digest(), 'Q': quantized.digest(),
                           'loss': dataclasses.asdict(cfg.loss),
                           'schedule': dataclasses.asdict(cfg.schedule)},
                          _model_ids(pruned))
  return pruned, mask, history


def _pick_region_points(labels: np.ndarray, q_pred: np.ndarray,
                        ens_pred: np.ndarray,
                        count: int) -> Dict[str, List[int]]:
  q_right = np.flatnonzero(q_pred == labels)
  corrected = np.flatnonzero((q_pred != labels) & (ens_pred == labels))
  return {'q_correct': q_right[:count].tolist(),
          'ensemble_corrects_q': corrected[:count].tolist()}


def _region_panels(cfg, run_dir, test, predictors, points):
  out = {}
  for kind, indices in points.items():
    for index in indices:
      grids = region_viz.compare_on_shared_plane(
          predictors, test.images[index], cfg.report.region_seed,
          cfg.report.region_extent, cfg.report.region_resolution,
          cfg.report.eval_batch_size)
      tag = f'{kind}_{index}'
      if run_dir is not None:
        exported = region_viz.export_panels(
            grids, stage_dir(run_dir, STAGE_REPORT) / 'regions', tag)
        out[tag] = exported['summary']
      else:
        out[tag] = {name: {'roughness': region_viz.roughness(g.labels),
                           'center_label': g.center_label}
                    for name, g in grids.items()}
  return out


def evaluate_members(cfg: HceRunConfig,
                     baseline: models.ParameterStore,
                     quantized: quantizer.QuantizedModel,
                     pruned: models.ParameterStore,
                     mask: pruner.PruneMask,
                     data: datasets.Dataset) -> Dict[str, Any]:
  """Accuracies, error sets, diversity and costs of O, Q, S and {S, Q}."""
  bs = cfg.report.eval_batch_size
  scores = {
      'O': eval_lib.predict_scores(baseline, data.images, bs),
      'Q': eval_lib.predict_scores(quantized, data.images, bs),
      'S': eval_lib.predict_scores(pruned, data.images, bs),
  }
  if mask.granularity == 'filter':
    compacted, s_spec = pruner.compact(pruned, mask)
    scores['S_compact'] = eval_lib.predict_scores(compacted, data.images, bs)
  else:
    compacted, s_spec = pruned, pruned.spec
    scores['S_compact'] = scores['S']
  predictions = {k: np.argmax(v, axis=-1) for k, v in scores.items()}
  accuracy = {
      k: eval_lib.result_from_predictions(p, data.labels).accuracy
      for k, p in predictions.items()
  }
  ensemble_accuracy, ensemble_predictions = {}, {}
  for mode in cfg.report.ensemble_modes:
    pred = ensemble_analysis.ensemble_predict(scores['S'], scores['Q'], mode)
    ensemble_predictions[mode] = pred
    ensemble_accuracy[mode] = eval_lib.result_from_predictions(
        pred, data.labels).accuracy
  mode = cfg.report.ensemble_modes[0]
  sets = ensemble_analysis.error_sets(
      {'Q': predictions['Q'], 'S': predictions['S'],
       'ens': ensemble_predictions[mode], 'O': predictions['O']},
      data.labels)
  diversity = ensemble_analysis.diversity_report(sets)
  if ensemble_accuracy[mode] < max(accuracy['Q'], accuracy['S']):
    logging.warning('Ensemble accuracy %.4f is below its best member '
                    '(Q %.4f, S %.4f)', ensemble_accuracy[mode],
                    accuracy['Q'], accuracy['S'])

  base_cost = cost_model.cost_report(cfg.network, 'O')
  quantized_layers = quantizer.quantized_layer_names(
      cfg.network, cfg.quant.exempt_first_last)
  exempt = [l.name for l in models.weighted_layers(cfg.network)
            if l.name not in quantized_layers]
  q_cost = cost_model.cost_report(
      cfg.network, 'Q', bits=(cfg.quant.weight_bits, cfg.quant.activation_bits),
      exempt_layers=exempt, baseline=base_cost)
  s_cost = cost_model.cost_report(s_spec, 'S', densities=mask.densities(),
                                  baseline=base_cost)
  hce_cost = cost_model.hce_cost(s_cost, q_cost, base_cost)
  return {
      'num_samples': len(data),
      'accuracy': accuracy,
      'ensemble_accuracy': ensemble_accuracy,
      'ensemble_mode': mode,
      'masked_compacted_max_diff': float(
          np.max(np.abs(scores['S'] - scores['S_compact']))),
      'error_sets': sets.to_dict(),
      'diversity': diversity.to_dict(),
      'venn': ensemble_analysis.venn_table(sets),
      'cost': {
          'O': base_cost.to_dict(),
          'Q': q_cost.to_dict(),
          'S': s_cost.to_dict(),
          'HCE': hce_cost.to_dict(),
      },
      'fingerprints': {
          'O': baseline.fingerprint,
          'Q': quantized.fingerprint,
          'S': pruned.fingerprint,
          'S_compact': compacted.fingerprint,
      },
      'digests': {
          'O': baseline.digest(),
          'Q': quantized.digest(),
          'S': pruned.digest(),
      },
      '_predictions': {'Q': predictions['Q'],
                       'ens': ensemble_predictions[mode]},
  }


def _stage_report(cfg, run_dir, log, train, test, baseline, quantized,
                  pruned, mask, history, q_digest_before):
  data = test if len(test) else train
  report = evaluate_members(cfg, baseline, quantized, pruned, mask, data)
  predictions = report.pop('_predictions')
  report.update({
      'name': cfg.name,
      'seed': cfg.seed,
      'alpha': cfg.loss.alpha,
      'target_keep_ratio': cfg.schedule.target_keep_ratio,
      'granularity': cfg.schedule.granularity,
      'eval_split': 'test' if len(test) else 'train',
      'q_frozen': quantized.digest() == q_digest_before,
      'prune_history': history,
      'keep_fractions': mask.keep_fractions(),
      'deep_ensemble': None,
      'regions': None,
  })
  if cfg.report.deep_ensemble:
    second = trainer_lib.train_baseline(cfg.network, train, cfg.training,
                                        seed=cfg.seed + 1)
    ens = ensemble_analysis.Ensemble(baseline, second)
    base_flops = report['cost']['O']['totals']['effective_flops']
    report['deep_ensemble'] = {
        'accuracy': eval_lib.evaluate(ens, data,
                                      cfg.report.eval_batch_size).accuracy,
        'second_member_accuracy': eval_lib.evaluate(
            second, data, cfg.report.eval_batch_size).accuracy,
        'flops': 2 * base_flops,
        'ratio': 2.0,
    }
  if cfg.report.region_grids and len(test):
    points = _pick_region_points(data.labels, predictions['Q'],
                                 predictions['ens'], cfg.report.region_points)
    predictors = {
        'O': baseline, 'Q': quantized, 'S': pruned,
        'HCE': ensemble_analysis.Ensemble(pruned, quantized,
                                          report['ensemble_mode']),
    }
    report['regions'] = {'points': points,
                         'panels': _region_panels(cfg, run_dir, data,
                                                  predictors, points)}
  if run_dir is not None:
    io_utils.write_json(raw_report_path(run_dir), report)
  log.record(STAGE_REPORT, 'trained')
  return report


def run_hce(cfg: HceRunConfig,
            *,
            resume: bool = False,
            baseline: Optional[models.ParameterStore] = None,
            quantized: Optional[quantizer.QuantizedModel] = None,
            data: Optional[Tuple[datasets.Dataset, datasets.Dataset]] = None,
            stop_after: Optional[str] = None) -> HceResult:
  """Runs (or resumes) the four stages.

  Args:
    cfg: run configuration.
    resume: reuse the checkpoints of completed stages in `cfg.output_dir`.
    baseline: a shared, already trained O (alpha sweeps).
    quantized: a shared Q built from `baseline`.
    data: (train, test) to use instead of loading `cfg.dataset`.
    stop_after: last stage to run ('baseline', 'quantize', 'prune');
      None runs all four.

  Returns:
    An HceResult.

  Raises:
    ConfigError: if the config is invalid.
    StageError: if a stage fails; the checkpoints of completed stages stay
      on disk and a rerun with `resume=True` continues from them.
  """
  cfg.validate()
  if stop_after is not None and stop_after not in STAGE_DIRS:
    raise errors.ConfigError(
        f'stop_after must be one of {sorted(STAGE_DIRS)}, got {stop_after!r}')
  run_dir = _prepare_run_dir(cfg, resume)
  log = StageLog(run_dir)
  writer = metric_utils.MetricsWriter(run_dir)
  stage = 'data'
  try:
    train, test = data if data is not None else datasets.load(cfg.dataset)
    stage = STAGE_BASELINE
    o = _stage_baseline(cfg, run_dir, log, train, writer, baseline)
    if stop_after == STAGE_BASELINE:
      return HceResult(o, run_dir=run_dir)
    stage = STAGE_QUANTIZE
    q = _stage_quantize(cfg, run_dir, log, train, o, quantized)
    q_digest = q.digest()
    if stop_after == STAGE_QUANTIZE:
      return HceResult(o, q, run_dir=run_dir)
    stage = STAGE_PRUNE
    s, mask, history = _stage_prune(cfg, run_dir, log, train, o, q, writer,
                                    resume)
    if q.digest() != q_digest:
      raise errors.InputError('Q changed while training S')
    if stop_after == STAGE_PRUNE:
      return HceResult(o, q, s, mask, run_dir=run_dir)
    stage = STAGE_REPORT
    report = _stage_report(cfg, run_dir, log, train, test, o, q, s, mask,
                           history, q_digest)
  except errors.ConfigError:
    raise
  except Exception as e:  # pylint: disable=broad-except
    log.record(stage, 'failed', error=repr(e))
    raise errors.StageError(stage, log.completed, e) from e
  return HceResult(o, q, s, mask, report, run_dir)


@dataclasses.dataclass
class RunArtifacts:
  """Models restored from a finished (or partially finished) run."""
  config: Dict[str, Any]
  baseline: Optional[models.ParameterStore] = None
  quantized: Optional[quantizer.QuantizedModel] = None
  pruned: Optional[models.ParameterStore] = None
  mask: Optional[pruner.PruneMask] = None


def load_artifacts(run_dir: epath.PathLike) -> RunArtifacts:
  """Restores every model a run directory holds.

  Raises:
    InputError: if `run_dir` is not a run directory.
  """
  run_dir = epath.Path(run_dir)
  config = io_utils.read_json(run_dir / CONFIG_FILENAME)
  out = RunArtifacts(config)
  ckpt = stage_dir(run_dir, STAGE_BASELINE) / 'checkpoint'
  if checkpoints.is_checkpoint(ckpt):
    out.baseline = checkpoints.restore_store(ckpt)
  ckpt = stage_dir(run_dir, STAGE_QUANTIZE) / 'checkpoint'
  if checkpoints.is_checkpoint(ckpt):
    out.quantized = checkpoints.restore_quantized(ckpt)
  step = 1
  while checkpoints.is_checkpoint(prune_step_dir(run_dir, step) /
                                  'checkpoint'):
    step += 1
  if step > 1:
    d = prune_step_dir(run_dir, step - 1)
    out.pruned = checkpoints.restore_store(d / 'checkpoint')
    out.mask = checkpoints.restore_mask(d / 'mask')
  return out
