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

r"""Experiment configs: the resolved dataclass tree and its JSON form.

A config file either stands alone or extends a registered experiment:

  {
    "base_experiment": "ToySyntheticHce",
    "name": "toy_alpha05",
    "loss": {"alpha": 0.5},
    "training": {"epochs": 4}
  }

Parsing is strict: an unknown key, a value of the wrong type or a missing
required key raises ConfigError naming the dotted key path. Only paths can
be overridden from the environment (HCEKIT_DATASET_PATH, HCEKIT_OUTPUT_DIR).
"""

import dataclasses
import json
import os
import typing
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from etils import epath

from hcekit import datasets
from hcekit import errors
from hcekit import hce_losses
from hcekit import io_utils
from hcekit import models
from hcekit import pipeline
from hcekit import pruner
from hcekit import quantizer
from hcekit import trainer_lib

BASE_EXPERIMENT_KEY = 'base_experiment'
DATASET_PATH_ENV = 'HCEKIT_DATASET_PATH'
OUTPUT_DIR_ENV = 'HCEKIT_OUTPUT_DIR'
# Keys a config file without `base_experiment` must set.
REQUIRED_KEYS = ('name', 'network', 'dataset')


@dataclasses.dataclass(frozen=True)
class SweepConfig:
  """Grid of the alpha ablation: every alpha at every keep ratio."""
  alphas: Tuple[float, ...] = (0.1, 0.3, 0.5, 0.7, 0.9)
  keep_ratios: Tuple[float, ...] = (0.5, 0.25)

  def validate(self, prefix: str = 'sweep') -> 'SweepConfig':
    if not self.alphas or not self.keep_ratios:
      raise errors.ConfigError(
          f'{prefix}.alphas and {prefix}.keep_ratios must not be empty')
    for a in self.alphas:
      if not 0.0 <= a <= 1.0:
        raise errors.ConfigError(
            f'{prefix}.alphas entries must lie in [0, 1], got {a}')
    for r in self.keep_ratios:
      if not 0.0 < r <= 1.0:
        raise errors.ConfigError(
            f'{prefix}.keep_ratios entries must lie in (0, 1], got {r}')
    return self


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
  """A resolved experiment: run components, seed list and sweep grid."""
  name: str
  network: models.NetworkSpec = pipeline.HceRunConfig.network
  dataset: datasets.DatasetConfig = datasets.DatasetConfig()
  training: trainer_lib.TrainingConfig = trainer_lib.TrainingConfig()
  finetune: trainer_lib.TrainingConfig = pipeline.HceRunConfig.finetune
  quant: quantizer.QuantConfig = quantizer.QuantConfig()
  schedule: pruner.SparsitySchedule = pruner.SparsitySchedule()
  loss: hce_losses.HceLossConfig = hce_losses.HceLossConfig()
  report: pipeline.ReportConfig = pipeline.ReportConfig()
  sweep: SweepConfig = SweepConfig()
  seeds: Tuple[int, ...] = (0,)
  output_dir: Optional[str] = None

  def run_config(self, seed: Optional[int] = None,
                 output_dir: Optional[str] = None,
                 **changes: Any) -> pipeline.HceRunConfig:
    """The pipeline config of one run (first seed unless given)."""
    cfg = pipeline.HceRunConfig(
        name=self.name,
        network=self.network,
        dataset=self.dataset,
        training=self.training,
        finetune=self.finetune,
        quant=self.quant,
        schedule=self.schedule,
        loss=self.loss,
        report=self.report,
        seed=self.seeds[0] if seed is None else seed,
        output_dir=self.output_dir if output_dir is None else output_dir)
    return cfg.replace(**changes) if changes else cfg

  def validate(self) -> 'ExperimentConfig':
    if not self.name:
      raise errors.ConfigError('name must not be empty')
    if not self.seeds:
      raise errors.ConfigError('seeds must not be empty')
    self.run_config().validate()
    self.sweep.validate()
    return self

  def replace(self, **changes: Any) -> 'ExperimentConfig':
    return dataclasses.replace(self, **changes)

  def to_dict(self) -> Dict[str, Any]:
    d = dataclasses.asdict(self)
    d['network'] = self.network.to_dict()
    return io_utils.normalize(d)


def _join(path: str, key: str) -> str:
  return f'{path}.{key}' if path else key


def _type_error(path: str, expected: str, value: Any) -> errors.ConfigError:
  return errors.ConfigError(
      f'{path} must be {expected}, got {type(value).__name__} {value!r}')


def _coerce(value: Any, hint: Any, path: str) -> Any:
  """Checks `value` against a type hint and converts lists to tuples."""
  origin = typing.get_origin(hint)
  args = typing.get_args(hint)
  if origin is Union:
    if value is None and type(None) in args:
      return None
    inner = [a for a in args if a is not type(None)]
    return _coerce(value, inner[0], path)
  if dataclasses.is_dataclass(hint):
    return parse_dataclass(hint, value, path)
  if origin is tuple:
    if not isinstance(value, (list, tuple)):
      raise _type_error(path, 'a list', value)
    if len(args) == 2 and args[1] is Ellipsis:
      return tuple(
          _coerce(v, args[0], f'{path}[{i}]') for i, v in enumerate(value))
    if args and len(value) != len(args):
      raise errors.ConfigError(
          f'{path} must have {len(args)} entries, got {len(value)}')
    return tuple(
        _coerce(v, a, f'{path}[{i}]')
        for i, (v, a) in enumerate(zip(value, args)))
  if hint is bool:
    if not isinstance(value, bool):
      raise _type_error(path, 'a boolean', value)
  elif hint is int:
    if isinstance(value, bool) or not isinstance(value, int):
      raise _type_error(path, 'an integer', value)
  elif hint is float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
      raise _type_error(path, 'a number', value)
    return float(value)
  elif hint is str:
    if not isinstance(value, str):
      raise _type_error(path, 'a string', value)
  return value


def parse_dataclass(cls: Any, data: Any, path: str = '',
                    required: Tuple[str, ...] = ()) -> Any:
  """Builds dataclass `cls` from a JSON mapping, strictly.

  Raises:
    ConfigError: on unknown keys, wrong types or missing required keys,
      naming the dotted key path.
  """
  if not isinstance(data, Mapping):
    raise _type_error(path or '<config>', 'an object', data)
  fields = {f.name: f for f in dataclasses.fields(cls)}
  for key in data:
    if key not in fields:
      raise errors.ConfigError(
          f'Unknown key {_join(path, key)}; expected one of {sorted(fields)}')
  hints = typing.get_type_hints(cls)
  kwargs = {}
  for name, field in fields.items():
    has_default = (field.default is not dataclasses.MISSING or
                   field.default_factory is not dataclasses.MISSING)
    if name not in data:
      if not has_default or name in required:
        raise errors.ConfigError(f'Missing required key {_join(path, name)}')
      continue
    kwargs[name] = _coerce(data[name], hints[name], _join(path, name))
  return cls(**kwargs)


def _deep_merge(base: Mapping[str, Any],
                override: Mapping[str, Any]) -> Dict[str, Any]:
  out = dict(base)
  for k, v in override.items():
    if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
      out[k] = _deep_merge(out[k], v)
    else:
      out[k] = v
  return out


def apply_env_overrides(data: Mapping[str, Any],
                        env: Optional[Mapping[str, str]] = None
                       ) -> Dict[str, Any]:
  """Applies the path-only environment overrides to a config mapping."""
  env = os.environ if env is None else env
  out = dict(data)
  if env.get(DATASET_PATH_ENV):
    dataset = dict(out.get('dataset') or {})
    dataset['path'] = env[DATASET_PATH_ENV]
    out['dataset'] = dataset
  if env.get(OUTPUT_DIR_ENV):
    out['output_dir'] = env[OUTPUT_DIR_ENV]
  return out


def config_from_dict(data: Mapping[str, Any],
                     env: Optional[Mapping[str, str]] = None
                    ) -> ExperimentConfig:
  """Resolves a config mapping (with optional `base_experiment`)."""
  # Imported here: registered experiments import this module.
  from hcekit import experiment_registry  # pylint: disable=g-import-not-at-top

  if not isinstance(data, Mapping):
    raise _type_error('<config>', 'an object', data)
  data = dict(data)
  base_name = data.pop(BASE_EXPERIMENT_KEY, None)
  required = REQUIRED_KEYS
  if base_name is not None:
    if not isinstance(base_name, str):
      raise _type_error(BASE_EXPERIMENT_KEY, 'a string', base_name)
    base = experiment_registry.get_experiment(base_name)()
    data = _deep_merge(base.experiment_config().to_dict(), data)
    required = ()
  data = apply_env_overrides(data, env)
  return parse_dataclass(ExperimentConfig, data, '', required).validate()


def load_config(path: epath.PathLike,
                env: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
  """Reads and resolves a JSON config file.

  Raises:
    ConfigError: if the file is missing, not JSON or not a valid config.
  """
  path = epath.Path(path)
  if not path.exists():
    raise errors.ConfigError(f'Config file not found: {path}')
  try:
    data = json.loads(path.read_text())
  except json.JSONDecodeError as e:
    raise errors.ConfigError(f'Config file {path} is not valid JSON: {e}') from e
  return config_from_dict(data, env)


def resolve(name_or_path: str,
            env: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
  """A JSON file path, or the name of a registered experiment."""
  if name_or_path.endswith('.json') or epath.Path(name_or_path).exists():
    return load_config(name_or_path, env)
  return config_from_dict({BASE_EXPERIMENT_KEY: name_or_path}, env)
