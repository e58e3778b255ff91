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

"""A registry of experiment classes.

Experiments register under their full module path; any dotted suffix of it
("synthetic.ToySyntheticHce", "ToySyntheticHce") is a secondary key as long
as it is unambiguous. For modules under a `params` package the path without
the `params` component is a key too ("vision.cifar_resnets.CifarResNet20").
"""

import collections
import functools
import importlib
import traceback
from typing import Dict, List, Mapping, Optional, Sequence

from absl import logging

from hcekit import base_experiment
from hcekit import errors

BaseExperimentT = base_experiment.BaseExperimentT

# Modules imported on a lookup miss before giving up.
DEFAULT_EXPERIMENT_MODULES = (
    'hcekit.tasks.test.synthetic',
    'hcekit.tasks.vision.params.cifar_resnets',
)


def _being_reloaded() -> bool:
  """Returns whether we are being called from importlib.reload."""
  for s in traceback.extract_stack():
    if s.name == 'reload' and s.filename == importlib.__file__:
      return True
  return False


class _ExperimentRegistryHelper:
  """Global registry keyed by canonical experiment path."""

  _registry: Dict[str, BaseExperimentT] = {}
  _registry_tags: Dict[str, List[str]] = {}
  _secondary_keys = collections.defaultdict(list)

  @classmethod
  def secondary_keys(cls, canonical_key: str) -> List[str]:
    parts = canonical_key.split('.')
    keys = {'.'.join(parts[i:]) for i in range(len(parts))}
    if 'params' in parts[1:]:
      idx = parts.index('params')
      without = parts[:idx] + parts[idx + 1:]
      keys.update('.'.join(without[i:]) for i in range(idx))
    return sorted(keys)

  @classmethod
  def register(cls,
               experiment_class: Optional[BaseExperimentT] = None,
               *,
               tags: Optional[Sequence[str]] = None,
               allow_overwrite: bool = False):
    """Registers an experiment class; usable as a (parameterized) decorator.

    Usage example:
      @experiment_registry.register
      class MyExperiment(base_experiment.BaseExperiment):
        ...

      @experiment_registry.register(tags=['acceptance'])
      class MySlowExperiment(base_experiment.BaseExperiment):
        ...

    Args:
      experiment_class: a BaseExperiment subclass.
      tags: free-form string tags.
      allow_overwrite: allow re-registering the same class path; implied
        when a module is reloaded.

    Returns:
      experiment_class itself.

    Raises:
      ValueError: if the class path is already registered.
    """
    if experiment_class is None:
      return functools.partial(
          cls.register, allow_overwrite=allow_overwrite, tags=tags)
    if _being_reloaded():
      allow_overwrite = True
    canonical_key = f'{experiment_class.__module__}.{experiment_class.__name__}'
    preexisting = canonical_key in cls._registry
    if preexisting and not allow_overwrite:
      raise ValueError(f'Experiment already registered: {canonical_key}')
    cls._registry[canonical_key] = experiment_class
    cls._registry_tags[canonical_key] = list(tags or [])
    logging.vlog(1, 'Registered experiment `%s`%s', canonical_key,
                 ' (overwritten)' if preexisting else '')
    if not preexisting:
      for k in cls.secondary_keys(canonical_key):
        cls._secondary_keys[k].append(canonical_key)
    return experiment_class

  @classmethod
  def get(cls, key: str) -> Optional[BaseExperimentT]:
    """Returns the unique experiment matching `key`, or None.

    Raises:
      ConfigError: if `key` matches several experiments.
    """
    canonical_keys = cls._secondary_keys.get(key)
    if not canonical_keys:
      return None
    if len(canonical_keys) > 1:
      raise errors.ConfigError(
          f'key={key} does not uniquely identify an experiment. possible '
          f'matches: {", ".join(canonical_keys)}')
    return cls._registry.get(canonical_keys[0])

  @classmethod
  def get_registry_tags(cls, key: str) -> List[str]:
    return cls._registry_tags.get(key, [])

  @classmethod
  def get_all(cls) -> Mapping[str, BaseExperimentT]:
    return cls._registry


register = _ExperimentRegistryHelper.register
get = _ExperimentRegistryHelper.get
get_all = _ExperimentRegistryHelper.get_all
get_registry_tags = _ExperimentRegistryHelper.get_registry_tags


def get_experiment(name: str) -> BaseExperimentT:
  """Looks `name` up, importing its module or the default modules on a miss.

  Raises:
    ConfigError: if no registered experiment matches.
  """
  experiment_class = get(name)
  if experiment_class is not None:
    return experiment_class
  candidates = list(DEFAULT_EXPERIMENT_MODULES)
  if '.' in name:
    candidates.insert(0, name.rsplit('.', 1)[0])
  for module_name in candidates:
    try:
      importlib.import_module(module_name)
    except ModuleNotFoundError:
      continue
    experiment_class = get(name)
    if experiment_class is not None:
      return experiment_class
  raise errors.ConfigError(f'Could not find experiment `{name}`.')
