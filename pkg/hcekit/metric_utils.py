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

"""Utility functions for structured training metrics."""

import numbers
from typing import Any, Dict, List, Mapping, Optional

from absl import logging
from etils import epath
import jax
import numpy as np

from hcekit import io_utils

METRICS_FILENAME = 'metrics.jsonl'


def is_scalar(v: Any) -> bool:
  """Returns True if input is a scalar."""
  if isinstance(v, numbers.Number):
    return True
  if isinstance(v, (np.ndarray, jax.Array)):
    return v.ndim == 0 or v.size == 1
  return False


def as_float_dict(metrics: Mapping[str, Any]) -> Dict[str, float]:
  """Returns a float dict, dropping non-scalar values."""
  results = {}
  for k, v in metrics.items():
    if isinstance(v, bool) or not is_scalar(v):
      continue
    results[k] = float(np.asarray(v).reshape(()))
  return results


class MetricsWriter:
  """Appends one JSON record per training step to `metrics.jsonl`.

  Records always carry `stage` and `step`; anything scalar passed to
  `write` is added as a float. A writer without a directory only keeps the
  records in memory, which is what tests and sweeps without output use.
  """

  def __init__(self, directory: Optional[epath.PathLike] = None,
               log_every_n_steps: int = 50):
    self._path = (None if directory is None else
                  epath.Path(directory) / METRICS_FILENAME)
    self._log_every_n_steps = log_every_n_steps
    self.records: List[Dict[str, Any]] = []

  @property
  def path(self) -> Optional[epath.Path]:
    return self._path

  def write(self, stage: str, step: int, **values: Any) -> Dict[str, Any]:
    record = {'stage': stage, 'step': int(step)}
    for k, v in values.items():
      if isinstance(v, (str, bool)) or v is None:
        record[k] = v
      elif isinstance(v, numbers.Integral):
        record[k] = int(v)
    record.update(as_float_dict({
        k: v for k, v in values.items()
        if not isinstance(v, (str, bool, numbers.Integral)) and v is not None
    }))
    self.records.append(record)
    if self._path is not None:
      io_utils.append_jsonl(self._path, [record])
    if self._log_every_n_steps and step % self._log_every_n_steps == 0:
      logging.info('[%s] step %d: %s', stage, step, {
          k: v for k, v in record.items() if k not in ('stage', 'step')})
    return record

  def read(self) -> List[Dict[str, Any]]:
    if self._path is None:
      return list(self.records)
    return io_utils.read_jsonl(self._path)
