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

"""Utility helpers for IO."""

import dataclasses
import json
import os
import uuid
from typing import Any, Iterable, List, Mapping

from etils import epath
import jax
import numpy as np

from hcekit import errors


class JnpEncoder(json.JSONEncoder):
  """jax.numpy compatible encoder: https://github.com/mpld3/mpld3/issues/434."""

  def default(self, o: Any) -> Any:
    if isinstance(o, jax.Array):
      return np.asarray(o).tolist()
    elif isinstance(o, np.integer):
      return int(o)
    elif isinstance(o, np.floating):
      return float(o)
    elif isinstance(o, np.ndarray):
      return o.tolist()
    elif isinstance(o, bytes):
      return o.decode('utf-8')
    elif dataclasses.is_dataclass(o):
      return dataclasses.asdict(o)
    elif isinstance(o, np.bool_):
      return bool(o)
    elif isinstance(o, (set, frozenset)):
      return sorted(o)
    else:
      return super().default(o)


def dumps(obj: Any) -> str:
  """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
  return json.dumps(obj, cls=JnpEncoder, indent=2, sort_keys=True) + '\n'


def write_text_atomic(path: epath.PathLike, text: str) -> epath.Path:
  """Writes `text` next to `path` and renames it into place."""
  path = epath.Path(path)
  path.parent.mkdir(parents=True, exist_ok=True)
  tmp = path.parent / f'.tmp_{path.name}.{uuid.uuid4().hex}'
  tmp.write_text(text)
  os.replace(os.fspath(tmp), os.fspath(path))
  return path


def write_json(path: epath.PathLike, obj: Any) -> epath.Path:
  return write_text_atomic(path, dumps(obj))


def read_json(path: epath.PathLike) -> Any:
  path = epath.Path(path)
  if not path.exists():
    raise errors.InputError(f'Missing file: {path}')
  try:
    return json.loads(path.read_text())
  except json.JSONDecodeError as e:
    raise errors.InputError(f'Malformed JSON in {path}: {e}') from e


def append_jsonl(path: epath.PathLike,
                 records: Iterable[Mapping[str, Any]]) -> None:
  """Appends one JSON object per line."""
  path = epath.Path(path)
  path.parent.mkdir(parents=True, exist_ok=True)
  with path.open('a') as f:
    for record in records:
      f.write(json.dumps(record, cls=JnpEncoder, sort_keys=True) + '\n')


def read_jsonl(path: epath.PathLike) -> List[Any]:
  path = epath.Path(path)
  if not path.exists():
    return []
  contents = []
  with path.open('r') as f:
    for line in f:
      line = line.strip()
      if line:
        contents.append(json.loads(line))
  return contents


def normalize(obj: Any) -> Any:
  """`obj` as it reads back from JSON (tuples become lists, keys strings)."""
  return json.loads(dumps(obj))
