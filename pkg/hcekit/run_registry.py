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

"""Flat directory of per-run JSON manifests.

Each invocation that produces artifacts adds `<registry>/<run_id>.json`;
nothing is ever rewritten, so concurrent CLI runs only need the atomic
rename of a new file.
"""

import hashlib
import time
from typing import Any, Dict, List, Mapping, Optional
import uuid

from etils import epath

from hcekit import errors
from hcekit import io_utils

REGISTRY_DIRNAME = 'registry'


def config_digest(config: Mapping[str, Any]) -> str:
  return hashlib.sha256(io_utils.dumps(config).encode('utf-8')).hexdigest()[:16]


class RunRegistry:
  """Lists and records runs under one registry directory."""

  def __init__(self, directory: epath.PathLike):
    self.directory = epath.Path(directory)

  @classmethod
  def for_output(cls, run_dir: epath.PathLike) -> 'RunRegistry':
    """The registry shared by every run directory under the same parent."""
    return cls(epath.Path(run_dir).parent / REGISTRY_DIRNAME)

  def register(self, command: str, run_dir: epath.PathLike,
               config: Mapping[str, Any], **fields: Any) -> Dict[str, Any]:
    digest = config_digest(config)
    run_id = f'{command}-{digest[:8]}-{uuid.uuid4().hex[:8]}'
    record = {
        'run_id': run_id,
        'command': command,
        'name': config.get('name'),
        'run_dir': str(run_dir),
        'config_digest': digest,
        'created': time.time(),
    }
    record.update(fields)
    io_utils.write_json(self.directory / f'{run_id}.json', record)
    return record

  def list(self, command: Optional[str] = None) -> List[Dict[str, Any]]:
    """Records sorted by creation time, optionally filtered by command."""
    if not self.directory.exists():
      return []
    records = [io_utils.read_json(p) for p in self.directory.glob('*.json')]
    if command is not None:
      records = [r for r in records if r.get('command') == command]
    return sorted(records, key=lambda r: (r['created'], r['run_id']))

  def get(self, run_id: str) -> Dict[str, Any]:
    path = self.directory / f'{run_id}.json'
    if not path.exists():
      raise errors.InputError(f'No run {run_id!r} in {self.directory}')
    return io_utils.read_json(path)
