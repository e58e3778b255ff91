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

"""Stores current checkpoint version and version history."""

#
# Past versions:
# 1.1
# - Quantized checkpoints carry a 'quant_manifest.json' next to the arrays,
#   holding the bit-widths, the weight scales and the activation ranges.
#
# 1.0
# - A checkpoint is a directory holding 'arrays.msgpack' (flat name -> array
#   map) and 'manifest.json' with the architecture, fingerprint, content
#   digest, seed and step.

_VERSION: float = 1.1
_VERSION_KEY: str = 'version'


def get_version() -> float:
  return _VERSION


def get_version_key() -> str:
  return _VERSION_KEY


def is_compatible(version: float) -> bool:
  """Checkpoints are readable across minor versions of the same major."""
  return int(version) == int(_VERSION)
