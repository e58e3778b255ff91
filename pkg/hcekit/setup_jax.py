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

r"""Utilities to set up JAX global configs."""

import dataclasses

from absl import logging
import jax

_CONFIGURED = False


@dataclasses.dataclass(frozen=True)
class JaxOptions:
  """Process-wide JAX settings of a CLI invocation.

  Attributes:
    enable_x64: use 64-bit floats (gradient checks); training uses float32.
    enable_checks: turn on jax_enable_checks.
    log_compiles: log every compilation.
    traceback_filtering: one of off, auto, tracebackhide, remove_frames.
    matmul_precision: default matmul precision.
  """
  enable_x64: bool = False
  enable_checks: bool = False
  log_compiles: bool = False
  traceback_filtering: str = 'auto'
  matmul_precision: str = 'highest'


def setup_jax(options: JaxOptions = JaxOptions()) -> None:
  """Configures JAX once per process and logs the devices."""
  global _CONFIGURED
  if _CONFIGURED:
    logging.info('JAX already configured; ignoring %s', options)
    return
  jax.config.update('jax_enable_x64', options.enable_x64)
  jax.config.update('jax_log_compiles', options.log_compiles)
  # https://github.com/google/jax/blob/main/jax/_src/config.py
  jax.config.update('jax_traceback_filtering', options.traceback_filtering)
  jax.config.update('jax_default_matmul_precision', options.matmul_precision)
  if options.enable_checks:
    jax.config.update('jax_enable_checks', True)
    logging.info('jax_enable_checks has been enabled.')
  _CONFIGURED = True

  logging.info('JAX devices: %r', jax.devices())
  logging.info('jax.device_count(): %d', jax.device_count())
  logging.info('jax.default_backend(): %s', jax.default_backend())
