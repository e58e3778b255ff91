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

"""Exception types raised across hcekit."""

from typing import Optional, Sequence


class HceError(Exception):
  """Base class of every error raised by hcekit."""


class ConfigError(HceError, ValueError):
  """An experiment or component configuration is invalid."""


class InputError(HceError, ValueError):
  """Data, shapes or stored artifacts do not match what an operation needs."""


class NumericError(HceError, FloatingPointError):
  """A loss or a probability became non-finite or non-positive."""

  def __init__(self,
               message: str,
               epoch: Optional[int] = None,
               batch_index: Optional[int] = None):
    if epoch is not None:
      message = f'{message} (epoch={epoch}, batch={batch_index})'
    super().__init__(message)
    self.epoch = epoch
    self.batch_index = batch_index


class StageError(HceError, RuntimeError):
  """A pipeline stage failed; completed stages remain checkpointed."""

  def __init__(self, stage: str, completed_stages: Sequence[str],
               cause: BaseException):
    super().__init__(
        f'Stage `{stage}` failed: {cause!r}. Completed and checkpointed '
        f'stages: {list(completed_stages)}. Rerun with --resume to continue.')
    self.stage = stage
    self.completed_stages = list(completed_stages)
