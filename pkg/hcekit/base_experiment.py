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

"""Definition of an HCE experiment.

Specifically, BaseExperiment encapsulates all the hyperparameters related
to one HCE experiment: the network, the data, the three training stages and
the report. Subclasses override the methods they need; every method returns
an immutable component config.
"""

import abc
from typing import Tuple, Type, TypeVar

from hcekit import datasets
from hcekit import experiment_config
from hcekit import hce_losses
from hcekit import models
from hcekit import pipeline
from hcekit import pruner
from hcekit import quantizer
from hcekit import trainer_lib

_BaseExperimentT = TypeVar('_BaseExperimentT', bound='BaseExperiment')
BaseExperimentT = Type[_BaseExperimentT]


class BaseExperiment(metaclass=abc.ABCMeta):
  """Encapsulates the hyperparameters of an experiment."""

  @abc.abstractmethod
  def network(self) -> models.NetworkSpec:
    """Returns the architecture of the baseline O."""

  @abc.abstractmethod
  def dataset(self) -> datasets.DatasetConfig:
    """Returns the data source."""

  def name(self) -> str:
    return self.__class__.__name__

  def training(self) -> trainer_lib.TrainingConfig:
    """Returns the optimizer of the baseline."""
    return trainer_lib.TrainingConfig()

  def finetune(self) -> trainer_lib.TrainingConfig:
    """Returns the optimizer of the pruned member's fine-tuning."""
    return trainer_lib.TrainingConfig(epochs=0, learning_rate=0.01)

  def quant(self) -> quantizer.QuantConfig:
    return quantizer.QuantConfig()

  def schedule(self) -> pruner.SparsitySchedule:
    return pruner.SparsitySchedule()

  def loss(self) -> hce_losses.HceLossConfig:
    return hce_losses.HceLossConfig()

  def report(self) -> pipeline.ReportConfig:
    return pipeline.ReportConfig()

  def sweep(self) -> experiment_config.SweepConfig:
    return experiment_config.SweepConfig()

  def seeds(self) -> Tuple[int, ...]:
    return (0,)

  def experiment_config(self) -> experiment_config.ExperimentConfig:
    """Assembles the resolved ExperimentConfig of this experiment."""
    return experiment_config.ExperimentConfig(
        name=self.name(),
        network=self.network(),
        dataset=self.dataset(),
        training=self.training(),
        finetune=self.finetune(),
        quant=self.quant(),
        schedule=self.schedule(),
        loss=self.loss(),
        report=self.report(),
        sweep=self.sweep(),
        seeds=tuple(self.seeds()))

  def validate(self) -> None:
    """Validates the experiment config but raises if misconfigured."""
    self.experiment_config().validate()
