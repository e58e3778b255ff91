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

"""CIFAR ResNets with identity (option A) shortcuts on reduced CIFAR-10.

The dataset path comes from HCEKIT_DATASET_PATH or the config file.
"""

from hcekit import base_experiment
from hcekit import datasets
from hcekit import experiment_registry
from hcekit import hce_losses
from hcekit import models
from hcekit import pruner
from hcekit import quantizer
from hcekit import trainer_lib


@experiment_registry.register
class CifarResNet20(base_experiment.BaseExperiment):
  """ResNet20, 3/3-bit Q, half of every block's first-conv filters kept."""
  DEPTH = 20
  IMAGE_SIZE = 32
  TRAIN_SIZE = 5000
  TEST_SIZE = 1000
  DATASET_PATH = None

  NUM_EPOCHS = 30
  BATCH_SIZE = 128
  LEARNING_RATE = 0.1
  WEIGHT_DECAY = 1e-4

  BITS = 3
  KEEP_RATIO = 0.5
  PRUNE_STEPS = 5
  FINETUNE_EPOCHS_PER_STEP = 2
  ALPHA = 0.3
  TEMPERATURE = 4.0

  def network(self) -> models.NetworkSpec:
    return models.NetworkSpec(
        family='resnet', depth=self.DEPTH, num_classes=10,
        input_shape=(3, self.IMAGE_SIZE, self.IMAGE_SIZE))

  def dataset(self) -> datasets.DatasetConfig:
    return datasets.DatasetConfig(
        name='cifar10', path=self.DATASET_PATH, num_classes=10,
        train_size=self.TRAIN_SIZE, test_size=self.TEST_SIZE,
        image_size=self.IMAGE_SIZE)

  def training(self) -> trainer_lib.TrainingConfig:
    return trainer_lib.TrainingConfig(
        epochs=self.NUM_EPOCHS, batch_size=self.BATCH_SIZE,
        learning_rate=self.LEARNING_RATE, weight_decay=self.WEIGHT_DECAY,
        nesterov=True,
        lr_decay_epochs=(self.NUM_EPOCHS // 2, 3 * self.NUM_EPOCHS // 4))

  def finetune(self) -> trainer_lib.TrainingConfig:
    return trainer_lib.TrainingConfig(
        epochs=0, batch_size=self.BATCH_SIZE, learning_rate=0.01,
        weight_decay=self.WEIGHT_DECAY, nesterov=True)

  def quant(self) -> quantizer.QuantConfig:
    return quantizer.QuantConfig(weight_bits=self.BITS,
                                 activation_bits=self.BITS)

  def schedule(self) -> pruner.SparsitySchedule:
    return pruner.SparsitySchedule(
        target_keep_ratio=self.KEEP_RATIO, steps=self.PRUNE_STEPS,
        finetune_epochs_per_step=self.FINETUNE_EPOCHS_PER_STEP)

  def loss(self) -> hce_losses.HceLossConfig:
    return hce_losses.HceLossConfig(alpha=self.ALPHA,
                                    temperature=self.TEMPERATURE)


@experiment_registry.register
class CifarResNet56(CifarResNet20):
  DEPTH = 56
