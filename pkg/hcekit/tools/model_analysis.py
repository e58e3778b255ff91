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

r"""Compute FLOPs or list parameters of a registered experiment's network.

**************
Example usage:
**************

python hcekit/tools/model_analysis.py -- \
  --usage=flops \
  --exp=vision.cifar_resnets.CifarResNet56

**************
Example output (--usage=flops):
**************

##### vision.cifar_resnets.CifarResNet56 #####

MFLOPs (analytic, 1 MAC = 1 FLOP) = 125.49
MFLOPs (Q equivalent, 3/3-bit) = 49.10

--usage=xla compares the analytic count with XLA's cost analysis of the
compiled forward pass (halved, XLA counts multiply and add separately);
XLA also counts normalization and activation work, so it reads slightly
higher. --usage=params prints the per-entry parameter table.
"""

from typing import Sequence

from absl import app
from absl import flags
import jax
import jax.numpy as jnp

from hcekit import cost_model
from hcekit import experiment_registry
from hcekit import models


_USAGE = flags.DEFINE_enum(
    'usage', 'flops', ['flops', 'params', 'xla'],
    'The purpose of using this script.')
_EXP = flags.DEFINE_string(
    'exp', None, 'The registered experiment to analyze.')


class ExperimentParser:
  """Analyzes the network of one registered experiment."""

  def __init__(self, exp_name: str):
    self.exp_name = exp_name
    self.exp = experiment_registry.get_experiment(exp_name)()
    self.spec = self.exp.network().validate()

  def flops(self) -> str:
    base = cost_model.cost_report(self.spec, 'O')
    quant = self.exp.quant()
    q = cost_model.cost_report(
        self.spec, 'Q', bits=(quant.weight_bits, quant.activation_bits))
    return (f'\n##### {self.exp_name} #####\n\n'
            f'MFLOPs (analytic, 1 MAC = 1 FLOP) = '
            f'{base.totals["flops"] / 1e6:.2f}\n'
            f'MFLOPs (Q equivalent, {quant.weight_bits}/'
            f'{quant.activation_bits}-bit) = '
            f'{q.totals["effective_flops"] / 1e6:.2f}\n')

  def xla_flops(self) -> str:
    store = models.build_model(self.spec, seed=0)
    datum = jnp.zeros((1,) + self.spec.input_shape, jnp.float32)
    fprop = jax.jit(lambda e, x: models.apply_network(e, x, spec=self.spec)[0])
    analysis = fprop.lower(store.entries, datum).compile().cost_analysis()
    if isinstance(analysis, list):
      analysis = analysis[0]
    xla = analysis['flops'] / 2.0
    analytic = cost_model.cost_report(self.spec).totals['flops']
    return (f'\n##### {self.exp_name} #####\n\n'
            f'MFLOPs analytic = {analytic / 1e6:.2f}\n'
            f'MFLOPs XLA / 2  = {xla / 1e6:.2f}\n')

  def params(self) -> str:
    return cost_model.render_parameter_summary(
        cost_model.parameter_summary(self.spec))


def main(argv: Sequence[str]) -> None:
  if len(argv) > 1:
    raise app.UsageError('Too many command-line arguments.')
  parser = ExperimentParser(_EXP.value)
  if _USAGE.value == 'flops':
    print(parser.flops())
  elif _USAGE.value == 'xla':
    print(parser.xla_flops())
  else:
    print(parser.params())


if __name__ == '__main__':
  flags.mark_flag_as_required('exp')
  app.run(main)
