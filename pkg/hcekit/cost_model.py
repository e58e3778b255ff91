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

"""Analytic MACs / FLOPs / BOPs accounting from shapes and bit-widths.

Conventions:
  * FLOPs = MACs: one fused multiply-accumulate counts as one FLOP. This is
    the convention under which ResNet56 on 32x32 inputs costs ~126.8M.
  * BOPs = MACs * b_w * b_a for a quantized layer.
  * Float32-equivalent FLOPs = BOPs / 23, the fraction bits of a float32.
  * Normalization, activation and residual additions are not counted.

A quantized layer contributes its equivalent FLOPs to a model's effective
cost, a full-precision layer its FLOPs.
"""

import dataclasses
import json
import math
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from hcekit import errors
from hcekit import models

FLOAT32_FRACTION_BITS = 23


def count_macs(spec: models.NetworkSpec) -> Dict[str, int]:
  """Per-layer MACs in execution order.

  conv: C_in * C_out * k^2 * H_out * W_out; dense: in * out.
  """
  macs = {}
  for layer in models.weighted_layers(spec):
    if layer.kind == 'conv':
      macs[layer.name] = (layer.in_channels * layer.out_channels *
                          layer.kernel_size**2 * math.prod(layer.out_hw))
    else:
      macs[layer.name] = layer.in_channels * layer.out_channels
  return macs


def bops_of_quantized(
    macs: Union[int, Mapping[str, int]], weight_bits: int,
    activation_bits: int) -> Union[int, Dict[str, int]]:
  """BOPs = MACs * b_w * b_a, for one count or a per-layer map."""
  for bits in (weight_bits, activation_bits):
    if bits < 2:
      raise errors.ConfigError(f'bits must be >= 2, got {bits}')
  if isinstance(macs, Mapping):
    return {k: v * weight_bits * activation_bits for k, v in macs.items()}
  return macs * weight_bits * activation_bits


def equivalent_flops(bops: float) -> float:
  """Float32-equivalent FLOPs of a BOP count."""
  if bops < 0:
    raise errors.InputError(f'bops must be >= 0, got {bops}')
  return bops / FLOAT32_FRACTION_BITS


@dataclasses.dataclass(frozen=True)
class LayerCost:
  """One row; bops/eq_flops are None for full-precision layers."""
  layer: str
  macs: int
  flops: int
  bops: Optional[int] = None
  eq_flops: Optional[float] = None

  @property
  def effective_flops(self) -> float:
    return self.flops if self.eq_flops is None else self.eq_flops


@dataclasses.dataclass(frozen=True)
class CostReport:
  """Per-layer costs of one model and their totals."""
  name: str
  rows: Tuple[LayerCost, ...]
  baseline_name: Optional[str] = None
  baseline_flops: Optional[float] = None
  # Set on ensemble reports: the pruned member's share of the total.
  pruned_member_flops: Optional[float] = None

  @property
  def totals(self) -> Dict[str, float]:
    return {
        'macs': sum(r.macs for r in self.rows),
        'flops': sum(r.flops for r in self.rows),
        'bops': sum(r.bops or 0 for r in self.rows),
        'eq_flops': sum(r.eq_flops or 0.0 for r in self.rows),
        'effective_flops': sum(r.effective_flops for r in self.rows),
    }

  @property
  def ratio(self) -> Optional[float]:
    """Effective FLOPs relative to the baseline's."""
    if not self.baseline_flops:
      return None
    return self.totals['effective_flops'] / self.baseline_flops

  def to_dict(self) -> Dict[str, Any]:
    return {
        'name': self.name,
        'rows': [dataclasses.asdict(r) for r in self.rows],
        'baseline_name': self.baseline_name,
        'baseline_flops': self.baseline_flops,
        'pruned_member_flops': self.pruned_member_flops,
        'totals': self.totals,
        'ratio': self.ratio,
    }

  @classmethod
  def from_dict(cls, d: Mapping[str, Any]) -> 'CostReport':
    return cls(
        name=d['name'],
        rows=tuple(LayerCost(**r) for r in d['rows']),
        baseline_name=d.get('baseline_name'),
        baseline_flops=d.get('baseline_flops'),
        pruned_member_flops=d.get('pruned_member_flops'))


def cost_report(spec: models.NetworkSpec,
                name: str = 'model',
                bits: Optional[Tuple[int, int]] = None,
                exempt_layers: Sequence[str] = (),
                densities: Optional[Mapping[str, float]] = None,
                baseline: Optional[CostReport] = None) -> CostReport:
  """Cost of `spec`, optionally quantized and/or weight-sparse.

  Args:
    spec: architecture, compacted specs included.
    name: report name.
    bits: (b_w, b_a) for a quantized model; None for full precision.
    exempt_layers: layers kept in full precision in a quantized model.
    densities: kernel entry name -> fraction of non-zero weights, for
      unstructured sparsity; MACs scale by it.
    baseline: report the ratio is taken against.

  Returns:
    A CostReport.
  """
  densities = densities or {}
  rows = []
  for layer, macs in count_macs(spec).items():
    density = densities.get(f'{layer}/kernel', 1.0)
    if density != 1.0:
      macs = int(round(macs * density))
    if bits is not None and layer not in exempt_layers:
      bops = bops_of_quantized(macs, *bits)
      rows.append(LayerCost(layer, macs, macs, bops, equivalent_flops(bops)))
    else:
      rows.append(LayerCost(layer, macs, macs))
  baseline_flops = None
  if baseline is not None:
    baseline_flops = baseline.totals['effective_flops']
  return CostReport(name, tuple(rows),
                    None if baseline is None else baseline.name,
                    baseline_flops)


def hce_cost(s_report: CostReport, q_report: Optional[CostReport],
             baseline: CostReport) -> CostReport:
  """Cost of the ensemble: S FLOPs plus Q equivalent FLOPs.

  Both totals are kept: `totals['effective_flops']` for the whole ensemble
  and `pruned_member_flops` for S alone.

  Raises:
    InputError: if a member was measured against another baseline.
  """
  members = [('S', s_report)] + ([('Q', q_report)] if q_report else [])
  for tag, report in members:
    if report.baseline_name not in (None, baseline.name):
      raise errors.InputError(
          f'{tag} report uses baseline {report.baseline_name!r}, expected '
          f'{baseline.name!r}')
  rows = tuple(
      dataclasses.replace(r, layer=f'{tag}:{r.layer}')
      for tag, report in members for r in report.rows)
  return CostReport('HCE', rows, baseline.name,
                    baseline.totals['effective_flops'],
                    pruned_member_flops=s_report.totals['effective_flops'])


def _fmt(v: Optional[float]) -> str:
  if v is None:
    return '-'
  if isinstance(v, int):
    return str(v)
  return f'{v:.1f}'


def render_cost_table(report: CostReport) -> str:
  """One row per layer plus a JSON totals footer line."""
  header = ('layer', 'MACs', 'FLOPs', 'BOPs', 'eqFLOPs')
  body: List[Tuple[str, ...]] = [
      (r.layer, _fmt(r.macs), _fmt(r.flops), _fmt(r.bops), _fmt(r.eq_flops))
      for r in report.rows
  ]
  widths = [max(len(row[i]) for row in [header] + body) for i in range(5)]
  lines = [f'# cost report: {report.name}']
  for row in [header] + body:
    lines.append('  '.join(
        cell.ljust(widths[i]) if i == 0 else cell.rjust(widths[i])
        for i, cell in enumerate(row)).rstrip())
  footer = dict(report.totals)
  footer['ratio'] = report.ratio
  footer['baseline'] = report.baseline_name
  if report.pruned_member_flops is not None:
    footer['pruned_member_flops'] = report.pruned_member_flops
  lines.append('# totals: ' + json.dumps(footer, sort_keys=True))
  return '\n'.join(lines) + '\n'


@dataclasses.dataclass(frozen=True)
class ParamRow:
  name: str
  shape: Tuple[int, ...]
  size: int
  kind: str  # 'trainable' or 'statistic'


def parameter_summary(spec: models.NetworkSpec) -> List[ParamRow]:
  """One row per stored entry, in layer execution order."""
  return [
      ParamRow(name, tuple(shape), math.prod(shape),
               'statistic' if models.is_statistic(name) else 'trainable')
      for name, shape in models.entry_shapes(spec).items()
  ]


def render_parameter_summary(rows: Sequence[ParamRow]) -> str:
  width = max([len(r.name) for r in rows] + [4]) + 2
  lines = [f'{r.name:<{width}}{str(r.shape):<20}{r.size:>10}  {r.kind}'
           for r in rows]
  lines.append('=' * (width + 40))
  lines.append(f'Total #params (all): {sum(r.size for r in rows)}')
  for kind in ('trainable', 'statistic'):
    total = sum(r.size for r in rows if r.kind == kind)
    if total:
      lines.append(f'Total #params ({kind}): {total}')
  return '\n'.join(lines) + '\n'
