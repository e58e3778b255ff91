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

"""Two-member ensemble inference and error-diversity statistics.

The overlap ratio is |E_Q & E_S| / |E_Q | E_S|, intersection over union of
the members' error sets; lower means more diverse errors.
"""

import dataclasses
from typing import Any, Dict, FrozenSet, Mapping, Optional

import jax
import jax.numpy as jnp
import numpy as np

from hcekit import errors
from hcekit import eval_lib

MODES = ('probability', 'logit')


def combine_scores(s_scores: Any, q_scores: Any,
                   mode: str = 'probability') -> np.ndarray:
  """Averaged member outputs: softmax probabilities (tau=1) or raw scores."""
  s = np.asarray(s_scores)
  q = np.asarray(q_scores)
  if s.shape != q.shape:
    raise errors.InputError(
        f'Member score shapes differ: {s.shape} vs {q.shape}')
  if mode == 'probability':
    s = np.asarray(jax.nn.softmax(jnp.asarray(s), axis=-1))
    q = np.asarray(jax.nn.softmax(jnp.asarray(q), axis=-1))
  elif mode != 'logit':
    raise errors.ConfigError(f'ensemble mode must be one of {MODES}')
  return (s + q) / 2.0


def ensemble_predict(s_scores: Any, q_scores: Any,
                     mode: str = 'probability') -> np.ndarray:
  """Argmax of the averaged outputs; ties go to the lower class index."""
  return np.argmax(combine_scores(s_scores, q_scores, mode), axis=-1)


@dataclasses.dataclass(frozen=True)
class Ensemble:
  """The HCE predictor {S, Q}; `scores` returns the averaged output."""
  pruned: Any
  quantized: Any
  mode: str = 'probability'

  def scores(self, inputs: Any) -> np.ndarray:
    s = eval_lib.scores_fn(self.pruned)(inputs)
    q = eval_lib.scores_fn(self.quantized)(inputs)
    return combine_scores(s, q, self.mode)


def error_set(predictions: Any, labels: Any) -> FrozenSet[int]:
  predictions = np.asarray(predictions)
  labels = np.asarray(labels)
  if predictions.shape != labels.shape:
    raise errors.InputError(
        f'{predictions.shape[0]} predictions for {labels.shape[0]} labels')
  return frozenset(int(i) for i in np.flatnonzero(predictions != labels))


@dataclasses.dataclass(frozen=True)
class ErrorSets:
  """Misclassified sample indices of Q, S, the ensemble and O."""
  e_q: FrozenSet[int]
  e_s: FrozenSet[int]
  e_ens: FrozenSet[int]
  e_base: Optional[FrozenSet[int]] = None
  num_samples: Optional[int] = None

  def validate(self) -> 'ErrorSets':
    if self.num_samples is None:
      return self
    for name in ('e_q', 'e_s', 'e_ens', 'e_base'):
      s = getattr(self, name)
      if s and (min(s) < 0 or max(s) >= self.num_samples):
        raise errors.InputError(
            f'{name} holds indices outside [0, {self.num_samples})')
    return self

  def to_dict(self) -> Dict[str, Any]:
    return {
        'e_q': sorted(self.e_q),
        'e_s': sorted(self.e_s),
        'e_ens': sorted(self.e_ens),
        'e_base': None if self.e_base is None else sorted(self.e_base),
        'num_samples': self.num_samples,
    }

  @classmethod
  def from_dict(cls, d: Mapping[str, Any]) -> 'ErrorSets':
    base = d.get('e_base')
    return cls(frozenset(d['e_q']), frozenset(d['e_s']), frozenset(d['e_ens']),
               None if base is None else frozenset(base), d.get('num_samples'))


def error_sets(predictions: Mapping[str, Any], labels: Any) -> ErrorSets:
  """Builds ErrorSets from per-model predictions keyed 'Q', 'S', 'ens', 'O'.

  'O' is optional.
  """
  labels = np.asarray(labels)
  missing = [k for k in ('Q', 'S', 'ens') if k not in predictions]
  if missing:
    raise errors.InputError(f'Missing predictions for {missing}')
  base = predictions.get('O')
  return ErrorSets(
      e_q=error_set(predictions['Q'], labels),
      e_s=error_set(predictions['S'], labels),
      e_ens=error_set(predictions['ens'], labels),
      e_base=None if base is None else error_set(base, labels),
      num_samples=int(labels.shape[0])).validate()


@dataclasses.dataclass(frozen=True)
class DiversityReport:
  """Error-overlap statistics of the two members."""
  num_e_q: int
  num_e_s: int
  intersection: int
  union: int
  overlap_ratio: float
  corrected_fraction: float
  corrected_q_only_fraction: float
  num_e_ens: int
  num_e_base: Optional[int] = None
  empty_union: bool = False

  def to_dict(self) -> Dict[str, Any]:
    return dataclasses.asdict(self)


def overlap_ratio_from_counts(num_e_q: int, num_e_s: int,
                              intersection: int) -> float:
  """Intersection over union from set sizes alone."""
  if intersection > min(num_e_q, num_e_s) or intersection < 0:
    raise errors.InputError(
        f'intersection {intersection} exceeds min(|E_Q|, |E_S|)')
  union = num_e_q + num_e_s - intersection
  return intersection / union if union else 0.0


def diversity_report(sets: ErrorSets) -> DiversityReport:
  """Overlap and corrected-error statistics.

  corrected_fraction is the share of E_Q | E_S the ensemble gets right and
  corrected_q_only_fraction the share of E_Q - E_S. Ratios over an empty set
  are 0 and `empty_union` is set.
  """
  sets.validate()
  inter = sets.e_q & sets.e_s
  union = sets.e_q | sets.e_s
  q_only = sets.e_q - sets.e_s
  empty = not union
  return DiversityReport(
      num_e_q=len(sets.e_q),
      num_e_s=len(sets.e_s),
      intersection=len(inter),
      union=len(union),
      overlap_ratio=len(inter) / len(union) if union else 0.0,
      corrected_fraction=(len(union - sets.e_ens) / len(union)
                          if union else 0.0),
      corrected_q_only_fraction=(len(q_only - sets.e_ens) / len(q_only)
                                 if q_only else 0.0),
      num_e_ens=len(sets.e_ens),
      num_e_base=None if sets.e_base is None else len(sets.e_base),
      empty_union=empty)


VENN_REGIONS = ('Q only', 'S only', 'ens only', 'Q & S only', 'Q & ens only',
                'S & ens only', 'Q & S & ens')


def venn_table(sets: ErrorSets) -> Dict[str, int]:
  """Counts of the seven regions of the three-set Venn diagram."""
  q, s, e = sets.e_q, sets.e_s, sets.e_ens
  return {
      'Q only': len(q - s - e),
      'S only': len(s - q - e),
      'ens only': len(e - q - s),
      'Q & S only': len((q & s) - e),
      'Q & ens only': len((q & e) - s),
      'S & ens only': len((s & e) - q),
      'Q & S & ens': len(q & s & e),
  }


def render_venn(sets: ErrorSets) -> str:
  table = venn_table(sets)
  width = max(len(k) for k in table)
  lines = [f'{"region".ljust(width)}  count']
  lines += [f'{k.ljust(width)}  {v}' for k, v in table.items()]
  if sets.e_base is not None:
    lines.append(f'{"O errors".ljust(width)}  {len(sets.e_base)}')
  return '\n'.join(lines) + '\n'


def sets_from_counts(num_e_q: int, num_e_s: int,
                     intersection: int) -> ErrorSets:
  """Synthetic sets with given sizes (ensemble errors empty)."""
  if min(num_e_q, num_e_s) < 0:
    raise errors.InputError('Error set sizes must be >= 0')
  overlap_ratio_from_counts(num_e_q, num_e_s, intersection)
  shared = list(range(intersection))
  q_only = list(range(intersection, num_e_q))
  s_only = list(range(num_e_q, num_e_q + num_e_s - intersection))
  return ErrorSets(frozenset(shared + q_only), frozenset(shared + s_only),
                   frozenset())

