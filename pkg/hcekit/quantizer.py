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

"""Post-training uniform quantization simulated in real arithmetic.

Weights (conv and dense kernels) are snapped per tensor to a symmetric grid;
biases and normalization parameters stay in full precision. The input of
every quantized layer is snapped at inference time to an asymmetric grid over
the range observed during calibration.
"""

import dataclasses
import math
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from absl import logging
import jax.numpy as jnp
import numpy as np

from hcekit import datasets
from hcekit import errors
from hcekit import models

WEIGHT_SCHEMES = ('symmetric', 'asymmetric')
ACTIVATION_SCHEMES = ('asymmetric',)
MIN_BITS = 2
MAX_BITS = 32
# Width given to a calibration range whose min equals its max.
DEGENERATE_RANGE_EPSILON = 1e-6

fake_quant_activation = models.fake_quant


@dataclasses.dataclass(frozen=True)
class QuantConfig:
  """Bit-widths and calibration of post-training quantization.

  Attributes:
    weight_bits: b_w, bits of every quantized kernel.
    activation_bits: b_a, bits of every quantized layer input.
    calibration_batches: number of batches observed to calibrate ranges.
    calibration_batch_size: samples per calibration batch.
    weight_scheme: 'symmetric' per-tensor (default) or 'asymmetric'.
    activation_scheme: 'asymmetric' per-tensor min/max.
    exempt_first_last: keep the stem conv and the classifier in full
      precision.
  """
  weight_bits: int = 3
  activation_bits: int = 3
  calibration_batches: int = 4
  calibration_batch_size: int = 128
  weight_scheme: str = 'symmetric'
  activation_scheme: str = 'asymmetric'
  exempt_first_last: bool = False

  def validate(self, prefix: str = 'quant') -> 'QuantConfig':
    for name in ('weight_bits', 'activation_bits'):
      bits = getattr(self, name)
      if not MIN_BITS <= bits <= MAX_BITS:
        raise errors.ConfigError(
            f'{prefix}.{name} must lie in [{MIN_BITS}, {MAX_BITS}], got {bits}')
    if self.calibration_batches < 1 or self.calibration_batch_size < 1:
      raise errors.ConfigError(
          f'{prefix}.calibration_batches and {prefix}.calibration_batch_size '
          'must be >= 1')
    if self.weight_scheme not in WEIGHT_SCHEMES:
      raise errors.ConfigError(
          f'{prefix}.weight_scheme must be one of {WEIGHT_SCHEMES}')
    if self.activation_scheme not in ACTIVATION_SCHEMES:
      raise errors.ConfigError(
          f'{prefix}.activation_scheme must be one of {ACTIVATION_SCHEMES}')
    return self

  def to_dict(self) -> Dict[str, Any]:
    return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class QuantizedTensor:
  """Grid values of one tensor with its quantization parameters."""
  values: np.ndarray
  scale: float
  zero_point: int
  bits: int

  def integer_levels(self) -> np.ndarray:
    """The integer q of every element, values = scale * (q - zero_point)."""
    return (round_half_away(self.values.astype(np.float64) / self.scale) +
            self.zero_point).astype(np.int64)


def round_half_away(x: np.ndarray) -> np.ndarray:
  """Round half away from zero on host arrays."""
  return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _check_bits(bits: int) -> None:
  if not MIN_BITS <= bits <= MAX_BITS:
    raise errors.ConfigError(
        f'bits must lie in [{MIN_BITS}, {MAX_BITS}], got {bits}')


def quantize_tensor(values: Any, bits: int,
                    scheme: str = 'symmetric') -> QuantizedTensor:
  """Snaps `values` to a uniform `bits`-bit grid.

  The symmetric scheme uses scale = max|v| / (2^(bits-1) - 1), zero point 0
  and integer levels in [-(2^(bits-1) - 1), 2^(bits-1) - 1]. The asymmetric
  scheme spans [min, max] with 2^bits levels and an integer zero point.
  Rounding is half away from zero. Arithmetic runs in float64 and the grid is
  cast back to the input dtype, which makes re-quantization a no-op.

  Args:
    values: real array.
    bits: grid bit-width in [2, 32].
    scheme: 'symmetric' or 'asymmetric'.

  Returns:
    A QuantizedTensor. An all-zero tensor gets scale 1 and stays zero.

  Raises:
    ConfigError: on unsupported bits or scheme.
    InputError: on non-finite values.
  """
  _check_bits(bits)
  original = np.asarray(values)
  dtype = original.dtype if np.issubdtype(original.dtype,
                                          np.floating) else np.float32
  v = original.astype(np.float64)
  if not np.all(np.isfinite(v)):
    raise errors.InputError('Cannot quantize non-finite values.')
  if scheme == 'symmetric':
    qmax = 2.0**(bits - 1) - 1.0
    peak = float(np.max(np.abs(v))) if v.size else 0.0
    if peak == 0.0:
      return QuantizedTensor(np.zeros_like(v, dtype), 1.0, 0, bits)
    scale = peak / qmax
    q = np.clip(round_half_away(v / scale), -qmax, qmax)
    return QuantizedTensor((q * scale).astype(dtype), scale, 0, bits)
  if scheme == 'asymmetric':
    lo, hi = (float(v.min()), float(v.max())) if v.size else (0.0, 0.0)
    if hi <= lo:
      hi = lo + DEGENERATE_RANGE_EPSILON
    levels = 2.0**bits - 1.0
    scale = (hi - lo) / levels
    zero_point = int(round_half_away(np.float64(-lo / scale)))
    q = np.clip(round_half_away(v / scale) + zero_point, 0.0, levels)
    return QuantizedTensor(((q - zero_point) * scale).astype(dtype), scale,
                           zero_point, bits)
  raise errors.ConfigError(f'Unknown quantization scheme {scheme!r}')


def quantized_layer_names(spec: models.NetworkSpec,
                          exempt_first_last: bool) -> Tuple[str, ...]:
  names = [l.name for l in models.weighted_layers(spec)]
  if exempt_first_last:
    names = names[1:-1]
  return tuple(names)


def calibrate(model: models.ParameterStore, data: datasets.Dataset,
              cfg: QuantConfig) -> Dict[str, Tuple[float, float]]:
  """Observes the input range of every weighted layer.

  The first `cfg.calibration_batches` batches of `data`, in dataset order,
  run through the model with unquantized activations.

  Returns:
    layer name -> (min, max), min < max. A constant input widens to
    (v, v + 1e-6) with a warning.

  Raises:
    InputError: if `data` holds fewer than `calibration_batches` batches.
  """
  cfg.validate()
  available = math.ceil(len(data) / cfg.calibration_batch_size)
  if available < cfg.calibration_batches:
    raise errors.InputError(
        f'Calibration needs {cfg.calibration_batches} batches of '
        f'{cfg.calibration_batch_size}, dataset provides {available}')
  ranges = {}
  batches = datasets.iterate_batches(data, cfg.calibration_batch_size)
  for _, batch in zip(range(cfg.calibration_batches), batches):
    models.check_inputs(model.spec, batch.inputs)
    _, _, taps = models.apply_network(model.entries, jnp.asarray(batch.inputs),
                                      spec=model.spec)
    for name, (lo, hi) in taps.items():
      lo, hi = float(lo), float(hi)
      if name in ranges:
        lo, hi = min(lo, ranges[name][0]), max(hi, ranges[name][1])
      ranges[name] = (lo, hi)
  for name, (lo, hi) in ranges.items():
    if not (np.isfinite(lo) and np.isfinite(hi)):
      raise errors.NumericError(f'Non-finite activation range at {name}')
    if hi <= lo:
      logging.warning('Degenerate activation range (%g, %g) at %s; widening '
                      'by %g', lo, hi, name, DEGENERATE_RANGE_EPSILON)
      ranges[name] = (lo, lo + DEGENERATE_RANGE_EPSILON)
  return ranges


@dataclasses.dataclass(frozen=True)
class QuantizedModel:
  """Model Q: grid weights plus everything needed to rebuild its outputs.

  Attributes:
    grid_weights: store whose quantized kernels lie on their grids.
    scales: entry name -> weight scale.
    zero_points: entry name -> weight zero point.
    activation_ranges: layer name -> calibrated (min, max) of its input.
    config: the QuantConfig used.
  """
  grid_weights: models.ParameterStore
  scales: Dict[str, float]
  zero_points: Dict[str, int]
  activation_ranges: Dict[str, Tuple[float, float]]
  config: QuantConfig

  @property
  def spec(self) -> models.NetworkSpec:
    return self.grid_weights.spec

  @property
  def fingerprint(self) -> str:
    return self.grid_weights.fingerprint

  def digest(self) -> str:
    return self.grid_weights.digest()

  def scores(self, inputs: Any) -> jnp.ndarray:
    return forward_quantized(self, inputs)

  def manifest(self) -> Dict[str, Any]:
    return {
        'config': self.config.to_dict(),
        'scales': dict(self.scales),
        'zero_points': dict(self.zero_points),
        'activation_ranges': {
            k: [lo, hi] for k, (lo, hi) in self.activation_ranges.items()
        },
    }


def quantize_model(model: Union[models.ParameterStore, QuantizedModel],
                   data: datasets.Dataset,
                   cfg: QuantConfig) -> QuantizedModel:
  """Builds model Q from a trained store; `model` itself is not modified.

  Passing a QuantizedModel re-quantizes its grid weights, which changes no
  weight for the same config.

  Raises:
    InputError / ConfigError / NumericError: prefixed with the failing layer.
  """
  cfg.validate()
  base = model.grid_weights if isinstance(model, QuantizedModel) else model
  layers = quantized_layer_names(base.spec, cfg.exempt_first_last)
  entries = dict(base.entries)
  scales, zero_points = {}, {}
  for layer in layers:
    key = f'{layer}/kernel'
    try:
      qt = quantize_tensor(np.asarray(entries[key]), cfg.weight_bits,
                           cfg.weight_scheme)
    except errors.HceError as e:
      raise type(e)(f'layer {layer}: {e}') from e
    entries[key] = jnp.asarray(qt.values)
    scales[key] = qt.scale
    zero_points[key] = qt.zero_point
  grid = base.with_entries(entries)
  try:
    ranges = calibrate(grid, data, cfg)
  except errors.NumericError as e:
    raise errors.NumericError(f'calibration of {base.fingerprint}: {e}') from e
  ranges = {k: v for k, v in ranges.items() if k in layers}
  logging.info('Quantized %d layers to %d-bit weights / %d-bit activations',
               len(layers), cfg.weight_bits, cfg.activation_bits)
  return QuantizedModel(grid_weights=grid, scales=scales,
                        zero_points=zero_points, activation_ranges=ranges,
                        config=cfg)


def device_ranges(
    ranges: Mapping[str, Tuple[float, float]]
) -> Dict[str, Tuple[jnp.ndarray, jnp.ndarray]]:
  return {k: (jnp.float32(lo), jnp.float32(hi)) for k, (lo, hi) in
          ranges.items()}


def forward_quantized(q: QuantizedModel,
                      batch: Union[models.Batch, Any]) -> jnp.ndarray:
  """Scores of Q: grid weights with every quantized layer input snapped."""
  inputs = batch.inputs if isinstance(batch, models.Batch) else batch
  models.check_inputs(q.spec, inputs)
  logits, _, _ = models.apply_network(
      q.grid_weights.entries, jnp.asarray(inputs),
      device_ranges(q.activation_ranges), spec=q.spec,
      act_bits=q.config.activation_bits)
  return logits


def is_on_grid(values: Any, scale: float, bits: int,
               atol: Optional[float] = None) -> bool:
  """True if every value is scale * q for an in-range symmetric integer q."""
  v = np.asarray(values, np.float64)
  q = round_half_away(v / scale)
  qmax = 2.0**(bits - 1) - 1.0
  tol = atol if atol is not None else 1e-6 * max(scale, 1e-30) * qmax
  return bool(np.all(np.abs(q) <= qmax) and
              np.all(np.abs(v - q * scale) <= tol))
