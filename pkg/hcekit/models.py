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

"""Small residual and plain convnets over a flat parameter store.

The network is a pure function of a `{name: array}` map so that every model
variant (baseline, quantized, pruned, compacted) is the same code path with a
different store. Layouts are NCHW activations and OIHW convolution kernels.

Entry naming:
  stem/conv/kernel, stem/bn/{scale,bias,mean,var}
  stage{s}/block{b}/conv1/kernel, stage{s}/block{b}/bn1/{scale,bias,mean,var}
  stage{s}/block{b}/conv2/kernel, stage{s}/block{b}/bn2/{scale,bias,mean,var}
  head/dense/kernel, head/dense/bias
"""

from __future__ import annotations

import dataclasses
import functools
import hashlib
import json
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from flax import struct as flax_struct
import jax
from jax import lax
import jax.numpy as jnp
import numpy as np

from hcekit import errors

JTensor = jnp.ndarray
Entries = Dict[str, JTensor]
ActRanges = Dict[str, Tuple[JTensor, JTensor]]

FAMILIES = ('resnet', 'plain')
BASE_STAGE_WIDTHS = (16, 32, 64)
BN_EPSILON = 1e-5
BN_MOMENTUM = 0.9
_STAT_SUFFIXES = ('/mean', '/var')


@dataclasses.dataclass(frozen=True)
class NetworkSpec:
  """Architecture of a CIFAR-style residual (or plain) convnet.

  Attributes:
    family: 'resnet' (identity shortcuts, option A) or 'plain' (no shortcuts).
    depth: total number of weighted layers, 6n+2.
    num_classes: number of output classes K.
    input_shape: (channels, height, width).
    width_multiplier: scales the 16/32/64 stage widths.
    block_widths: optional per-block internal width (output of each block's
      first conv). None means every block uses its stage width; compacted
      networks set it.
  """
  family: str = 'resnet'
  depth: int = 20
  num_classes: int = 10
  input_shape: Tuple[int, int, int] = (3, 32, 32)
  width_multiplier: float = 1.0
  block_widths: Optional[Tuple[int, ...]] = None

  def __post_init__(self):
    # NetworkSpec is a static jit argument and must stay hashable.
    object.__setattr__(self, 'input_shape', tuple(int(d) for d in
                                                  self.input_shape))
    if self.block_widths is not None:
      object.__setattr__(self, 'block_widths',
                         tuple(int(w) for w in self.block_widths))

  @property
  def blocks_per_stage(self) -> int:
    return (self.depth - 2) // 6

  @property
  def num_blocks(self) -> int:
    return 3 * self.blocks_per_stage

  def validate(self) -> 'NetworkSpec':
    """Checks the invariants and returns self.

    Raises:
      ConfigError: if any field is out of range.
    """
    if self.family not in FAMILIES:
      raise errors.ConfigError(
          f'network.family must be one of {FAMILIES}, got {self.family!r}')
    if (not isinstance(self.depth, int) or self.depth < 8 or
        (self.depth - 2) % 6 != 0):
      raise errors.ConfigError(
          f'depth must be 6n+2 with n >= 1, got depth={self.depth}')
    if self.num_classes < 2:
      raise errors.ConfigError(
          f'num_classes must be >= 2, got {self.num_classes}')
    if len(self.input_shape) != 3 or min(self.input_shape) < 1:
      raise errors.ConfigError(
          f'input_shape must be (C, H, W) with positive entries, got '
          f'{self.input_shape}')
    if self.width_multiplier <= 0:
      raise errors.ConfigError(
          f'width_multiplier must be positive, got {self.width_multiplier}')
    if self.block_widths is not None:
      if len(self.block_widths) != self.num_blocks:
        raise errors.ConfigError(
            f'block_widths needs {self.num_blocks} entries for depth '
            f'{self.depth}, got {len(self.block_widths)}')
      if min(self.block_widths) < 1:
        raise errors.ConfigError('block_widths entries must be >= 1')
    return self

  def stage_widths(self) -> Tuple[int, int, int]:
    return tuple(
        max(1, int(round(w * self.width_multiplier)))
        for w in BASE_STAGE_WIDTHS)

  def internal_widths(self) -> Tuple[int, ...]:
    """Per-block width of the first conv of each block."""
    if self.block_widths is not None:
      return self.block_widths
    widths = self.stage_widths()
    return tuple(widths[s] for s in range(3)
                 for _ in range(self.blocks_per_stage))

  def replace(self, **changes: Any) -> 'NetworkSpec':
    return dataclasses.replace(self, **changes)

  def to_dict(self) -> Dict[str, Any]:
    return {
        'family': self.family,
        'depth': self.depth,
        'num_classes': self.num_classes,
        'input_shape': list(self.input_shape),
        'width_multiplier': self.width_multiplier,
        'block_widths': (None if self.block_widths is None else
                         list(self.block_widths)),
    }

  @classmethod
  def from_dict(cls, d: Mapping[str, Any]) -> 'NetworkSpec':
    block_widths = d.get('block_widths')
    return cls(
        family=d.get('family', 'resnet'),
        depth=int(d['depth']),
        num_classes=int(d['num_classes']),
        input_shape=tuple(d.get('input_shape', (3, 32, 32))),
        width_multiplier=float(d.get('width_multiplier', 1.0)),
        block_widths=None if block_widths is None else tuple(block_widths))


@dataclasses.dataclass(frozen=True)
class LayerInfo:
  """Static description of one layer of a network."""
  name: str
  kind: str  # 'conv', 'bn' or 'dense'.
  in_channels: int
  out_channels: int
  kernel_size: int = 1
  stride: int = 1
  in_hw: Tuple[int, int] = (1, 1)
  out_hw: Tuple[int, int] = (1, 1)
  prunable: bool = False


def _conv_out(size: int, kernel: int, stride: int) -> int:
  pad = kernel // 2
  return (size + 2 * pad - kernel) // stride + 1


def block_prefix(stage: int, block: int) -> str:
  return f'stage{stage}/block{block}'


def block_names(spec: NetworkSpec) -> List[str]:
  return [block_prefix(s, b) for s in range(3)
          for b in range(spec.blocks_per_stage)]


def layer_plan(spec: NetworkSpec) -> List[LayerInfo]:
  """Returns every layer of `spec` in execution order.

  Only the first conv of each residual block is prunable; pruning its filters
  leaves the block's output shape, and so the shortcut, untouched.
  """
  spec.validate()
  widths = spec.stage_widths()
  internal = spec.internal_widths()
  c, h, w = spec.input_shape
  plan = []
  oh, ow = _conv_out(h, 3, 1), _conv_out(w, 3, 1)
  plan.append(LayerInfo('stem/conv', 'conv', c, widths[0], 3, 1, (h, w),
                        (oh, ow)))
  plan.append(LayerInfo('stem/bn', 'bn', widths[0], widths[0], in_hw=(oh, ow),
                        out_hw=(oh, ow)))
  c, h, w = widths[0], oh, ow
  idx = 0
  for s in range(3):
    for b in range(spec.blocks_per_stage):
      prefix = block_prefix(s, b)
      stride = 2 if (s > 0 and b == 0) else 1
      mid = internal[idx]
      oh, ow = _conv_out(h, 3, stride), _conv_out(w, 3, stride)
      plan.append(LayerInfo(f'{prefix}/conv1', 'conv', c, mid, 3, stride,
                            (h, w), (oh, ow), prunable=True))
      plan.append(LayerInfo(f'{prefix}/bn1', 'bn', mid, mid, in_hw=(oh, ow),
                            out_hw=(oh, ow)))
      plan.append(LayerInfo(f'{prefix}/conv2', 'conv', mid, widths[s], 3, 1,
                            (oh, ow), (oh, ow)))
      plan.append(LayerInfo(f'{prefix}/bn2', 'bn', widths[s], widths[s],
                            in_hw=(oh, ow), out_hw=(oh, ow)))
      c, h, w = widths[s], oh, ow
      idx += 1
  plan.append(LayerInfo('head/dense', 'dense', c, spec.num_classes))
  return plan


def weighted_layers(spec: NetworkSpec) -> List[LayerInfo]:
  """Conv and dense layers, the ones carrying a quantizable kernel."""
  return [l for l in layer_plan(spec) if l.kind in ('conv', 'dense')]


def prunable_layers(spec: NetworkSpec) -> List[LayerInfo]:
  return [l for l in layer_plan(spec) if l.prunable]


def entry_shapes(spec: NetworkSpec) -> Dict[str, Tuple[int, ...]]:
  """Ordered map from entry name to shape."""
  shapes = {}
  for layer in layer_plan(spec):
    if layer.kind == 'conv':
      shapes[f'{layer.name}/kernel'] = (layer.out_channels, layer.in_channels,
                                        layer.kernel_size, layer.kernel_size)
    elif layer.kind == 'bn':
      for field in ('scale', 'bias', 'mean', 'var'):
        shapes[f'{layer.name}/{field}'] = (layer.out_channels,)
    else:
      shapes[f'{layer.name}/kernel'] = (layer.in_channels, layer.out_channels)
      shapes[f'{layer.name}/bias'] = (layer.out_channels,)
  return shapes


def is_statistic(name: str) -> bool:
  """True for normalization running statistics (not trained by gradient)."""
  return name.endswith(_STAT_SUFFIXES)


def is_kernel(name: str) -> bool:
  return name.endswith('/kernel')


def architecture_fingerprint(spec: NetworkSpec,
                             shapes: Optional[Mapping[str, Sequence[int]]] = None
                            ) -> str:
  """Hash of the architecture: family plus every entry name and shape."""
  if shapes is None:
    shapes = entry_shapes(spec)
  payload = json.dumps({
      'family': spec.family,
      'entries': sorted((k, list(v)) for k, v in shapes.items()),
  }, sort_keys=True)
  return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:16]


class ParameterStore(flax_struct.PyTreeNode):
  """Named arrays holding one model variant plus its metadata.

  `entries` is the only pytree field, so a store can be passed through
  `jax.jit` / `jax.tree_util` directly.
  """
  entries: Entries
  spec: NetworkSpec = flax_struct.field(pytree_node=False)
  seed: int = flax_struct.field(pytree_node=False, default=0)

  @property
  def fingerprint(self) -> str:
    return architecture_fingerprint(
        self.spec, {k: tuple(v.shape) for k, v in self.entries.items()})

  def names(self) -> List[str]:
    """Entry names in layer execution order."""
    return [k for k in entry_shapes(self.spec) if k in self.entries]

  def num_params(self, trainable_only: bool = True) -> int:
    return int(sum(
        int(np.prod(v.shape)) for k, v in self.entries.items()
        if not (trainable_only and is_statistic(k))))

  def digest(self) -> str:
    """Content hash over names, shapes, dtypes and bytes."""
    h = hashlib.sha256()
    for name in sorted(self.entries):
      value = np.asarray(self.entries[name])
      h.update(name.encode('utf-8'))
      h.update(str(value.shape).encode('utf-8'))
      h.update(str(value.dtype).encode('utf-8'))
      h.update(np.ascontiguousarray(value).tobytes())
    return h.hexdigest()[:16]

  def with_entries(self, entries: Mapping[str, JTensor]) -> 'ParameterStore':
    return self.replace(entries=dict(entries))


@dataclasses.dataclass
class Batch:
  """A labeled mini-batch; `indices` are positions in the source dataset."""
  inputs: np.ndarray
  labels: np.ndarray
  indices: Optional[np.ndarray] = None

  def __len__(self) -> int:
    return int(self.inputs.shape[0])

  def validate(self, num_classes: int) -> 'Batch':
    if len(self) < 1:
      raise errors.InputError('Batch must contain at least one sample.')
    labels = np.asarray(self.labels)
    if labels.shape != (len(self),):
      raise errors.InputError(
          f'labels shape {labels.shape} does not match {len(self)} inputs')
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
      raise errors.InputError(
          f'labels must lie in [0, {num_classes}), got range '
          f'[{labels.min()}, {labels.max()}]')
    return self


def build_model(spec: NetworkSpec, seed: int) -> ParameterStore:
  """Initializes a store for `spec`, deterministic in (spec, seed).

  Convolutions use He-normal, the classifier LeCun-normal with zero bias, and
  normalization layers start at the identity.
  """
  spec.validate()
  key = jax.random.PRNGKey(seed)
  conv_init = jax.nn.initializers.he_normal(in_axis=1, out_axis=0)
  dense_init = jax.nn.initializers.lecun_normal()
  entries = {}
  for i, layer in enumerate(layer_plan(spec)):
    layer_key = jax.random.fold_in(key, i)
    if layer.kind == 'conv':
      shape = (layer.out_channels, layer.in_channels, layer.kernel_size,
               layer.kernel_size)
      entries[f'{layer.name}/kernel'] = conv_init(layer_key, shape,
                                                  jnp.float32)
    elif layer.kind == 'bn':
      n = layer.out_channels
      entries[f'{layer.name}/scale'] = jnp.ones((n,), jnp.float32)
      entries[f'{layer.name}/bias'] = jnp.zeros((n,), jnp.float32)
      entries[f'{layer.name}/mean'] = jnp.zeros((n,), jnp.float32)
      entries[f'{layer.name}/var'] = jnp.ones((n,), jnp.float32)
    else:
      entries[f'{layer.name}/kernel'] = dense_init(
          layer_key, (layer.in_channels, layer.out_channels), jnp.float32)
      entries[f'{layer.name}/bias'] = jnp.zeros((layer.out_channels,),
                                                jnp.float32)
  return ParameterStore(entries=entries, spec=spec, seed=seed)


def round_half_away(x: JTensor) -> JTensor:
  """Rounds to the nearest integer, ties away from zero."""
  return jnp.sign(x) * jnp.floor(jnp.abs(x) + 0.5)


def fake_quant(x: JTensor, lo: JTensor, hi: JTensor, bits: int) -> JTensor:
  """Snaps `x` to the asymmetric `bits`-bit grid spanning [lo, hi]."""
  levels = 2.0**bits - 1.0
  scale = jnp.maximum((hi - lo) / levels, jnp.finfo(jnp.float32).tiny)
  zero_point = round_half_away(-lo / scale)
  q = jnp.clip(round_half_away(x / scale) + zero_point, 0.0, levels)
  return (q - zero_point) * scale


def _conv(x: JTensor, kernel: JTensor, stride: int) -> JTensor:
  pad = kernel.shape[-1] // 2
  return lax.conv_general_dilated(
      x, kernel, window_strides=(stride, stride),
      padding=((pad, pad), (pad, pad)),
      dimension_numbers=('NCHW', 'OIHW', 'NCHW'),
      precision=lax.Precision.HIGHEST)


def _batch_norm(x: JTensor, entries: Mapping[str, JTensor], name: str,
                train: bool, new_stats: Dict[str, JTensor]) -> JTensor:
  mean = entries[f'{name}/mean']
  var = entries[f'{name}/var']
  if train:
    batch_mean = jnp.mean(x, axis=(0, 2, 3))
    batch_var = jnp.var(x, axis=(0, 2, 3))
    new_stats[f'{name}/mean'] = (
        BN_MOMENTUM * mean + (1.0 - BN_MOMENTUM) * batch_mean)
    new_stats[f'{name}/var'] = (
        BN_MOMENTUM * var + (1.0 - BN_MOMENTUM) * batch_var)
    mean, var = batch_mean, batch_var
  else:
    new_stats[f'{name}/mean'] = mean
    new_stats[f'{name}/var'] = var
  inv = entries[f'{name}/scale'] * lax.rsqrt(var + BN_EPSILON)
  return ((x - mean[None, :, None, None]) * inv[None, :, None, None] +
          entries[f'{name}/bias'][None, :, None, None])


def _shortcut(x: JTensor, out_channels: int, stride: int) -> JTensor:
  """Option A shortcut: subsample spatially, zero-pad channels at the end."""
  if stride > 1:
    x = x[:, :, ::stride, ::stride]
  extra = out_channels - x.shape[1]
  if extra > 0:
    x = jnp.pad(x, ((0, 0), (0, extra), (0, 0), (0, 0)))
  return x


@functools.partial(jax.jit, static_argnames=('spec', 'train', 'act_bits'))
def apply_network(entries: Mapping[str, JTensor],
                  inputs: JTensor,
                  act_ranges: Optional[ActRanges] = None,
                  *,
                  spec: NetworkSpec,
                  train: bool = False,
                  act_bits: int = 32) -> Tuple[JTensor, Entries, ActRanges]:
  """Runs the network.

  Args:
    entries: parameter map laid out as `entry_shapes(spec)`.
    inputs: N x C x H x W float array.
    act_ranges: optional calibrated (min, max) per weighted layer. A layer
      listed here has its input snapped to the `act_bits` grid over its range.
    spec: the architecture.
    train: use batch statistics and return updated running statistics.
    act_bits: activation bit-width used with `act_ranges`.

  Returns:
    (logits N x K, normalization statistics, taps) where taps maps every
    weighted layer to the (min, max) of the input it consumed, measured before
    any activation quantization.
  """
  new_stats = {}
  taps = {}

  def consume(name, x):
    taps[name] = (jnp.min(x), jnp.max(x))
    if act_ranges is not None and name in act_ranges:
      lo, hi = act_ranges[name]
      x = fake_quant(x, lo, hi, act_bits)
    return x

  x = inputs.astype(jnp.float32)
  x = _conv(consume('stem/conv', x), entries['stem/conv/kernel'], 1)
  x = jax.nn.relu(_batch_norm(x, entries, 'stem/bn', train, new_stats))
  widths = spec.stage_widths()
  for s in range(3):
    for b in range(spec.blocks_per_stage):
      prefix = block_prefix(s, b)
      stride = 2 if (s > 0 and b == 0) else 1
      y = _conv(consume(f'{prefix}/conv1', x),
                entries[f'{prefix}/conv1/kernel'], stride)
      y = jax.nn.relu(_batch_norm(y, entries, f'{prefix}/bn1', train,
                                  new_stats))
      y = _conv(consume(f'{prefix}/conv2', y),
                entries[f'{prefix}/conv2/kernel'], 1)
      y = _batch_norm(y, entries, f'{prefix}/bn2', train, new_stats)
      if spec.family == 'resnet':
        y = y + _shortcut(x, widths[s], stride)
      x = jax.nn.relu(y)
  pooled = consume('head/dense', jnp.mean(x, axis=(2, 3)))
  logits = jnp.dot(pooled, entries['head/dense/kernel'],
                   precision=lax.Precision.HIGHEST)
  logits = logits + entries['head/dense/bias']
  return logits, new_stats, taps


def check_inputs(spec: NetworkSpec, inputs: Any) -> None:
  shape = tuple(np.shape(inputs))
  if len(shape) != 4 or shape[1:] != spec.input_shape:
    raise errors.InputError(
        f'Expected inputs of shape (N, {", ".join(map(str, spec.input_shape))})'
        f', got {shape}')
  if shape[0] < 1:
    raise errors.InputError('Expected at least one input sample.')


def forward(model: ParameterStore, batch: Union[Batch, Any]) -> JTensor:
  """Inference-mode scores (pre-softmax logits), shape N x K."""
  inputs = batch.inputs if isinstance(batch, Batch) else batch
  check_inputs(model.spec, inputs)
  logits, _, _ = apply_network(model.entries, jnp.asarray(inputs),
                               spec=model.spec)
  return logits


def softmax(scores: Any, axis: int = -1) -> JTensor:
  return jax.nn.softmax(jnp.asarray(scores), axis=axis)


def spec_from_shapes(spec: NetworkSpec,
                     shapes: Mapping[str, Sequence[int]]) -> NetworkSpec:
  """Recovers block widths from stored conv1 kernel shapes."""
  widths = tuple(
      int(shapes[f'{name}/conv1/kernel'][0]) for name in block_names(spec))
  if widths == spec.internal_widths():
    return spec
  return spec.replace(block_widths=widths)

