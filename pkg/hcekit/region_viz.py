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

r"""Decision-region maps on planes spanned by two Rademacher directions.

Cell (i, j) of a grid holds

  argmax f(center + a_i * v1 / sqrt(d) + b_j * v2 / sqrt(d))

with a_i, b_j evenly spaced in [-extent, extent] and d the input size, so
`extent` is comparable across input sizes. Rows index a (v1), columns b (v2).

Text export format:
  # {"extent": 2.0, "fingerprint": "...", "resolution": 51, "seed": 0, ...}
  0 0 3 3 ...
"""

import collections
import dataclasses
import json
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

from absl import logging
from etils import epath
import jax
import numpy as np
from PIL import Image

from hcekit import datasets
from hcekit import errors
from hcekit import eval_lib
from hcekit import io_utils
from hcekit import models
from hcekit import pruner
from hcekit import quantizer

DEFAULT_RESOLUTION = 51
DEFAULT_EXTENT = 2.0
DEFAULT_CELL_SIZE = 4
GRID_FORMAT_VERSION = 1

# RGB per class index; classes beyond the table wrap around.
PALETTE = (
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40),
    (148, 103, 189), (140, 86, 75), (227, 119, 194), (127, 127, 127),
    (188, 189, 34), (23, 190, 207), (174, 199, 232), (255, 187, 120),
    (152, 223, 138), (255, 152, 150), (197, 176, 213), (196, 156, 148),
    (247, 182, 210), (199, 199, 199), (219, 219, 141), (158, 218, 229),
)


def sample_rademacher(shape: Sequence[int], seed: int,
                      index: int = 0) -> np.ndarray:
  """i.i.d. +-1 entries, deterministic in (seed, index)."""
  key = jax.random.fold_in(jax.random.PRNGKey(seed), index)
  return np.asarray(
      jax.random.rademacher(key, tuple(shape), dtype=np.float32))


def plane_directions(shape: Sequence[int],
                     seed: int) -> Tuple[np.ndarray, np.ndarray]:
  return sample_rademacher(shape, seed, 0), sample_rademacher(shape, seed, 1)


@dataclasses.dataclass(frozen=True)
class RegionGrid:
  """Labels of a model over one plane."""
  center: np.ndarray
  v1: np.ndarray
  v2: np.ndarray
  extent: float
  resolution: int
  labels: np.ndarray
  seed: Optional[int] = None
  model_name: str = ''
  model_fingerprint: str = ''

  @property
  def center_label(self) -> int:
    mid = self.resolution // 2
    return int(self.labels[mid, mid])

  def header(self) -> Dict[str, Any]:
    return {
        'format_version': GRID_FORMAT_VERSION,
        'seed': self.seed,
        'extent': self.extent,
        'resolution': self.resolution,
        'model': self.model_name,
        'fingerprint': self.model_fingerprint,
    }


def coefficients(extent: float, resolution: int) -> np.ndarray:
  a = np.linspace(-extent, extent, resolution)
  a[resolution // 2] = 0.0
  return a


def plane_points(center: np.ndarray, v1: np.ndarray, v2: np.ndarray,
                 extent: float, resolution: int) -> np.ndarray:
  """All grid inputs, shape (resolution^2,) + center.shape, row-major."""
  d = center.size
  a = coefficients(extent, resolution)
  u1 = v1.astype(np.float64) / np.sqrt(d)
  u2 = v2.astype(np.float64) / np.sqrt(d)
  coeff_a = a.reshape((resolution, 1) + (1,) * center.ndim)
  coeff_b = a.reshape((1, resolution) + (1,) * center.ndim)
  grid = (center.astype(np.float64) + coeff_a * u1 + coeff_b * u2)
  return grid.reshape((resolution * resolution,) + center.shape).astype(
      np.float32)


def compute_grid(model: Any,
                 center: np.ndarray,
                 v1: np.ndarray,
                 v2: np.ndarray,
                 extent: float = DEFAULT_EXTENT,
                 resolution: int = DEFAULT_RESOLUTION,
                 *,
                 seed: Optional[int] = None,
                 model_name: str = '',
                 batch_size: int = 256) -> RegionGrid:
  """Evaluates `model` (any eval_lib predictor) over the plane.

  Raises:
    InputError: on an even or too small resolution, a negative extent or
      directions whose shape differs from the center's.
  """
  center = np.asarray(center, np.float32)
  v1 = np.asarray(v1, np.float32)
  v2 = np.asarray(v2, np.float32)
  if resolution < 3 or resolution % 2 == 0:
    raise errors.InputError(
        f'resolution must be odd and >= 3 so a center cell exists, got '
        f'{resolution}')
  if extent < 0:
    raise errors.InputError(f'extent must be >= 0, got {extent}')
  if v1.shape != center.shape or v2.shape != center.shape:
    raise errors.InputError(
        f'Direction shapes {v1.shape}, {v2.shape} do not match the input '
        f'shape {center.shape}')
  points = plane_points(center, v1, v2, extent, resolution)
  labels = eval_lib.predict_labels(model, points, batch_size)
  fingerprint = getattr(model, 'fingerprint', '')
  return RegionGrid(center, v1, v2, float(extent), int(resolution),
                    labels.reshape(resolution, resolution).astype(np.int64),
                    seed, model_name, fingerprint if isinstance(
                        fingerprint, str) else '')


def roughness(labels: np.ndarray) -> int:
  """Number of label changes between 4-adjacent cells."""
  labels = np.asarray(labels)
  return int(np.sum(labels[1:, :] != labels[:-1, :]) +
             np.sum(labels[:, 1:] != labels[:, :-1]))


def render_text(grid: RegionGrid) -> str:
  lines = ['# ' + json.dumps(grid.header(), sort_keys=True)]
  lines += [' '.join(str(int(v)) for v in row) for row in grid.labels]
  return '\n'.join(lines) + '\n'


def read_grid_text(path: epath.PathLike) -> Tuple[Dict[str, Any], np.ndarray]:
  """Returns (header, labels) of an exported text matrix."""
  text = epath.Path(path).read_text().splitlines()
  if not text or not text[0].startswith('# '):
    raise errors.InputError(f'{path} has no grid header line')
  header = json.loads(text[0][2:])
  labels = np.array([[int(v) for v in line.split()] for line in text[1:]
                     if line.strip()], np.int64)
  return header, labels


def colorize(labels: np.ndarray, cell_size: int) -> np.ndarray:
  table = np.asarray(PALETTE, np.uint8)
  rgb = table[np.asarray(labels) % len(PALETTE)]
  return np.repeat(np.repeat(rgb, cell_size, axis=0), cell_size, axis=1)


def export_grid(grid: RegionGrid,
                prefix: epath.PathLike,
                cell_size: int = DEFAULT_CELL_SIZE) -> Dict[str, epath.Path]:
  """Writes `<prefix>.txt`, `<prefix>.png` and a `<prefix>.json` sidecar.

  The sidecar holds the header, the palette and the roughness metric.
  """
  prefix = epath.Path(prefix)
  prefix.parent.mkdir(parents=True, exist_ok=True)
  txt = io_utils.write_text_atomic(
      prefix.parent / f'{prefix.name}.txt', render_text(grid))
  png = prefix.parent / f'{prefix.name}.png'
  with png.open('wb') as f:
    Image.fromarray(colorize(grid.labels, cell_size), 'RGB').save(
        f, format='PNG')
  sidecar = dict(grid.header())
  sidecar.update({
      'cell_size': cell_size,
      'palette': [list(c) for c in PALETTE],
      'roughness': roughness(grid.labels),
      'roughness_note': ('label changes between 4-adjacent cells; a '
                         'reported statistic, not a guarantee'),
      'center_label': grid.center_label,
  })
  meta = io_utils.write_json(prefix.parent / f'{prefix.name}.json', sidecar)
  return {'text': txt, 'image': png, 'sidecar': meta}


def check_shared_plane(grids: Mapping[str, RegionGrid]) -> None:
  """Raises InputError unless every grid uses the same plane."""
  items = list(grids.items())
  if not items:
    return
  ref_name, ref = items[0]
  for name, g in items[1:]:
    for field in ('seed', 'extent', 'resolution'):
      if getattr(g, field) != getattr(ref, field):
        raise errors.InputError(
            f'Grid {name} has {field}={getattr(g, field)} but {ref_name} has '
            f'{getattr(ref, field)}; comparison panels need a shared plane')
    for field in ('center', 'v1', 'v2'):
      if not np.array_equal(getattr(g, field), getattr(ref, field)):
        raise errors.InputError(
            f'Grid {name} uses a different {field} than {ref_name}; '
            'comparison panels need a shared plane')


def compare_on_shared_plane(predictors: Mapping[str, Any],
                            center: np.ndarray,
                            seed: int,
                            extent: float = DEFAULT_EXTENT,
                            resolution: int = DEFAULT_RESOLUTION,
                            batch_size: int = 256) -> Dict[str, RegionGrid]:
  """Grids of several predictors over one plane, in the given order."""
  center = np.asarray(center, np.float32)
  v1, v2 = plane_directions(center.shape, seed)
  return collections.OrderedDict(
      (name, compute_grid(p, center, v1, v2, extent, resolution, seed=seed,
                          model_name=name, batch_size=batch_size))
      for name, p in predictors.items())


def export_panels(grids: Mapping[str, RegionGrid],
                  out_dir: epath.PathLike,
                  tag: str,
                  cell_size: int = DEFAULT_CELL_SIZE,
                  gap: int = 4) -> Dict[str, Any]:
  """Exports every grid plus one side-by-side panel image.

  Raises:
    InputError: if the grids do not share one plane.
  """
  check_shared_plane(grids)
  out_dir = epath.Path(out_dir)
  out_dir.mkdir(parents=True, exist_ok=True)
  files = {}
  tiles = []
  for name, grid in grids.items():
    files[name] = export_grid(grid, out_dir / f'{tag}_{name}', cell_size)
    tiles.append(colorize(grid.labels, cell_size))
  if tiles:
    h = tiles[0].shape[0]
    spacer = np.full((h, gap, 3), 255, np.uint8)
    row = [t for tile in tiles for t in (tile, spacer)][:-1]
    panel = out_dir / f'{tag}_panel.png'
    with panel.open('wb') as f:
      Image.fromarray(np.concatenate(row, axis=1), 'RGB').save(
          f, format='PNG')
    files['panel'] = panel
  summary = {
      name: {'roughness': roughness(g.labels), 'center_label': g.center_label}
      for name, g in grids.items()
  }
  io_utils.write_json(out_dir / f'{tag}_summary.json', summary)
  logging.info('Exported %d region grids for %s to %s', len(grids), tag,
               out_dir)
  return {'files': files, 'summary': summary}


def compression_series(
    baseline: models.ParameterStore,
    calibration_data: datasets.Dataset,
    bits: Sequence[int] = (5, 4, 3),
    keep_ratios: Sequence[float] = (0.9, 0.7, 0.4, 0.1),
    quant: Optional[quantizer.QuantConfig] = None,
) -> Dict[str, Any]:
  """The baseline, its quantized variants and one-shot L1 pruned variants.

  None of the variants is fine-tuned, so the maps show what compression
  alone does to the decision regions.
  """
  quant = quant or quantizer.QuantConfig()
  series = collections.OrderedDict(O=baseline)
  for b in bits:
    cfg = dataclasses.replace(quant, weight_bits=b, activation_bits=b)
    series[f'Q{b}bit'] = quantizer.quantize_model(baseline, calibration_data,
                                                  cfg)
  for r in keep_ratios:
    schedule = pruner.SparsitySchedule(target_keep_ratio=r, steps=1,
                                       finetune_epochs_per_step=0)
    pruned, _, _ = pruner.iterative_prune(baseline, schedule,
                                          lambda s, m, e: s)
    series[f'S{int(round(r * 100))}pct'] = pruned
  return series
