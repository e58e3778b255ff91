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

r"""Command line entry point of hcekit.

Example usage:
python hcekit/main.py run-hce \
    --config=test.synthetic.ToySyntheticHce --seed=0 --out=/tmp/hce/toy

python hcekit/main.py sweep-alpha --config=/path/to/experiment.json \
    --alphas=0.1,0.5,0.9 --keep_ratios=0.5 --out=/tmp/hce/sweep

Exit codes: 0 on success, 2 on configuration or usage errors, 3 on any other
failure.
"""

import time
from typing import Optional, Sequence

from absl import app
from absl import flags
from absl import logging

from hcekit import commands
from hcekit import errors
from hcekit import experiment_config
from hcekit import io_utils
from hcekit import region_viz
from hcekit import reports
from hcekit import setup_jax

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILURE = 3

FLAGS = flags.FLAGS

flags.DEFINE_string(
    'config', None,
    'Experiment config: a JSON file, or the name of an experiment registered '
    'with @experiment_registry.register.')
flags.DEFINE_integer('seed', None,
                     'Run seed; defaults to the first seed of the config.')
flags.DEFINE_bool('resume', False,
                  'Continue the run in --out from its completed stages.')
flags.DEFINE_string(
    'out', None, 'Run (or sweep) directory; defaults to the output_dir of '
    'the config or $HCEKIT_OUTPUT_DIR.')
flags.DEFINE_list('alphas', None, 'sweep-alpha: alpha values.')
flags.DEFINE_list('keep_ratios', None, 'sweep-alpha: target keep ratios.')
flags.DEFINE_string('run_dir', None, 'A finished run directory.')
flags.DEFINE_list('points', ['0'],
                  'visualize-region: test sample indices to center on.')
flags.DEFINE_list(
    'counts', None, 'diversity-report: |E_Q|,|E_S|,|E_Q & E_S| given '
    'directly instead of --run_dir.')
flags.DEFINE_bool(
    'series', False, 'visualize-region: compare the baseline with its '
    'quantized and one-shot pruned variants instead of O/Q/S/HCE.')
flags.DEFINE_float('extent', region_viz.DEFAULT_EXTENT,
                   'visualize-region: half-width of the plane.')
flags.DEFINE_integer('resolution', region_viz.DEFAULT_RESOLUTION,
                     'visualize-region: grid points per axis (odd).')
flags.DEFINE_bool('jax_enable_checks', False,
                  'Enables jax_enable_checks for debugging.')
flags.DEFINE_enum(
    'jax_traceback_filtering_option', 'auto',
    ['off', 'auto', 'tracebackhide', 'remove_frames'],
    'Controls how JAX filters internal frames out of tracebacks.')


def _floats(values: Optional[Sequence[str]],
            flag: str) -> Optional[Sequence[float]]:
  if not values:
    return None
  try:
    return [float(v) for v in values]
  except ValueError as e:
    raise errors.ConfigError(f'--{flag} must hold numbers: {e}') from e


def _ints(values: Sequence[str], flag: str) -> Sequence[int]:
  try:
    return [int(v) for v in values]
  except ValueError as e:
    raise errors.ConfigError(f'--{flag} must hold integers: {e}') from e


def _experiment() -> experiment_config.ExperimentConfig:
  if not FLAGS.config:
    raise errors.ConfigError('--config is required')
  return experiment_config.resolve(FLAGS.config).validate()


def _run_dir() -> str:
  run_dir = FLAGS.run_dir or FLAGS.out
  if not run_dir:
    raise errors.ConfigError('--run_dir is required')
  return run_dir


def run_command(command: str) -> None:
  """Runs one subcommand with the parsed flags."""
  if command == 'train-baseline':
    commands.train_baseline(_experiment(), seed=FLAGS.seed, out=FLAGS.out,
                            resume=FLAGS.resume)
  elif command == 'quantize':
    commands.quantize(_experiment(), seed=FLAGS.seed, out=FLAGS.out)
  elif command == 'run-hce':
    result = commands.run_hce(_experiment(), seed=FLAGS.seed, out=FLAGS.out,
                              resume=FLAGS.resume)
    print((result.run_dir / reports.REPORT_FILENAME).read_text(), end='')
  elif command == 'sweep-alpha':
    commands.sweep_alpha(
        _experiment(),
        alphas=_floats(FLAGS.alphas, 'alphas'),
        keep_ratios=_floats(FLAGS.keep_ratios, 'keep_ratios'),
        seed=FLAGS.seed, out=FLAGS.out, resume=FLAGS.resume)
  elif command == 'evaluate':
    print(io_utils.dumps(commands.evaluate(_run_dir())))
  elif command == 'diversity-report':
    counts = None
    if FLAGS.counts:
      counts = _ints(FLAGS.counts, 'counts')
      if len(counts) != 3:
        raise errors.ConfigError('--counts needs exactly three integers')
    _, text = commands.diversity_report(FLAGS.run_dir, counts)
    print(text, end='')
  elif command == 'visualize-region':
    summary = commands.visualize_region(
        _run_dir(), _ints(FLAGS.points, 'points'),
        seed=FLAGS.seed or 0, extent=FLAGS.extent,
        resolution=FLAGS.resolution, series=FLAGS.series,
        out=FLAGS.out if FLAGS.run_dir else None)
    print(io_utils.dumps(summary))
  elif command == 'cost-report':
    exp = _experiment() if FLAGS.config else None
    print(commands.cost_report(exp, FLAGS.run_dir), end='')
  elif command == 'report':
    for path in commands.report(_run_dir()).values():
      logging.info('Wrote %s', path)
  else:
    raise app.UsageError(
        f'Unknown command {command!r}; expected one of '
        f'{", ".join(commands.COMMANDS)}', exitcode=EXIT_CONFIG)


def dispatch(command: str) -> int:
  """Runs `command` and maps the outcome to an exit code."""
  start = time.time()
  try:
    run_command(command)
  except (errors.ConfigError, app.UsageError) as e:
    logging.error('%s: %s', command, e)
    return EXIT_CONFIG
  except Exception as e:  # pylint: disable=broad-except
    logging.exception('%s failed: %s', command, e)
    return EXIT_FAILURE
  logging.info('%s finished in %.1fs', command, time.time() - start)
  return EXIT_OK


def main(argv: Sequence[str]) -> int:
  if len(argv) != 2:
    raise app.UsageError(
        f'Expected one command out of {", ".join(commands.COMMANDS)}',
        exitcode=EXIT_CONFIG)
  setup_jax.setup_jax(setup_jax.JaxOptions(
      enable_checks=FLAGS.jax_enable_checks,
      traceback_filtering=FLAGS.jax_traceback_filtering_option))
  return dispatch(argv[1])


def run() -> None:
  app.run(main)


if __name__ == '__main__':
  run()
