# Copyright 2022 Shawn Qureshi and individual contributors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import argparse
import sys

from .errors import EXIT_USAGE

DEFAULT_DIGITS = 5
QUANTITIES = ('joint-tail', 'cdf', 'tvar', 'allocate', 'default', 'unpaid')

class Parser(argparse.ArgumentParser):
  """Parser prints usage and exits 64 on any command line error."""

  def error(self, message):
    self.print_usage(sys.stderr)
    self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")

def _common():
  common = Parser(add_help=False)
  common.add_argument(
    '-v',
    '--verbose',
    help = 'Increase verbosity',
    action = 'store_true'
  )
  common.add_argument(
    '-d',
    '--debug',
    help = 'Display debug messages',
    action = 'store_true'
  )
  common.add_argument(
    '-o',
    '--output',
    help = 'Write log messages to a file (defaults to stderr)'
  )
  common.add_argument(
    '--digits',
    help = f"Decimals in numeric output (default {DEFAULT_DIGITS}, reproduce-tables keeps the published precision)",
    type = int
  )
  common.add_argument(
    '--procs',
    help = 'Number of dask workers for sampling and table fan-out',
    type = int,
    default = 4
  )
  common.add_argument(
    '--force',
    help = 'Accept a model whose dependence structure fails the admissibility check',
    action = 'store_true'
  )
  return common

def _command(subparsers, common, name, description, model=True):
  command = subparsers.add_parser(name, parents=[common], help=description, description=description)
  if model:
    command.add_argument(
      'model',
      help = 'Model file (JSON, schema 1)'
    )
  return command

def _levels(command, required=True):
  command.add_argument(
    '--p',
    help = 'Confidence level(s) in (0, 1)',
    type = float,
    nargs = '+',
    required = required
  )

def getArgs(argv=None):
  """
  getArgs processes command line args and returns an argparse Namespace object

  :param argv: argument list, defaults to sys.argv[1:]
  """
  args = argparse.Namespace()
  common = _common()

  parser = Parser(
    prog='sarmanov-reinsurance',
    description='Stop-loss reinsurance aggregation under Sarmanov dependent mixed Erlang risks'
  )
  subparsers = parser.add_subparsers(dest='command', metavar='command')
  subparsers.required = True

  _command(subparsers, common, 'validate', 'Check that the dependence structure gives a proper density')
  _command(subparsers, common, 'moments', 'Mean, variance, skewness and kurtosis of every risk')

  command = _command(subparsers, common, 'joint-tail', 'P(S1 > u1, S2 > u2)')
  command.add_argument('--u1', help = 'Threshold of portfolio 1', type = float, required = True)
  command.add_argument('--u2', help = 'Threshold of portfolio 2', type = float, required = True)

  command = _command(subparsers, common, 'cdf', 'Distribution function of the reinsurer loss R2')
  command.add_argument('--s', help = 'Point(s) at which to evaluate', type = float, nargs = '+', required = True)

  _levels(_command(subparsers, common, 'var', 'Value-at-Risk of R2'))
  _levels(_command(subparsers, common, 'tvar', 'Value-at-Risk and Tail Value-at-Risk of R2'))
  _levels(_command(subparsers, common, 'allocate', 'TVaR allocation of R2 to the two treaties'))
  _levels(_command(subparsers, common, 'diversify', 'Standalone TVaRs and diversification benefit'))

  command = _command(subparsers, common, 'default', 'Default probability and expected deficit of capital K')
  command.add_argument('--capital', help = 'Reinsurer capital K', type = float, nargs = '+', required = True)

  command = _command(subparsers, common, 'unpaid', 'Expected unpaid losses of each treaty')
  command.add_argument('--k1', help = 'Capital allocated to treaty 1', type = float, required = True)
  command.add_argument('--k2', help = 'Capital allocated to treaty 2', type = float, required = True)

  command = _command(subparsers, common, 'mc', 'Monte Carlo estimate with standard error next to the closed form')
  command.add_argument('--n', help = 'Number of draws', type = int, default = 1_000_000)
  command.add_argument('--seed', help = 'Random seed', type = int, default = 20240101)
  command.add_argument('--quantity', help = 'Quantity to estimate', choices = QUANTITIES, required = True)
  command.add_argument('--u1', type = float, help = 'joint-tail threshold of portfolio 1')
  command.add_argument('--u2', type = float, help = 'joint-tail threshold of portfolio 2')
  command.add_argument('--s', type = float, help = 'cdf point')
  command.add_argument('--p', type = float, help = 'tvar and allocate level')
  command.add_argument('--capital', type = float, help = 'default capital')
  command.add_argument('--k1', type = float, help = 'unpaid capital of treaty 1')
  command.add_argument('--k2', type = float, help = 'unpaid capital of treaty 2')
  command.add_argument('--dump', help = 'Write the sampled vectors to this CSV file')

  command = _command(subparsers, common, 'reproduce-tables', 'Recompute the published tables from the shipped fixtures', model=False)
  command.add_argument(
    '--table',
    help = 'Table number (all when omitted)',
    type = int,
    choices = [1, 3, 4, 5, 6, 7],
    action = 'append'
  )
  command.add_argument(
    '--check',
    help = 'Report closed form, Monte Carlo and a verdict for every printed cell instead of the tables',
    action = 'store_true'
  )
  command.add_argument('--draws', help = 'Monte Carlo draws per fixture for --check', type = int, default = 2_000_000)
  command.add_argument('--seed', help = 'Random seed for --check', type = int, default = 20240101)

  parser.parse_args(sys.argv[1:] if argv is None else argv, namespace=args)

  if args.command == 'mc':
    needed = {
      'joint-tail': ('u1', 'u2'),
      'cdf': ('s',),
      'tvar': ('p',),
      'allocate': ('p',),
      'default': ('capital',),
      'unpaid': ('k1', 'k2'),
    }[args.quantity]
    missing = [f"--{name}" for name in needed if getattr(args, name) is None]
    if missing:
      parser.error(f"mc --quantity {args.quantity} needs {' '.join(missing)}")

  return args
