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

import sys
from typing import Any, List

import numpy as np
import pandas as pd

from . import argprocess
from . import monitor
from . import oracle
from . import reinsurance
from . import tables
from .erlang_core import me_summary
from .errors import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION
from .modelfile import parse_model
from .sarmanov import Admissibility
from .tables import format_number, write_frame

logger = monitor.getLogger()

def _load(args):
  model, program, _ = parse_model(args.model, force=args.force)
  return model, program

def _frame(rows, digits):
  """Formats every float cell with the requested decimals."""
  formatted = []
  for row in rows:
    formatted.append({
      key: format_number(value, digits) if isinstance(value, (float, np.floating)) else value
      for key, value in row.items()
    })
  return pd.DataFrame(formatted)

def _validate(args, digits):
  model, _, report = parse_model(args.model, force=True)
  row = {
    'status': report.status.value,
    'minimum': '' if report.minimum is None else format_number(report.minimum, digits),
    'corner': '' if report.corner is None else ' '.join(format_number(v, digits) for v in report.corner),
    'negative_directions': ' '.join('{' + ','.join(str(i + 1) for i in u) + '}' for u in report.negative_directions),
    'message': report.message,
  }
  code = EXIT_VALIDATION if report.status == Admissibility.VIOLATION else EXIT_OK
  if code != EXIT_OK:
    logger.error(f"{args.model}: {report.describe()}")
  return pd.DataFrame([row]), code

def _moments(args, digits):
  model, _ = _load(args)
  rows = []
  for i, dist in enumerate(model.marginals):
    summary = me_summary(dist)
    rows.append({
      'risk': f"X{i + 1}",
      'mean': summary.mean,
      'variance': summary.variance,
      'skewness': summary.skewness,
      'kurtosis': summary.kurtosis,
    })
  return _frame(rows, digits), EXIT_OK

def _joint_tail(args, digits):
  model, program = _load(args)
  value = reinsurance.joint_tail(model, program, args.u1, args.u2)
  return _frame([{'u1': args.u1, 'u2': args.u2, 'probability': value}], digits), EXIT_OK

def _cdf(args, digits):
  model, program = _load(args)
  rows = [{'s': s, 'cdf': reinsurance.aggregate_df(model, program, s)} for s in args.s]
  return _frame(rows, digits), EXIT_OK

def _var(args, digits):
  model, program = _load(args)
  rows = [{'p': p, 'var': reinsurance.var_tvar(model, program, p)[0]} for p in args.p]
  return _frame(rows, digits), EXIT_OK

def _tvar(args, digits):
  model, program = _load(args)
  rows = []
  for p in args.p:
    var, tvar = reinsurance.var_tvar(model, program, p)
    rows.append({'p': p, 'var': var, 'tvar': tvar})
  return _frame(rows, digits), EXIT_OK

def _allocate(args, digits):
  model, program = _load(args)
  rows = []
  for p in args.p:
    _, tvar = reinsurance.var_tvar(model, program, p)
    k1, k2 = reinsurance.tvar_allocate(model, program, p)
    rows.append({'p': p, 'tvar': tvar, 'k1': k1, 'k2': k2})
  return _frame(rows, digits), EXIT_OK

def _diversify(args, digits):
  model, program = _load(args)
  rows = []
  for p in args.p:
    _, tvar = reinsurance.var_tvar(model, program, p)
    rows.append({
      'p': p,
      'tvar_r2': tvar,
      'tvar_t1': reinsurance.portfolio_var_tvar(model, program, 1, p)[1],
      'tvar_t2': reinsurance.portfolio_var_tvar(model, program, 2, p)[1],
      'diversification': reinsurance.diversification(model, program, p),
    })
  return _frame(rows, digits), EXIT_OK

def _default(args, digits):
  model, program = _load(args)
  rows = []
  for capital in args.capital:
    rows.append({
      'capital': capital,
      'default_prob': reinsurance.default_prob(model, program, capital),
      'default_value': reinsurance.default_value(model, program, capital),
    })
  return _frame(rows, digits), EXIT_OK

def _unpaid(args, digits):
  model, program = _load(args)
  unpaid_1, unpaid_2 = reinsurance.unpaid_losses(model, program, args.k1, args.k2)
  row = {'k1': args.k1, 'k2': args.k2, 'unpaid_1': unpaid_1, 'unpaid_2': unpaid_2, 'total': unpaid_1 + unpaid_2}
  return _frame([row], digits), EXIT_OK

def _closed_form(model, program, quantity):
  kind = quantity.kind
  if kind == oracle.QuantityKind.JOINT_TAIL:
    return [reinsurance.joint_tail(model, program, *quantity.args)]
  if kind == oracle.QuantityKind.AGG_DF:
    return [reinsurance.aggregate_df(model, program, *quantity.args)]
  if kind == oracle.QuantityKind.TVAR:
    return [reinsurance.var_tvar(model, program, *quantity.args)[1]]
  if kind == oracle.QuantityKind.ALLOC:
    return list(reinsurance.tvar_allocate(model, program, *quantity.args))
  if kind == oracle.QuantityKind.DEFAULT:
    return [reinsurance.default_value(model, program, *quantity.args)]
  return list(reinsurance.unpaid_losses(model, program, *quantity.args))

def _quantity(args):
  builders = {
    'joint-tail': lambda: oracle.Quantity.joint_tail(args.u1, args.u2),
    'cdf': lambda: oracle.Quantity.agg_df(args.s),
    'tvar': lambda: oracle.Quantity.tvar(args.p),
    'allocate': lambda: oracle.Quantity.alloc(args.p),
    'default': lambda: oracle.Quantity.default(args.capital),
    'unpaid': lambda: oracle.Quantity.unpaid(args.k1, args.k2),
  }
  return builders[args.quantity]()

def _mc(args, digits):
  model, program = _load(args)
  quantity = _quantity(args)
  batch = oracle.draw(model, args.n, args.seed, procs=args.procs)
  if args.dump:
    oracle.dump_batch(batch, args.dump)
  result = oracle.estimate(batch, program, quantity)
  values = np.atleast_1d(result.value)
  errors = np.atleast_1d(result.stderr)
  rows = []
  for component, (value, error, closed) in enumerate(zip(values, errors, _closed_form(model, program, quantity))):
    rows.append({
      'quantity': args.quantity,
      'component': str(component + 1),
      'estimate': float(value),
      'stderr': float(error),
      'closed_form': float(closed),
      'z': float((value - closed) / error) if error > 0 else 0.0,
    })
  if batch.signed:
    logger.info(f"Signed weights over {batch.count} draws, negative share {batch.negative_share:.3e}")
  else:
    logger.info(f"Acceptance rate {batch.acceptance_rate:.4f} over {batch.count} draws")
  return _frame(rows, digits), EXIT_OK

COMMANDS = {
  'validate': _validate,
  'moments': _moments,
  'joint-tail': _joint_tail,
  'cdf': _cdf,
  'var': _var,
  'tvar': _tvar,
  'allocate': _allocate,
  'diversify': _diversify,
  'default': _default,
  'unpaid': _unpaid,
  'mc': _mc,
}

def dispatch(argv: List[str]) -> Any:
  """
  dispatch does the official cli functions and writes CSV to stdout.

  :param argv: List of arguments passed to cli command
  :return: exit code
  """

  args = argprocess.getArgs(argv)
  monitor.configure(args)
  logger.debug(f"Command line: {args}")

  if args.command == 'reproduce-tables' and args.check:
    report = tables.check(tables=args.table or tables.TABLES, procs=args.procs, draws=args.draws, seed=args.seed)
    write_frame(report, sys.stdout)
    verdicts = report['verdict'].value_counts().to_dict()
    summary = ', '.join(f"{count} {verdict}" for verdict, count in verdicts.items())
    logger.info(f"Checked {len(report)} printed cells: {summary}")
    if verdicts.get(tables.CLOSED_FORM_REFUTED, 0):
      logger.error("Monte Carlo rejects the closed form for at least one cell")
      return EXIT_NUMERICAL
    return EXIT_OK

  if args.command == 'reproduce-tables':
    frames = tables.reproduce(tables=args.table or tables.TABLES, procs=args.procs, digits=args.digits)
    for position, frame in enumerate(frames.values()):
      if position:
        sys.stdout.write('\n')
      write_frame(frame, sys.stdout)
    return EXIT_OK

  digits = argprocess.DEFAULT_DIGITS if args.digits is None else args.digits
  frame, code = COMMANDS[args.command](args, digits)
  write_frame(frame, sys.stdout)
  return code
