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

"""
Reproduction of the published result tables from the shipped fixtures.

Every cell is formatted to a fixed number of decimals before it reaches the
DataFrame, so the CSV bytes only depend on the computed values and never on
pandas float formatting or the locale.

check() sets the printed cells against the closed form and a Monte Carlo
estimate. Only a closed form the sampler rejects counts as a failure, a
printed value can be refuted on its own.
"""

from dataclasses import dataclass

import dask
import numpy as np
import pandas as pd

from . import monitor
from . import oracle
from .erlang_core import me_summary
from .errors import DomainError
from .modelfile import load_fixture
from .reinsurance import aggregate_risk, joint_tail, risk_profile

logger = monitor.getLogger()

CASES = ('independence', 'laplace', 'fgm')
JOINT_TAIL_THRESHOLDS = ((20, 15), (25, 20), (30, 25), (35, 30))
VAR_LEVELS = (0.9, 0.925, 0.95, 0.975, 0.99, 0.995, 0.999)
CAPITAL_LEVELS = (0.95, 0.975, 0.99, 0.999)
TABLES = (1, 3, 4, 5, 6, 7)

@dataclass(frozen=True)
class Precision:
  amounts: int
  probabilities: int

PRECISION = {
  1: Precision(amounts=2, probabilities=2),
  3: Precision(amounts=4, probabilities=4),
  4: Precision(amounts=2, probabilities=2),
  5: Precision(amounts=2, probabilities=2),
  6: Precision(amounts=2, probabilities=2),
  7: Precision(amounts=2, probabilities=5),
}

def format_number(value, digits):
  """
  format_number renders a fixed-point decimal, never as -0.00

  :param value: float
  :param digits: decimals
  """
  text = f"{float(value):.{digits}f}"
  if float(text) == 0.0:
    text = f"{0.0:.{digits}f}"
  return text

def write_frame(frame, stream):
  frame.to_csv(stream, index=False, lineterminator='\n')

def _models():
  return {case: load_fixture(f"tables_{case}") for case in CASES}

def _profiles(models, cases, levels, procs):
  """
  _profiles evaluates risk_profile for every (case, p) pair with dask, in a
  fixed order
  """
  keys = [(case, p) for case in cases for p in levels]
  for case in cases:
    # build the cached term lists once, before the threads share them
    aggregate_risk(*models[case])

  lazy_results = []
  for case, p in keys:
    model, program = models[case]
    lazy_results.append(dask.delayed(risk_profile)(model, program, p))

  results = dask.compute(*lazy_results, scheduler='threads', num_workers=int(procs))
  return dict(zip(keys, results))

def table_1(models, precision):
  model, _ = models['independence']
  rows = []
  for i, dist in enumerate(model.marginals):
    summary = me_summary(dist)
    rows.append({
      'risk': f"X{i + 1}",
      'beta': f"{dist.scale:g}",
      'weights': ' '.join(f"{w:g}" for w in dist.weights),
      'mean': format_number(summary.mean, precision.amounts),
      'variance': format_number(summary.variance, precision.amounts),
      'skewness': format_number(summary.skewness, precision.amounts),
      'kurtosis': format_number(summary.kurtosis, precision.amounts),
    })
  return pd.DataFrame(rows)

def table_3(models, precision):
  rows = []
  for u1, u2 in JOINT_TAIL_THRESHOLDS:
    row = {'u1': str(u1), 'u2': str(u2)}
    for case in CASES:
      model, program = models[case]
      row[case] = format_number(joint_tail(model, program, u1, u2), precision.probabilities)
    rows.append(row)
  return pd.DataFrame(rows)

def table_4(profiles, precision):
  rows = []
  for p in VAR_LEVELS:
    row = {'p': f"{p:g}"}
    for case in CASES:
      profile = profiles[(case, p)]
      row[f"{case}_var"] = format_number(profile.var, precision.amounts)
      row[f"{case}_tvar"] = format_number(profile.tvar, precision.amounts)
    rows.append(row)
  return pd.DataFrame(rows)

def table_5(profiles, precision):
  rows = []
  for case in CASES:
    for p in CAPITAL_LEVELS:
      profile = profiles[(case, p)]
      rows.append({
        'case': case,
        'p': f"{p:g}",
        'tvar_r2': format_number(profile.tvar, precision.amounts),
        'tvar_t1': format_number(profile.tvar_t1, precision.amounts),
        'tvar_t2': format_number(profile.tvar_t2, precision.amounts),
        'diversification_pct': format_number(100.0 * profile.diversification, precision.amounts),
      })
  return pd.DataFrame(rows)

def table_6(profiles, precision):
  rows = []
  for p in VAR_LEVELS:
    row = {'p': f"{p:g}"}
    for case in ('laplace', 'fgm'):
      profile = profiles[(case, p)]
      row[f"{case}_tvar"] = format_number(profile.tvar, precision.amounts)
      row[f"{case}_k1"] = format_number(profile.k1, precision.amounts)
      row[f"{case}_k2"] = format_number(profile.k2, precision.amounts)
    rows.append(row)
  return pd.DataFrame(rows)

def table_7(profiles, precision):
  rows = []
  for case in CASES:
    for p in CAPITAL_LEVELS:
      profile = profiles[(case, p)]
      rows.append({
        'case': case,
        'p': f"{p:g}",
        'capital': format_number(profile.tvar, precision.amounts),
        'default_prob': format_number(profile.default_prob, precision.probabilities),
        'default_value': format_number(profile.default_value, precision.probabilities),
        'k1': format_number(profile.k1, precision.amounts),
        'unpaid_1': format_number(profile.unpaid_1, precision.probabilities),
        'k2': format_number(profile.k2, precision.amounts),
        'unpaid_2': format_number(profile.unpaid_2, precision.probabilities),
      })
  return pd.DataFrame(rows)

def reproduce(tables=TABLES, procs=4, digits=None):
  """
  reproduce builds the requested tables from the shipped fixtures

  :param tables: table numbers, a subset of 1, 3, 4, 5, 6, 7
  :param procs: dask worker threads for the (case, p) fan-out
  :param digits: override every table's decimals, None keeps the published precision
  :return: dict of table number to DataFrame of formatted cells, in the order asked
  """
  unknown = [t for t in tables if t not in TABLES]
  if unknown:
    raise DomainError(f"Unknown table {unknown[0]}, expected one of {', '.join(str(t) for t in TABLES)}")
  models = _models()

  profiles = {}
  if any(t in (4, 5, 6, 7) for t in tables):
    levels = sorted(set(VAR_LEVELS) | set(CAPITAL_LEVELS))
    profiles = _profiles(models, CASES, levels, procs)

  frames = {}
  for number in tables:
    precision = PRECISION[number] if digits is None else Precision(digits, digits)
    logger.info(f"Building table {number}")
    if number == 1:
      frames[number] = table_1(models, precision)
    elif number == 3:
      frames[number] = table_3(models, precision)
    else:
      builder = {4: table_4, 5: table_5, 6: table_6, 7: table_7}[number]
      frames[number] = builder(profiles, precision)
  return frames

# Printed values of the published tables, keyed the way check() walks them.
PUBLISHED_JOINT_TAIL = {
  (20, 15): (0.1494, 0.1569, 0.1573),
  (25, 20): (0.0697, 0.0751, 0.0795),
  (30, 25): (0.0304, 0.0331, 0.0374),
  (35, 30): (0.0125, 0.0138, 0.0165),
}

# p: ((VaR, TVaR) for independence, laplace, fgm)
PUBLISHED_VAR_TVAR = {
  0.9: ((11.73, 22.64), (11.98, 22.93), (13.92, 25.35)),
  0.925: ((14.98, 25.76), (15.24, 26.06), (17.36, 28.62)),
  0.95: ((19.47, 30.10), (19.75, 30.41), (22.10, 33.14)),
  0.975: ((26.97, 37.40), (27.27, 37.73), (29.93, 40.68)),
  0.99: ((36.64, 46.85), (36.97, 47.21), (39.93, 50.40)),
  0.995: ((43.80, 53.89), (44.15, 54.25), (47.30, 57.59)),
  0.999: ((60.08, 69.92), (60.45, 70.31), (63.91, 73.89)),
}

# (case, p): (TVaR_T1, TVaR_T2)
PUBLISHED_STANDALONE = {
  ('independence', 0.95): (24.87, 18.26),
  ('independence', 0.975): (32.34, 24.26),
  ('independence', 0.99): (41.89, 31.97),
  ('independence', 0.999): (64.84, 50.55),
  ('laplace', 0.95): (25.11, 18.41),
  ('laplace', 0.975): (32.58, 24.42),
  ('laplace', 0.99): (42.14, 32.13),
  ('laplace', 0.999): (65.07, 50.72),
  ('fgm', 0.95): (27.71, 18.64),
  ('fgm', 0.975): (35.40, 24.69),
  ('fgm', 0.99): (45.14, 32.44),
  ('fgm', 0.999): (68.32, 51.08),
}

# (case, p): (K1, K2), the dependent cases from table 6 and independence from table 7
PUBLISHED_ALLOCATION = {
  ('laplace', 0.9): (14.56, 8.37), ('fgm', 0.9): (16.19, 9.16),
  ('laplace', 0.925): (16.85, 9.21), ('fgm', 0.925): (18.62, 10.00),
  ('laplace', 0.95): (20.15, 10.26), ('fgm', 0.95): (22.12, 11.02),
  ('laplace', 0.975): (25.99, 11.74), ('fgm', 0.975): (28.21, 12.47),
  ('laplace', 0.99): (33.94, 13.27), ('fgm', 0.99): (36.39, 14.01),
  ('laplace', 0.995): (40.03, 14.22), ('fgm', 0.995): (42.59, 15.00),
  ('laplace', 0.999): (54.20, 16.11), ('fgm', 0.999): (56.79, 17.10),
  ('independence', 0.95): (19.69, 10.41), ('independence', 0.975): (25.47, 11.93),
  ('independence', 0.99): (33.35, 13.50), ('independence', 0.999): (53.59, 16.33),
}

# (case, p): (phi(K), U(K), U(K1, K), U(K2, K)) at K = TVaR_p
PUBLISHED_DEFAULTS = {
  ('independence', 0.95): (0.01860, 0.19288, 0.15436, 0.03852),
  ('independence', 0.975): (0.00929, 0.09483, 0.07928, 0.01555),
  ('independence', 0.99): (0.00370, 0.03725, 0.03228, 0.00497),
  ('independence', 0.999): (0.00036, 0.00360, 0.00321, 0.00039),
  ('laplace', 0.95): (0.01863, 0.19338, 0.15586, 0.03752),
  ('laplace', 0.975): (0.00930, 0.09750, 0.07979, 0.01525),
  ('laplace', 0.99): (0.00371, 0.03731, 0.03237, 0.00494),
  ('laplace', 0.999): (0.00037, 0.00360, 0.00320, 0.00040),
  ('fgm', 0.95): (0.01870, 0.19924, 0.16237, 0.03687),
  ('fgm', 0.975): (0.00932, 0.09740, 0.08212, 0.01528),
  ('fgm', 0.99): (0.00372, 0.03805, 0.03286, 0.00519),
  ('fgm', 0.999): (0.00037, 0.00364, 0.00317, 0.00047),
}

CHECKED_TABLES = (3, 4, 5, 6, 7)
CHECK_DRAWS = 2_000_000
CHECK_SEED = 20240101
CHECK_SIGMAS = 5.0

CONFIRMED = 'confirmed'
UNRESOLVED = 'unresolved'
PUBLISHED_REFUTED = 'published refuted'
CLOSED_FORM_REFUTED = 'closed form refuted'

@dataclass(frozen=True)
class PublishedCell:
  table: int
  case: str
  quantity: str
  at: tuple
  value: float
  digits: int

  def describe(self):
    return ' '.join(f"{v:g}" for v in self.at)

def published_cells(tables=CHECKED_TABLES):
  """
  published_cells lists the printed cells of the requested tables that a
  sampler can check, in table order

  :param tables: table numbers
  :return: list of PublishedCell
  """
  cells = []
  for number in tables:
    if number == 3:
      for thresholds, values in PUBLISHED_JOINT_TAIL.items():
        for case, value in zip(CASES, values):
          cells.append(PublishedCell(3, case, 'joint_tail', thresholds, value, 4))
    elif number == 4:
      for p, pairs in PUBLISHED_VAR_TVAR.items():
        for case, (var, tvar) in zip(CASES, pairs):
          cells.append(PublishedCell(4, case, 'var', (p,), var, 2))
          cells.append(PublishedCell(4, case, 'tvar', (p,), tvar, 2))
    elif number == 5:
      for (case, p), (tvar_t1, tvar_t2) in PUBLISHED_STANDALONE.items():
        cells.append(PublishedCell(5, case, 'tvar_t1', (p,), tvar_t1, 2))
        cells.append(PublishedCell(5, case, 'tvar_t2', (p,), tvar_t2, 2))
    elif number in (6, 7):
      for (case, p), (k1, k2) in PUBLISHED_ALLOCATION.items():
        if (case == 'independence') == (number == 7):
          cells.append(PublishedCell(number, case, 'k1', (p,), k1, 2))
          cells.append(PublishedCell(number, case, 'k2', (p,), k2, 2))
      if number == 7:
        for (case, p), values in PUBLISHED_DEFAULTS.items():
          for quantity, value in zip(('default_prob', 'default_value', 'unpaid_1', 'unpaid_2'), values):
            cells.append(PublishedCell(7, case, quantity, (p,), value, 5))
  return cells

def judge(published, closed, mc, digits, sigmas=CHECK_SIGMAS):
  """
  judge classifies one cell. The closed form is wrong only when the sampler
  rejects it. A printed value that misses the closed form by more than one
  unit in its last place is refuted when the sampler rejects it as well.

  :param published: printed value
  :param closed: closed-form value
  :param mc: oracle.Estimate
  :param digits: printed decimals
  :return: verdict string
  """
  unit = 10.0 ** -digits
  if not mc.agrees_with(closed, sigmas=sigmas):
    return CLOSED_FORM_REFUTED
  if abs(published - closed) <= unit + 1e-12:
    return CONFIRMED
  if not mc.agrees_with(published, slack=unit / 2, sigmas=sigmas):
    return PUBLISHED_REFUTED
  return UNRESOLVED

class _CaseSampler:
  """Monte Carlo side of check() for one fixture, caching the vector-valued estimates."""

  def __init__(self, model, program, draws, seed, procs):
    self.program = program
    self.batch = oracle.draw(model, draws, seed, procs=procs)
    self.loss = oracle.losses(self.batch, program)
    self._vectors = {}

  def _vector(self, quantity):
    if quantity not in self._vectors:
      self._vectors[quantity] = oracle.estimate(self.batch, self.program, quantity)
    return self._vectors[quantity]

  def estimate(self, cell, profile):
    batch, loss = self.batch, self.loss
    if cell.quantity == 'joint_tail':
      u1, u2 = cell.at
      return oracle.probability(batch, (loss.s1 > u1) & (loss.s2 > u2))
    (p,) = cell.at
    if cell.quantity == 'var':
      return oracle.value_at_risk(batch, loss.r, p)
    if cell.quantity == 'tvar':
      return oracle.tail_value(batch, loss.r, p)
    if cell.quantity in ('tvar_t1', 'tvar_t2'):
      return oracle.tail_value(batch, loss.treaty(int(cell.quantity[-1])), p)
    if cell.quantity == 'default_prob':
      return oracle.probability(batch, loss.r > profile.tvar)
    if cell.quantity == 'default_value':
      return oracle.expectation(batch, np.maximum(loss.r - profile.tvar, 0.0))
    if cell.quantity in ('k1', 'k2'):
      vector = self._vector(oracle.Quantity.alloc(p))
    else:
      vector = self._vector(oracle.Quantity.unpaid(profile.k1, profile.k2))
    component = int(cell.quantity[-1]) - 1
    return oracle.Estimate(float(vector.value[component]), float(vector.stderr[component]))

def _closed(cell, models, profiles):
  if cell.quantity == 'joint_tail':
    model, program = models[cell.case]
    return joint_tail(model, program, *cell.at)
  return getattr(profiles[(cell.case, cell.at[0])], cell.quantity)

def check(tables=CHECKED_TABLES, procs=4, draws=CHECK_DRAWS, seed=CHECK_SEED):
  """
  check sets every printed cell against the closed form and a Monte Carlo
  estimate of the same quantity, signed weights standing in for the exact
  sampler where a fixture's density goes negative

  :param tables: table numbers, table 1 holds exact moments and is skipped
  :param procs: dask worker threads
  :param draws: Monte Carlo draws per fixture
  :param seed: integer seed, shared by the three fixtures
  :return: DataFrame with one row per cell and a verdict column
  """
  unknown = [t for t in tables if t not in TABLES]
  if unknown:
    raise DomainError(f"Unknown table {unknown[0]}, expected one of {', '.join(str(t) for t in TABLES)}")
  if 1 in tables:
    logger.info("Table 1 holds exact moments, nothing to sample")
  cells = published_cells([t for t in tables if t in CHECKED_TABLES])
  if not cells:
    return pd.DataFrame(columns=['table', 'case', 'quantity', 'at', 'published', 'closed_form', 'mc', 'stderr', 'verdict'])

  models = _models()
  levels = sorted({cell.at[0] for cell in cells if cell.quantity != 'joint_tail'})
  profiles = _profiles(models, CASES, levels, procs) if levels else {}

  rows = []
  for case in CASES:
    logger.info(f"Sampling {draws} draws of the {case} fixture")
    sampler = _CaseSampler(*models[case], draws, seed, procs)
    for cell in cells:
      if cell.case != case:
        continue
      closed = _closed(cell, models, profiles)
      mc = sampler.estimate(cell, profiles.get((case, cell.at[0])))
      verdict = judge(cell.value, closed, mc, cell.digits)
      if verdict == CLOSED_FORM_REFUTED:
        logger.error(f"Table {cell.table} {case} {cell.quantity} at {cell.describe()}: closed form {closed:.6g} outside Monte Carlo {mc.value:.6g} +- {mc.stderr:.2g}")
      elif verdict == PUBLISHED_REFUTED:
        logger.warning(f"Table {cell.table} {case} {cell.quantity} at {cell.describe()}: printed {cell.value:g}, closed form {closed:.6g}, Monte Carlo {mc.value:.6g} +- {mc.stderr:.2g}")
      rows.append((cell, {
        'table': str(cell.table),
        'case': case,
        'quantity': cell.quantity,
        'at': cell.describe(),
        'published': format_number(cell.value, cell.digits),
        'closed_form': format_number(closed, cell.digits + 2),
        'mc': format_number(mc.value, cell.digits + 2),
        'stderr': format_number(mc.stderr, cell.digits + 3),
        'verdict': verdict,
      }))

  order = {cell: position for position, cell in enumerate(cells)}
  rows.sort(key=lambda item: order[item[0]])
  return pd.DataFrame([row for _, row in rows])
