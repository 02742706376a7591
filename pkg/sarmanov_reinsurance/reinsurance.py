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
Aggregation of two dependent stop-loss portfolios.

Expanding the Sarmanov bracket turns the joint law of (S1, S2) into a signed
mixture sum_r c_r (L_r x R_r) of independent mixed Erlang pairs on one common
scale. Every quantity below is evaluated term by term on that mixture, with
the events {T_i = 0} and {T_i > 0} booked separately so the atom of
R2 = T1 + T2 at zero is counted exactly once.
"""

import functools
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import monitor
from .erlang_core import (MixedErlang, Which, invert_cdf, me_convolve,
                          me_eval, me_kernel_transform, me_moment, me_rescale,
                          me_stop_loss_premium)
from .errors import DomainError, NumericalQualityError, SarmanovError
from .sarmanov import marginalize, xi_coefficients
from .stop_loss import PairPart, StopLossPair, StopLossRisk

logger = monitor.getLogger()

# signed mixtures may leave [0, 1] by roundoff only
CLAMP_TOLERANCE = 1e-10
NORMALIZATION_TOLERANCE = 1e-10

@dataclass(frozen=True)
class ReinsuranceProgram:
  portfolio_1: Tuple[int, ...]
  portfolio_2: Tuple[int, ...]
  d1: float
  d2: float

  def __post_init__(self):
    first = tuple(int(i) for i in self.portfolio_1)
    second = tuple(int(i) for i in self.portfolio_2)
    if not first or not second:
      raise DomainError("Both portfolios need at least one risk")
    if len(set(first) | set(second)) != len(first) + len(second):
      raise DomainError(f"Portfolios {first} and {second} overlap or repeat a risk")
    if not self.d1 > 0 or not self.d2 > 0:
      raise DomainError(f"Deductibles must be positive, got {self.d1} and {self.d2}")
    object.__setattr__(self, 'portfolio_1', first)
    object.__setattr__(self, 'portfolio_2', second)
    object.__setattr__(self, 'd1', float(self.d1))
    object.__setattr__(self, 'd2', float(self.d2))

  def portfolio(self, which):
    if which == 1:
      return self.portfolio_1
    if which == 2:
      return self.portfolio_2
    raise DomainError(f"Portfolio must be 1 or 2, got {which}")

  def deductible(self, which):
    return self.d1 if which == 1 else self.d2

@dataclass(frozen=True, eq=False)
class BivariateTermList:
  terms: Tuple[Tuple[float, MixedErlang, MixedErlang], ...]
  common_scale: float

  def normalization(self):
    # both survivals equal 1 at zero
    return math.fsum(coeff for coeff, _, _ in self.terms)

  def joint_tail(self, u1, u2):
    return math.fsum(coeff * me_eval(left, u1, Which.SF) * me_eval(right, u2, Which.SF)
                     for coeff, left, right in self.terms)

@dataclass(frozen=True, eq=False)
class UnivariateTermList:
  terms: Tuple[Tuple[float, MixedErlang], ...]

  def normalization(self):
    return math.fsum(coeff for coeff, _ in self.terms)

  def cdf(self, x):
    if math.isinf(x):
      return 1.0
    return clamp_probability(math.fsum(coeff * me_eval(dist, x, Which.CDF) for coeff, dist in self.terms), 'portfolio df')

  def sf(self, x):
    return 1.0 - self.cdf(x)

  def mean(self):
    return math.fsum(coeff * me_moment(dist, 1) for coeff, dist in self.terms)

  def stop_loss_premium(self, d):
    """E[(S - d)+]"""
    return math.fsum(coeff * me_stop_loss_premium(dist, d) for coeff, dist in self.terms)

  def quantile(self, p):
    if not 0 < p < 1:
      raise DomainError(f"Quantile level must be in (0, 1), got {p}")
    return invert_cdf(self.cdf, p, start=max(self.mean(), 1e-8))

@dataclass(frozen=True)
class RiskProfile:
  p: float
  var: float
  tvar: float
  k1: float
  k2: float
  default_prob: float
  default_value: float
  unpaid_1: float
  unpaid_2: float
  tvar_t1: float
  tvar_t2: float
  diversification: float

def clamp_probability(value, what):
  """
  clamp_probability pulls a signed-mixture probability back into [0, 1] when
  it strays by roundoff and refuses anything larger

  :param value: computed probability
  :param what: label for the log record
  """
  if 0.0 <= value <= 1.0:
    return value
  excursion = -value if value < 0 else value - 1.0
  if excursion > CLAMP_TOLERANCE:
    raise NumericalQualityError(f"{what} evaluated to {value!r}, outside [0, 1] by {excursion:.3e}")
  if excursion > 1e-14:
    logger.warning(f"Clamping {what} {value!r} into [0, 1]")
  return min(max(value, 0.0), 1.0)

def check_program(model, program):
  """
  check_program verifies the two portfolios partition the model's risks

  :param model: SarmanovModel
  :param program: ReinsuranceProgram
  """
  covered = sorted(program.portfolio_1 + program.portfolio_2)
  if covered != list(range(model.n)):
    raise DomainError(f"Portfolios {program.portfolio_1} and {program.portfolio_2} do not partition risks 0..{model.n - 1}")

def common_target(model):
  """Z(beta_max), the scale every tilted or untilted component is moved to"""
  beta_max = max(dist.scale for dist in model.marginals)
  return model.kernel.tilted_scale(beta_max)

class _ComponentCache:
  """
  Rescaled marginals, tilted marginals and portfolio convolutions shared by
  the terms of one expansion.
  """

  def __init__(self, model, target):
    self.model = model
    self.target = target
    self._components = {}
    self._sums = {}

  def component(self, i, tilted):
    key = (i, tilted)
    if key not in self._components:
      dist = self.model.marginals[i]
      if tilted:
        dist = me_kernel_transform(dist, self.model.kernel).tilted
      if dist.scale > self.target * (1 + 1e-12):
        raise SarmanovError(f"Component {i} has scale {dist.scale} above the common scale {self.target}")
      self._components[key] = me_rescale(dist, self.target)
    return self._components[key]

  def portfolio_sum(self, indices, tilted):
    key = (tuple(indices), frozenset(i for i in indices if i in tilted))
    if key not in self._sums:
      self._sums[key] = me_convolve([self.component(i, i in tilted) for i in indices])
    return self._sums[key]

def _subsets_in_order(xi):
  return sorted(xi.values, key=lambda subset: (len(subset), subset))

def build_term_list(model, program):
  """
  build_term_list expands the model into the signed bivariate mixture. The
  J term has weight xi_J prod_{m in J} gamma_m; risks in J are kernel tilted,
  every component is moved to Z(beta_max) and summed within its portfolio.

  :param model: SarmanovModel
  :param program: ReinsuranceProgram
  :return: BivariateTermList
  """
  check_program(model, program)
  xi = xi_coefficients(model)
  target = common_target(model)
  cache = _ComponentCache(model, target)
  terms = []
  for subset in _subsets_in_order(xi):
    coeff = xi.coefficient(subset)
    if subset and coeff == 0.0:
      continue
    tilted = set(subset)
    left = cache.portfolio_sum(program.portfolio_1, tilted)
    right = cache.portfolio_sum(program.portfolio_2, tilted)
    terms.append((coeff, left, right))
  term_list = BivariateTermList(terms=tuple(terms), common_scale=target)
  total = term_list.normalization()
  if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
    raise NumericalQualityError(f"Term list coefficients sum to {total!r}, not 1")
  logger.debug(f"Built {len(terms)} terms on common scale {target:g}")
  return term_list

def portfolio_term_list(model, indices):
  """
  portfolio_term_list returns the signed mixture of the sum of the risks in
  indices under the marginalized sub-model

  :param model: SarmanovModel
  :param indices: 0-based risk indices
  """
  sub = marginalize(model, indices)
  xi = xi_coefficients(sub)
  cache = _ComponentCache(sub, common_target(sub))
  everything = range(sub.n)
  terms = []
  for subset in _subsets_in_order(xi):
    coeff = xi.coefficient(subset)
    if subset and coeff == 0.0:
      continue
    terms.append((coeff, cache.portfolio_sum(everything, set(subset))))
  term_list = UnivariateTermList(terms=tuple(terms))
  total = term_list.normalization()
  if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
    raise NumericalQualityError(f"Portfolio term list coefficients sum to {total!r}, not 1")
  return term_list

class _Term:
  def __init__(self, coeff, left, right, d1, d2):
    self.coeff = coeff
    self.left = StopLossRisk(left, d1)
    self.right = StopLossRisk(right, d2)
    self.pair = StopLossPair(self.left, self.right)

class AggregateRisk:
  """
  AggregateRisk evaluates the df and the partial expectations of
  R2 = (S1 - d1)+ + (S2 - d2)+ from one term list built up front.
  """

  def __init__(self, model, program):
    self.model = model
    self.program = program
    self.term_list = build_term_list(model, program)
    self.terms = [_Term(coeff, left, right, program.d1, program.d2) for coeff, left, right in self.term_list.terms]
    self.atom = clamp_probability(math.fsum(t.coeff * t.left.atom * t.right.atom for t in self.terms), 'atom of R2')

  def joint_tail(self, u1, u2):
    if u1 < 0 or u2 < 0:
      raise DomainError(f"Joint tail thresholds must be >= 0, got ({u1}, {u2})")
    return clamp_probability(self.term_list.joint_tail(u1, u2), 'joint tail')

  def df(self, s):
    if s < 0:
      raise DomainError(f"Aggregate df needs s >= 0, got {s}")
    if s == 0:
      return self.atom
    if math.isinf(s):
      return 1.0
    # P(both at zero) + P(only S2 pays) + P(only S1 pays) + P(both pay)
    value = math.fsum(
      t.coeff * (t.left.atom * t.right.atom
                 + t.left.atom * t.right.increment(s)
                 + t.right.atom * t.left.increment(s)
                 + t.pair.continuous_df(s))
      for t in self.terms
    )
    return clamp_probability(value, 'aggregate df')

  def sf(self, s):
    return 1.0 - self.df(s)

  def tail_expectation(self, c):
    """E[R2 1{R2 > c}]"""
    return math.fsum(
      t.coeff * (t.right.atom * t.left.partial_expectation(c)
                 + t.left.atom * t.right.partial_expectation(c)
                 + t.pair.partial_expectation(c, PairPart.SUM))
      for t in self.terms
    )

  def portfolio_tail_expectation(self, c, which):
    """E[T_which 1{R2 > c}]"""
    if which == 1:
      return math.fsum(t.coeff * (t.right.atom * t.left.partial_expectation(c)
                                  + t.pair.partial_expectation(c, PairPart.FIRST)) for t in self.terms)
    if which == 2:
      return math.fsum(t.coeff * (t.left.atom * t.right.partial_expectation(c)
                                  + t.pair.partial_expectation(c, PairPart.SECOND)) for t in self.terms)
    raise DomainError(f"Portfolio must be 1 or 2, got {which}")

  def mean(self):
    return self.tail_expectation(0.0)

  def mean_excess(self, c):
    """E[R2 - c | R2 > c]"""
    tail = self.sf(c)
    if tail <= 0:
      raise DomainError(f"R2 exceeds {c} with probability zero")
    return (self.tail_expectation(c) - c * tail) / tail

  def var(self, p):
    _check_level(p)
    if p <= self.atom:
      logger.info(f"Level {p} falls inside the atom {self.atom:.6g} of R2, VaR is 0")
      return 0.0
    return invert_cdf(self.df, p, start=max(self.mean(), 1e-8))

  def var_tvar(self, p):
    var = self.var(p)
    excess = self.tail_expectation(var) - var * self.sf(var)
    return var, var + excess / (1 - p)

  def allocate(self, p):
    var = self.var(p)
    return tuple(self.portfolio_tail_expectation(var, which) / (1 - p) for which in (1, 2))

  def default_value(self, capital):
    _check_capital(capital)
    return self.tail_expectation(capital) - capital * self.sf(capital)

  def default_prob(self, capital):
    _check_capital(capital)
    return 1.0 - self.df(capital)

  def unpaid_losses(self, k1, k2):
    capital = k1 + k2
    _check_capital(capital)
    tail = self.sf(capital)
    return (self.portfolio_tail_expectation(capital, 1) - k1 * tail,
            self.portfolio_tail_expectation(capital, 2) - k2 * tail)

def _check_level(p):
  if not 0 < p < 1:
    raise DomainError(f"Confidence level must be in (0, 1), got {p}")

def _check_capital(capital):
  if not capital > 0:
    raise DomainError(f"Capital must be positive, got {capital}")

@functools.lru_cache(maxsize=32)
def aggregate_risk(model, program):
  """
  aggregate_risk returns the cached AggregateRisk of a model and program.
  Models hash by identity and are immutable, so the cache never goes stale.
  """
  return AggregateRisk(model, program)

@functools.lru_cache(maxsize=64)
def _portfolio_cached(model, indices):
  return portfolio_term_list(model, indices)

def joint_tail(model, program, u1, u2):
  """
  joint_tail returns P(S1 > u1, S2 > u2)

  :param model: SarmanovModel
  :param program: ReinsuranceProgram
  :param u1: threshold of portfolio 1
  :param u2: threshold of portfolio 2
  """
  return aggregate_risk(model, program).joint_tail(u1, u2)

def portfolio_df(model, program, which):
  """
  portfolio_df returns the signed mixture of S_which under the sub-model
  restricted to that portfolio

  :param model: SarmanovModel
  :param program: ReinsuranceProgram
  :param which: 1 or 2
  :return: UnivariateTermList
  """
  check_program(model, program)
  return _portfolio_cached(model, program.portfolio(which))

def aggregate_df(model, program, s):
  """
  aggregate_df returns F_R2(s)

  :param model: SarmanovModel
  :param program: ReinsuranceProgram
  :param s: non-negative point
  """
  return aggregate_risk(model, program).df(s)

def mean_excess(model, program, c):
  return aggregate_risk(model, program).mean_excess(c)

def var_tvar(model, program, p):
  """
  var_tvar returns (VaR_p, TVaR_p) of R2

  :param model: SarmanovModel
  :param program: ReinsuranceProgram
  :param p: confidence level in (0, 1)
  """
  return aggregate_risk(model, program).var_tvar(p)

def tvar_allocate(model, program, p):
  """
  tvar_allocate returns the TVaR allocations (K1, K2), E[T_i 1{R2 > VaR_p}] / (1 - p)

  :param model: SarmanovModel
  :param program: ReinsuranceProgram
  :param p: confidence level in (0, 1)
  """
  return aggregate_risk(model, program).allocate(p)

def default_value(model, program, capital):
  """
  default_value returns U(K) = E[(R2 - K)+]

  :param model: SarmanovModel
  :param program: ReinsuranceProgram
  :param capital: K > 0
  """
  return aggregate_risk(model, program).default_value(capital)

def default_prob(model, program, capital):
  """
  default_prob returns phi(K) = P(R2 > K)

  :param model: SarmanovModel
  :param program: ReinsuranceProgram
  :param capital: K > 0
  """
  return aggregate_risk(model, program).default_prob(capital)

def unpaid_losses(model, program, k1, k2):
  """
  unpaid_losses returns U(K_i, K) = E[(T_i - K_i) 1{R2 > K}] for K = K1 + K2

  :param model: SarmanovModel
  :param program: ReinsuranceProgram
  :param k1: capital of portfolio 1
  :param k2: capital of portfolio 2
  """
  return aggregate_risk(model, program).unpaid_losses(k1, k2)

def portfolio_var_tvar(model, program, which, p):
  """
  portfolio_var_tvar returns standalone (VaR_p, TVaR_p) of T_which = (S_which - d)+

  :param model: SarmanovModel
  :param program: ReinsuranceProgram
  :param which: 1 or 2
  :param p: confidence level in (0, 1)
  """
  _check_level(p)
  term_list = portfolio_df(model, program, which)
  d = program.deductible(which)
  if p <= term_list.cdf(d):
    var = 0.0
  else:
    var = term_list.quantile(p) - d
  return var, var + term_list.stop_loss_premium(d + var) / (1 - p)

def diversification(model, program, p):
  """
  diversification returns D_p = 1 - TVaR_R2 / (TVaR_T1 + TVaR_T2)

  :param model: SarmanovModel
  :param program: ReinsuranceProgram
  :param p: confidence level in (0, 1)
  """
  _, total = var_tvar(model, program, p)
  standalone = sum(portfolio_var_tvar(model, program, which, p)[1] for which in (1, 2))
  return 1.0 - total / standalone

def risk_profile(model, program, p):
  """
  risk_profile evaluates one row of the capital tables at level p: the
  capital K is TVaR_p and the K_i are its allocations

  :param model: SarmanovModel
  :param program: ReinsuranceProgram
  :param p: confidence level in (0, 1)
  :return: RiskProfile
  """
  risk = aggregate_risk(model, program)
  var, tvar = risk.var_tvar(p)
  k1, k2 = risk.allocate(p)
  unpaid_1, unpaid_2 = risk.unpaid_losses(k1, k2)
  tvar_t1 = portfolio_var_tvar(model, program, 1, p)[1]
  tvar_t2 = portfolio_var_tvar(model, program, 2, p)[1]
  return RiskProfile(
    p=p,
    var=var,
    tvar=tvar,
    k1=k1,
    k2=k2,
    default_prob=risk.default_prob(tvar),
    default_value=risk.default_value(tvar),
    unpaid_1=unpaid_1,
    unpaid_2=unpaid_2,
    tvar_t1=tvar_t1,
    tvar_t2=tvar_t2,
    diversification=1.0 - tvar / (tvar_t1 + tvar_t2)
  )
