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
Stop-loss transforms of mixed Erlang risks.

For X ~ ME(beta, Q) and a deductible d > 0 the excess density is
f_X(y + d) = sum_k Delta_k w_{k+1}(y, beta), so Y = (X - d)+ has an atom
F_X(d) at zero and a mixed Erlang continuous part of mass F̄_X(d).
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import monitor
from .erlang_core import Which, erlang_components, me_eval
from .errors import DomainError, ScaleMismatchError

logger = monitor.getLogger()

# trailing Delta entries whose total stays below this are dropped
DELTA_TOLERANCE = 1e-16

class PairPart(enum.Enum):
  FIRST = 'first'
  SECOND = 'second'
  SUM = 'sum'

@dataclass(frozen=True, eq=False)
class DeltaCoeffs:
  deductible: float
  base_scale: float
  coeffs: np.ndarray

  @property
  def mass(self):
    """F̄_X(d), the mass of the continuous part"""
    return math.fsum(self.coeffs)

def _check_deductible(d):
  if not d > 0:
    raise DomainError(f"Deductible must be positive, got {d}")

def _check_same_scale(first, second):
  if not math.isclose(first.scale, second.scale, rel_tol=1e-12):
    raise ScaleMismatchError(f"Stop-loss pair needs a common scale, got {first.scale} and {second.scale}")

def delta_coeffs(dist, d):
  """
  delta_coeffs returns Delta_k(d) = sum_j q_{j+k+1} e^{-beta d} (beta d)^j / j!

  :param dist: MixedErlang
  :param d: positive deductible
  :return: DeltaCoeffs
  """
  _check_deductible(d)
  q = dist.weights
  size = q.size
  poisson = stats.poisson.pmf(np.arange(size), dist.scale * d)
  # correlation of q with the Poisson weights, written as a reversed convolution
  coeffs = np.convolve(q[::-1], poisson)[:size][::-1]
  coeffs = np.clip(coeffs, 0.0, None)
  remaining = np.cumsum(coeffs[::-1])[::-1]
  keep = int(np.count_nonzero(remaining >= DELTA_TOLERANCE))
  coeffs = coeffs[:max(keep, 1)]
  return DeltaCoeffs(deductible=float(d), base_scale=dist.scale, coeffs=coeffs)

class StopLossRisk:
  """
  StopLossRisk is (X - d)+ for one mixed Erlang risk with its Delta
  coefficients computed once.
  """

  def __init__(self, dist, d):
    self.dist = dist
    self.deductible = float(d)
    self.delta = delta_coeffs(dist, d)
    self.atom = me_eval(dist, d, Which.CDF)
    self._orders = np.arange(1, self.delta.coeffs.size + 1)

  @property
  def scale(self):
    return self.dist.scale

  def increment(self, y):
    """P(d < X <= d + y)"""
    if y <= 0:
      return 0.0
    return float(np.dot(self.delta.coeffs, erlang_components(self._orders, self.scale, y, Which.CDF)))

  def df(self, y):
    """F_Y(y) = F_X(d) + P(d < X <= d + y)"""
    if y < 0:
      raise DomainError(f"Stop-loss df needs y >= 0, got {y}")
    return self.atom + self.increment(y)

  def partial_expectation(self, c):
    """E[Y 1{Y > c}] = (1/beta) sum_k (k+1) Delta_k W̄_{k+2}(c)"""
    if c < 0:
      raise DomainError(f"Partial expectation threshold must be >= 0, got {c}")
    tail = erlang_components(self._orders + 1, self.scale, c, Which.SF)
    return float(np.dot(self._orders * self.delta.coeffs, tail) / self.scale)

class StopLossPair:
  """
  StopLossPair covers two independent stop-loss risks on a common scale.
  On {Y1 > 0, Y2 > 0} the sum is a mixed Erlang with weights
  sum_{k+j=n} Delta_k Delta_j on shape n + 2; conditionally on the shapes
  Y1 / (Y1 + Y2) is beta distributed, which gives the (k+1), (j+1) and
  (k+j+2) factors of the partial expectations.
  """

  def __init__(self, first, second):
    _check_same_scale(first, second)
    self.first = first
    self.second = second
    left = first.delta.coeffs
    right = second.delta.coeffs
    self.joint = np.convolve(left, right)
    self.first_weighted = np.convolve(np.arange(1, left.size + 1) * left, right)
    self.second_weighted = np.convolve(left, np.arange(1, right.size + 1) * right)
    self._orders = np.arange(self.joint.size)

  @property
  def scale(self):
    return self.first.scale

  def continuous_df(self, s):
    """P(Y1 + Y2 <= s, Y1 > 0, Y2 > 0)"""
    if s <= 0:
      return 0.0
    return float(np.dot(self.joint, erlang_components(self._orders + 2, self.scale, s, Which.CDF)))

  def partial_expectation(self, c, which):
    if c < 0:
      raise DomainError(f"Partial expectation threshold must be >= 0, got {c}")
    which = PairPart(which)
    if which == PairPart.FIRST:
      coeffs = self.first_weighted
    elif which == PairPart.SECOND:
      coeffs = self.second_weighted
    else:
      coeffs = self.first_weighted + self.second_weighted
    tail = erlang_components(self._orders + 3, self.scale, c, Which.SF)
    return float(np.dot(coeffs, tail) / self.scale)

def stoploss_df(dist, d, y):
  """
  stoploss_df returns the df of (X - d)+ at y

  :param dist: MixedErlang
  :param d: positive deductible
  :param y: non-negative point
  """
  return StopLossRisk(dist, d).df(y)

def stoploss_sum_continuous_df(first, second, d1, d2, s):
  """
  stoploss_sum_continuous_df returns P(Y1 + Y2 <= s, Y1 > 0, Y2 > 0) for
  independent Y_i = (X_i - d_i)+

  :param first: MixedErlang X1
  :param second: MixedErlang X2 with the scale of X1
  :param d1: deductible of X1
  :param d2: deductible of X2
  :param s: positive point
  """
  _check_same_scale(first, second)
  if s < 0:
    raise DomainError(f"Stop-loss sum df needs s >= 0, got {s}")
  return StopLossPair(StopLossRisk(first, d1), StopLossRisk(second, d2)).continuous_df(s)

def partial_expectation_single(dist, d, c):
  """
  partial_expectation_single returns E[(X - d)+ 1{(X - d)+ > c}]

  :param dist: MixedErlang
  :param d: positive deductible
  :param c: non-negative threshold
  """
  return StopLossRisk(dist, d).partial_expectation(c)

def partial_expectation_pair(first, second, d1, d2, c, which):
  """
  partial_expectation_pair returns E[Z 1{Y1 + Y2 > c, Y1 > 0, Y2 > 0}] where
  Z is Y1 (FIRST), Y2 (SECOND) or Y1 + Y2 (SUM)

  :param first: MixedErlang X1
  :param second: MixedErlang X2 with the scale of X1
  :param d1: deductible of X1
  :param d2: deductible of X2
  :param c: non-negative threshold
  :param which: PairPart
  """
  _check_same_scale(first, second)
  return StopLossPair(StopLossRisk(first, d1), StopLossRisk(second, d2)).partial_expectation(c, which)
