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
Erlang and mixed Erlang arithmetic: evaluation, moments, rescaling to a
common scale, convolution, kernel tilting and quantile inversion.

Every MixedErlang has a single rate ``scale`` (beta) and a finite weight
vector; ``weights[0]`` is the weight of the Erlang(1, beta) component.
"""

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize, special, stats

from . import monitor
from .errors import (DomainError, ScaleMismatchError, TruncationError,
                     UnsupportedKernelError)

logger = monitor.getLogger()

# Weight vectors are cut at the first index whose remaining mass is below this
WEIGHT_TOLERANCE = 1e-12
MAX_COMPONENTS = 10000
QUANTILE_TOLERANCE = 1e-10
NORMALIZATION_TOLERANCE = 1e-12

class Which(enum.Enum):
  PDF = 'pdf'
  CDF = 'cdf'
  SF = 'sf'

class KernelFamily(enum.Enum):
  FGM = 'fgm'
  POWER = 'power'
  LAPLACE = 'laplace'

@dataclass(frozen=True)
class ErlangParams:
  shape: int
  scale: float

  def __post_init__(self):
    if int(self.shape) != self.shape or self.shape < 1:
      raise DomainError(f"Erlang shape must be a positive integer, got {self.shape}")
    if not self.scale > 0:
      raise DomainError(f"Erlang scale must be positive, got {self.scale}")

@dataclass(frozen=True)
class KernelSpec:
  """
  KernelSpec names the Sarmanov kernel family g shared by every risk.

  FGM uses g(x) = 2 F̄(x) and ignores t, POWER uses g(x) = x^t for a positive
  integer t, LAPLACE uses g(x) = exp(-t x) for t > 0.
  """
  family: KernelFamily
  t: Optional[float] = None

  def __post_init__(self):
    if not isinstance(self.family, KernelFamily):
      object.__setattr__(self, 'family', KernelFamily(str(self.family).lower()))
    if self.family == KernelFamily.POWER:
      if self.t is None or not self.t > 0:
        raise DomainError(f"Power kernel needs t > 0, got {self.t}")
      if float(self.t) != int(self.t):
        raise UnsupportedKernelError(f"Power kernel supports integer t only, got {self.t}")
      object.__setattr__(self, 't', int(self.t))
    elif self.family == KernelFamily.LAPLACE:
      if self.t is None or not self.t > 0:
        raise DomainError(f"Laplace kernel needs t > 0, got {self.t}")
      object.__setattr__(self, 't', float(self.t))

  def tilted_scale(self, beta):
    """
    tilted_scale is Z(beta), the scale of a kernel-tilted Erlang mixture

    :param beta: scale of the untilted distribution
    """
    if self.family == KernelFamily.FGM:
      return 2.0 * beta
    if self.family == KernelFamily.POWER:
      return beta
    return beta + self.t

  def describe(self):
    if self.family == KernelFamily.FGM:
      return 'fgm'
    return f"{self.family.value}(t={self.t:g})"

@dataclass(frozen=True, eq=False)
class MixedErlang:
  scale: float
  weights: np.ndarray
  tail_mass: float = 0.0

  def __post_init__(self):
    weights = np.array(self.weights, dtype=float).ravel()
    if not self.scale > 0:
      raise DomainError(f"Mixed Erlang scale must be positive, got {self.scale}")
    if weights.size == 0:
      raise DomainError("Mixed Erlang needs at least one weight")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
      raise DomainError("Mixed Erlang weights must be finite and non-negative")
    if self.tail_mass < 0 or self.tail_mass > WEIGHT_TOLERANCE:
      raise DomainError(f"Tail mass {self.tail_mass} outside [0, {WEIGHT_TOLERANCE}]")
    total = math.fsum(weights)
    if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
      raise DomainError(f"Mixed Erlang weights sum to {total!r}, not 1")
    weights.flags.writeable = False
    object.__setattr__(self, 'scale', float(self.scale))
    object.__setattr__(self, 'weights', weights)

  @classmethod
  def of(cls, scale, weights):
    """
    of builds a MixedErlang from user supplied weights, dropping trailing
    zero weights and renormalizing away representation noise

    :param scale: rate beta
    :param weights: (q_1, q_2, ...)
    """
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or weights.size == 0:
      raise DomainError("Weights must be a non-empty vector")
    if np.any(weights < 0):
      raise DomainError("Mixed Erlang weights must be non-negative")
    total = math.fsum(weights)
    if abs(total - 1.0) > 1e-9:
      raise DomainError(f"Mixed Erlang weights sum to {total!r}, not 1")
    return _finalize(scale, weights)

  @classmethod
  def erlang(cls, shape, scale):
    ErlangParams(shape, scale)
    weights = np.zeros(int(shape))
    weights[-1] = 1.0
    return cls(scale, weights)

  @property
  def shapes(self):
    return np.arange(1, self.weights.size + 1)

  @property
  def size(self):
    return self.weights.size

  def __repr__(self):
    head = ', '.join(f"{w:.6g}" for w in self.weights[:4])
    more = ', ...' if self.size > 4 else ''
    return f"MixedErlang(scale={self.scale:g}, weights=({head}{more}), M={self.size})"

@dataclass(frozen=True)
class TiltResult:
  tilted: MixedErlang
  gamma: float

@dataclass(frozen=True)
class MomentSummary:
  mean: float
  variance: float
  skewness: float
  kurtosis: float

def _finalize(scale, weights, missing=0.0, tolerance=WEIGHT_TOLERANCE):
  """
  _finalize truncates a weight vector at the first index whose remaining
  mass drops below tolerance and renormalizes what is kept.

  :param scale: rate of the result
  :param weights: raw non-negative weights, index 0 is shape 1
  :param missing: mass known to sit beyond the end of weights
  :return: MixedErlang
  """
  weights = np.clip(np.asarray(weights, dtype=float), 0.0, None)
  missing = max(float(missing), 0.0)
  # remaining[m] is the mass at indices >= m
  remaining = np.append(np.cumsum(weights[::-1])[::-1], 0.0) + missing
  cut = int(np.argmax(remaining < tolerance)) if np.any(remaining < tolerance) else weights.size
  if remaining[cut] >= tolerance:
    raise TruncationError(f"Weight vector still holds {remaining[cut]:.3e} beyond index {weights.size}")
  if cut > MAX_COMPONENTS:
    raise TruncationError(f"Weight vector needs {cut} components, cap is {MAX_COMPONENTS}")
  cut = max(cut, 1)
  kept = weights[:cut]
  total = math.fsum(kept)
  if total <= 0:
    raise DomainError("Weight vector has no mass")
  tail = min(float(remaining[cut]), tolerance)
  return MixedErlang(scale, kept / total, tail_mass=tail)

def _check_points(x):
  x = np.asarray(x, dtype=float)
  if np.any(np.isnan(x)) or np.any(x < 0):
    raise DomainError(f"Evaluation point must be non-negative, got {x}")
  return x

def erlang_components(shapes, scale, x, which):
  """
  erlang_components evaluates w_k, W_k or W̄_k for every shape in shapes

  :param shapes: integer array of Erlang shapes
  :param scale: rate beta
  :param x: evaluation points (array)
  :param which: Which.PDF, Which.CDF or Which.SF
  :return: array of shape shapes.shape + x.shape
  """
  k = np.asarray(shapes, dtype=float).reshape((-1,) + (1,) * np.ndim(x))
  bx = scale * np.asarray(x, dtype=float)
  if which == Which.PDF:
    return np.exp(k * math.log(scale) + special.xlogy(k - 1, x) - bx - special.gammaln(k))
  if which == Which.CDF:
    return special.gammainc(k, bx)
  return special.gammaincc(k, bx)

def erlang_eval(params, x, which):
  """
  erlang_eval evaluates the pdf, df or survival function of Erlang(k, beta)

  :param params: ErlangParams
  :param x: non-negative point
  :param which: Which member
  """
  x = _check_points(x)
  if not params.scale > 0:
    raise DomainError(f"Erlang scale must be positive, got {params.scale}")
  values = erlang_components(np.array([params.shape]), params.scale, x, which)[0]
  return float(values) if values.ndim == 0 else values

def me_eval(dist, x, which):
  """
  me_eval evaluates a mixed Erlang pdf, df or survival function

  :param dist: MixedErlang
  :param x: non-negative point or array of points
  :param which: Which member
  """
  x = _check_points(x)
  components = erlang_components(dist.shapes, dist.scale, x, which)
  values = np.tensordot(dist.weights, components, axes=1)
  return float(values) if values.ndim == 0 else values

def me_moment(dist, order):
  """
  me_moment returns the raw moment E[X^order]

  :param dist: MixedErlang
  :param order: positive integer
  """
  if int(order) != order or order < 1:
    raise DomainError(f"Moment order must be a positive integer, got {order}")
  k = dist.shapes.astype(float)
  ratios = np.exp(special.gammaln(k + order) - special.gammaln(k))
  return float(np.dot(dist.weights, ratios) / dist.scale ** order)

def me_summary(dist):
  """
  me_summary returns mean, variance, skewness and kurtosis

  :param dist: MixedErlang
  :return: MomentSummary
  """
  m1, m2, m3, m4 = (me_moment(dist, n) for n in (1, 2, 3, 4))
  variance = m2 - m1 ** 2
  third = m3 - 3 * m1 * m2 + 2 * m1 ** 3
  fourth = m4 - 4 * m1 * m3 + 6 * m1 ** 2 * m2 - 3 * m1 ** 4
  return MomentSummary(
    mean=m1,
    variance=variance,
    skewness=third / variance ** 1.5,
    kurtosis=fourth / variance ** 2
  )

def me_rescale(dist, new_scale):
  """
  me_rescale rewrites dist as a mixed Erlang with a larger rate. An
  Erlang(i, beta) is a negative binomial number of Erlang(1, new_scale)
  phases, so psi_k = sum_i q_i C(k-1, i-1) p^i (1-p)^(k-i), p = beta/new_scale.

  :param dist: MixedErlang
  :param new_scale: target rate, not below dist.scale
  :return: MixedErlang at new_scale
  """
  if new_scale < dist.scale * (1 - 1e-15):
    raise DomainError(f"Cannot rescale from {dist.scale} down to {new_scale}")
  if new_scale <= dist.scale:
    return dist
  p = dist.scale / new_scale
  shapes = dist.shapes
  extra = stats.nbinom.isf(WEIGHT_TOLERANCE * 1e-2, shapes, p)
  length = int(np.max(shapes + extra)) + 1
  if length > MAX_COMPONENTS:
    raise TruncationError(f"Rescaling {dist.scale} to {new_scale} needs {length} components, cap is {MAX_COMPONENTS}")
  ks = np.arange(1, length + 1)
  # negative binomial pmf of the number of extra phases, zero for k < i
  failures = ks[None, :] - shapes[:, None]
  kernel = np.where(failures >= 0, stats.nbinom.pmf(np.maximum(failures, 0), shapes[:, None], p), 0.0)
  psi = dist.weights @ kernel
  result = _finalize(new_scale, psi, missing=1.0 - math.fsum(psi))
  logger.debug(f"Rescaled {dist!r} to scale {new_scale:g} with {result.size} components")
  return result

def me_convolve(dists):
  """
  me_convolve returns the distribution of the sum of independent mixed
  Erlangs sharing one scale. Erlang(i) + Erlang(j) = Erlang(i + j), so the
  weight vectors convolve with a shift of one.

  :param dists: non-empty list of MixedErlang with equal scale
  """
  dists = list(dists)
  if not dists:
    raise DomainError("Nothing to convolve")
  scale = dists[0].scale
  for dist in dists[1:]:
    if not math.isclose(dist.scale, scale, rel_tol=1e-12):
      raise ScaleMismatchError(f"Cannot convolve scales {scale} and {dist.scale}, rescale first")
  result = dists[0]
  for dist in dists[1:]:
    weights = np.concatenate(([0.0], np.convolve(result.weights, dist.weights)))
    result = _finalize(scale, weights)
  return result

def _fgm_theta(weights):
  # theta_s = sum_j binom(j-1; s-1, 1/2) q_j P(N >= s-j+1), N ~ weights
  size = weights.size
  survival = np.cumsum(weights[::-1])[::-1]
  theta = np.zeros(2 * size - 1)
  i = np.arange(size)
  for j in range(1, size + 1):
    if weights[j - 1] == 0:
      continue
    theta[j - 1 + i] += weights[j - 1] * survival * stats.binom.pmf(j - 1, i + j - 1, 0.5)
  return theta

def me_kernel_transform(dist, kernel):
  """
  me_kernel_transform returns the tilted density g(x) f(x) / E[g(X)] as a
  mixed Erlang, together with gamma = E[g(X)].

  :param dist: MixedErlang
  :param kernel: KernelSpec
  :return: TiltResult
  """
  q = dist.weights
  k = dist.shapes.astype(float)
  if kernel.family == KernelFamily.FGM:
    theta = _fgm_theta(q)
    gamma = 1.0
  elif kernel.family == KernelFamily.POWER:
    t = int(kernel.t)
    ratios = np.exp(special.gammaln(k + t) - special.gammaln(k))
    raw = q * ratios
    gamma = float(raw.sum() / dist.scale ** t)
    theta = np.concatenate((np.zeros(t), raw / raw.sum()))
  else:
    shrink = dist.scale / (dist.scale + kernel.t)
    raw = q * np.exp(k * math.log(shrink))
    gamma = float(raw.sum())
    theta = raw / gamma
  tilted = _finalize(kernel.tilted_scale(dist.scale), theta)
  return TiltResult(tilted=tilted, gamma=gamma)

def invert_cdf(cdf: Callable[[float], float], p, start, lower=0.0, tolerance=QUANTILE_TOLERANCE):
  """
  invert_cdf finds x with cdf(x) = p for a continuous nondecreasing cdf.
  The upper bracket doubles from start until it covers p, then the bracket
  is closed with brentq.

  :param cdf: callable
  :param p: target probability
  :param start: positive first guess for the upper bracket, usually the mean
  :param lower: point with cdf(lower) <= p
  :param tolerance: accuracy on x relative to the cdf slope
  """
  upper = max(float(start), lower + 1e-8)
  for _ in range(2000):
    if cdf(upper) >= p:
      break
    lower, upper = upper, 2.0 * upper
  else:
    raise DomainError(f"Could not bracket quantile {p}")
  if cdf(lower) >= p:
    return lower
  return optimize.brentq(lambda x: cdf(x) - p, lower, upper, xtol=tolerance * 1e-2, maxiter=500)

def me_quantile(dist, p):
  """
  me_quantile solves F(x) = p

  :param dist: MixedErlang
  :param p: probability in (0, 1)
  """
  if not 0 < p < 1:
    raise DomainError(f"Quantile level must be in (0, 1), got {p}")
  return invert_cdf(lambda x: me_eval(dist, x, Which.CDF), p, start=me_moment(dist, 1))

def me_stop_loss_premium(dist, d):
  """
  me_stop_loss_premium returns E[(X - d)+]

  :param dist: MixedErlang
  :param d: non-negative retention
  """
  if d < 0:
    raise DomainError(f"Retention must be non-negative, got {d}")
  k = dist.shapes
  upper = erlang_components(k + 1, dist.scale, d, Which.SF)
  same = erlang_components(k, dist.scale, d, Which.SF)
  return float(np.dot(dist.weights, k / dist.scale * upper - d * same))

def me_tvar(dist, p):
  """
  me_tvar returns TVaR_p of a single mixed Erlang risk

  :param dist: MixedErlang
  :param p: probability in (0, 1)
  """
  x_p = me_quantile(dist, p)
  k = dist.shapes
  tail = erlang_components(k + 1, dist.scale, x_p, Which.SF)
  return float(np.dot(dist.weights, k / dist.scale * tail) / (1 - p))

def common_scale(dists: Sequence[MixedErlang], target):
  """
  common_scale rescales every distribution to target

  :param dists: MixedErlang list
  :param target: rate not below any of their scales
  """
  return [me_rescale(dist, target) for dist in dists]
