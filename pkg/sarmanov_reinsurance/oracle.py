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
Independent checks of the closed forms: an exact rejection sampler for the
Sarmanov density, plug-in Monte Carlo estimators with standard errors, and
low-dimensional quadrature.

A model whose bracket goes negative somewhere has no sampler. Every closed
form is linear in the density though, so for those models the oracle keeps
the independent proposals and carries the bracket along as a signed weight
per draw; every estimator below is a weighted mean.

Sampling is split into fixed-size chunks, each with its own child of one
numpy SeedSequence, and the chunks are fanned out with dask. The batch only
depends on the seed and the count, never on the number of workers.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import dask
import numpy as np
import pandas as pd
from scipy import integrate

from . import monitor
from .erlang_core import KernelFamily, Which, me_eval, me_kernel_transform, me_moment, me_quantile
from .errors import DomainError, InadmissibleModelError, SarmanovError, UnsupportedKernelError
from .sarmanov import (
  Admissibility, bracket, corner_maximum, joint_density, kernel_eval, phi_values, gamma_values, validate_model
)

logger = monitor.getLogger()

DEFAULT_SAMPLE_SIZE = 10_000_000
CHUNK_SIZE = 250_000
ENVELOPE_SLACK = 1e-12
QUADRATURE_MASS = 1e-10
AGREEMENT = 4.0

class QuantityKind(enum.Enum):
  JOINT_TAIL = 'joint-tail'
  AGG_DF = 'cdf'
  TVAR = 'tvar'
  ALLOC = 'allocate'
  DEFAULT = 'default'
  UNPAID = 'unpaid'

@dataclass(frozen=True)
class Quantity:
  kind: QuantityKind
  args: Tuple[float, ...] = ()

  @classmethod
  def joint_tail(cls, u1, u2):
    return cls(QuantityKind.JOINT_TAIL, (float(u1), float(u2)))

  @classmethod
  def agg_df(cls, s):
    return cls(QuantityKind.AGG_DF, (float(s),))

  @classmethod
  def tvar(cls, p):
    return cls(QuantityKind.TVAR, (float(p),))

  @classmethod
  def alloc(cls, p):
    return cls(QuantityKind.ALLOC, (float(p),))

  @classmethod
  def default(cls, capital):
    return cls(QuantityKind.DEFAULT, (float(capital),))

  @classmethod
  def unpaid(cls, k1, k2):
    return cls(QuantityKind.UNPAID, (float(k1), float(k2)))

@dataclass(frozen=True, eq=False)
class SampleBatch:
  """
  draws holds one row per vector. weights is None for exact draws, otherwise
  the signed bracket value of every row.
  """
  draws: np.ndarray
  seed: int
  acceptance_rate: float
  weights: Optional[np.ndarray] = None

  @property
  def count(self):
    return self.draws.shape[0]

  @property
  def signed(self):
    return self.weights is not None

  @property
  def negative_share(self):
    if self.weights is None or self.count == 0:
      return 0.0
    return float(np.mean(self.weights < 0))

  def weighting(self):
    return np.ones(self.count) if self.weights is None else self.weights

@dataclass(frozen=True)
class Estimate:
  value: object
  stderr: object

  def agrees_with(self, target, slack=0.0, sigmas=AGREEMENT):
    """True when target lies within sigmas standard errors, widened by slack"""
    return abs(self.value - target) <= sigmas * self.stderr + slack + 1e-12

@dataclass(frozen=True, eq=False)
class Losses:
  s1: np.ndarray
  s2: np.ndarray
  t1: np.ndarray
  t2: np.ndarray
  r: np.ndarray

  def treaty(self, which):
    if which == 0:
      return self.r
    return self.t1 if which == 1 else self.t2

@dataclass(frozen=True)
class QuadratureReport:
  normalization_error: float
  tilt_residuals: Dict[Tuple[int, int], float] = field(default_factory=dict)

  @property
  def max_tilt_residual(self):
    return max((abs(r) for r in self.tilt_residuals.values()), default=0.0)

def _draw_marginal(rng, dist, size):
  shapes = rng.choice(dist.shapes, size=size, p=dist.weights)
  return rng.gamma(shapes, 1.0 / dist.scale)

def _proposals(rng, model, size):
  return np.column_stack([_draw_marginal(rng, dist, size) for dist in model.marginals])

def _sample_chunk(model, gammas, envelope, size, seed_sequence):
  """
  _sample_chunk draws size exact Sarmanov vectors by acceptance-rejection
  against the independent proposal prod f_i with envelope max bracket.

  :return: (draws, proposed)
  """
  rng = np.random.default_rng(seed_sequence)
  accepted = []
  have = 0
  proposed = 0
  while have < size:
    # the acceptance probability is exactly 1 / envelope
    batch = max(int((size - have) * envelope * 1.1) + 16, 64)
    proposal = _proposals(rng, model, batch)
    ratio = bracket(model, phi_values(model, proposal, gammas)) / envelope
    if np.any(ratio > 1.0 + ENVELOPE_SLACK):
      raise SarmanovError(f"Rejection envelope {envelope} exceeded, ratio {float(ratio.max())!r}")
    keep = np.flatnonzero(rng.uniform(size=batch) <= ratio)
    if have + keep.size >= size:
      keep = keep[:size - have]
      proposed += int(keep[-1]) + 1
    else:
      proposed += batch
    accepted.append(proposal[keep])
    have += keep.size
  return np.concatenate(accepted), proposed

def _signed_chunk(model, gammas, size, seed_sequence):
  rng = np.random.default_rng(seed_sequence)
  proposal = _proposals(rng, model, size)
  return proposal, bracket(model, phi_values(model, proposal, gammas))

def _chunks(count, seed):
  children = np.random.SeedSequence(seed).spawn(math.ceil(count / CHUNK_SIZE))
  sizes = [min(CHUNK_SIZE, count - i * CHUNK_SIZE) for i in range(len(children))]
  return list(zip(sizes, children))

def _check_sampling(model, count):
  if count < 1:
    raise DomainError(f"Sample count must be positive, got {count}")
  if model.kernel.family == KernelFamily.POWER:
    raise UnsupportedKernelError("Power kernels are unbounded, rejection sampling has no envelope")

def sample(model, count, seed, procs=4):
  """
  sample draws count exact vectors from an admissible Sarmanov model

  :param model: SarmanovModel with an admissible bounded kernel
  :param count: number of draws
  :param seed: integer seed
  :param procs: dask worker threads
  :return: SampleBatch
  """
  _check_sampling(model, count)
  report = validate_model(model)
  if not report.ok:
    raise InadmissibleModelError(report)
  gammas = gamma_values(model)
  envelope = corner_maximum(model)

  lazy_results = []
  for size, child in _chunks(count, seed):
    lazy_result = dask.delayed(_sample_chunk)(model, gammas, envelope, size, child)
    lazy_results.append(lazy_result)

  results = dask.compute(*lazy_results, scheduler='threads', num_workers=int(procs))
  draws = np.concatenate([chunk for chunk, _ in results])
  proposed = sum(n for _, n in results)
  rate = count / proposed
  logger.info(f"Sampled {count} draws with seed {seed}, acceptance rate {rate:.4f}, envelope {envelope:.6g}")
  return SampleBatch(draws=draws, seed=int(seed), acceptance_rate=rate)

def sample_signed(model, count, seed, procs=4):
  """
  sample_signed draws count independent proposals prod f_i and weights each
  one by the bracket, so weighted means estimate expectations under h even
  when h goes negative

  :param model: SarmanovModel with a bounded kernel
  :param count: number of draws
  :param seed: integer seed
  :param procs: dask worker threads
  :return: SampleBatch with weights
  """
  _check_sampling(model, count)
  gammas = gamma_values(model)

  lazy_results = []
  for size, child in _chunks(count, seed):
    lazy_result = dask.delayed(_signed_chunk)(model, gammas, size, child)
    lazy_results.append(lazy_result)

  results = dask.compute(*lazy_results, scheduler='threads', num_workers=int(procs))
  batch = SampleBatch(
    draws=np.concatenate([chunk for chunk, _ in results]),
    seed=int(seed),
    acceptance_rate=1.0,
    weights=np.concatenate([weights for _, weights in results])
  )
  logger.info(f"Drew {count} signed-weight proposals with seed {seed}, negative share {batch.negative_share:.3e}")
  return batch

def draw(model, count, seed, procs=4):
  """
  draw samples exactly from an admissible model and falls back to signed
  weights for a model whose density goes negative

  :param model: SarmanovModel with a bounded kernel
  :param count: number of draws
  :param seed: integer seed
  :param procs: dask worker threads
  :return: SampleBatch
  """
  _check_sampling(model, count)
  report = validate_model(model)
  if report.status == Admissibility.OK:
    return sample(model, count, seed, procs=procs)
  logger.warning(f"No exact sampler, estimating with signed weights: {report.describe()}")
  return sample_signed(model, count, seed, procs=procs)

def dump_batch(batch, path):
  """
  dump_batch writes one CSV row per draw, with a weight column for signed
  batches

  :param batch: SampleBatch
  :param path: output file
  """
  columns = [f"x{i + 1}" for i in range(batch.draws.shape[1])]
  frame = pd.DataFrame(batch.draws, columns=columns)
  if batch.signed:
    frame['weight'] = batch.weights
  frame.to_csv(path, index=False, float_format='%.12g')
  logger.info(f"Wrote {batch.count} draws to {path}")

def losses(batch, program):
  """
  losses returns the portfolio sums and stop-loss payments of every draw

  :param batch: SampleBatch
  :param program: ReinsuranceProgram
  :return: Losses
  """
  if batch.count == 0:
    raise DomainError("Cannot estimate from an empty batch")
  if max(program.portfolio_1 + program.portfolio_2) >= batch.draws.shape[1]:
    raise DomainError("Program refers to risks the batch does not have")
  s1 = batch.draws[:, list(program.portfolio_1)].sum(axis=1)
  s2 = batch.draws[:, list(program.portfolio_2)].sum(axis=1)
  t1 = np.maximum(s1 - program.d1, 0.0)
  t2 = np.maximum(s2 - program.d2, 0.0)
  return Losses(s1=s1, s2=s2, t1=t1, t2=t2, r=t1 + t2)

def expectation(batch, values):
  """
  expectation estimates E[values] under the model: a plain mean for exact
  draws, the weighted mean for signed ones

  :param batch: SampleBatch
  :param values: one value per draw
  :return: Estimate
  """
  values = np.asarray(values, dtype=float)
  n = values.size
  if n == 0:
    raise DomainError("Cannot estimate from an empty batch")
  if batch.signed:
    values = values * batch.weights
  value = float(values.mean())
  return Estimate(value, float(values.std(ddof=1)) / math.sqrt(n) if n > 1 else 0.0)

def probability(batch, event):
  """
  probability estimates P(event), binomial standard error for exact draws

  :param batch: SampleBatch
  :param event: boolean array, one entry per draw
  """
  event = np.asarray(event, dtype=bool)
  if batch.signed:
    return expectation(batch, event)
  n = event.size
  if n == 0:
    raise DomainError("Cannot estimate from an empty batch")
  p = float(event.mean())
  return Estimate(p, math.sqrt(p * (1 - p) / n))

def quantile(batch, values, p):
  """
  quantile returns the weighted empirical p-quantile of values and its row

  :return: (value, row index)
  """
  values = np.asarray(values, dtype=float)
  n = values.size
  order = np.argsort(values, kind='stable')
  cumulative = np.maximum.accumulate(np.cumsum(batch.weighting()[order]) / n)
  position = min(int(np.searchsorted(cumulative, p, side='left')), n - 1)
  row = int(order[position])
  return float(values[row]), row

def value_at_risk(batch, values, p):
  """
  value_at_risk returns the empirical p-quantile with a standard error from
  the difference-quotient estimate of the quantile density

  :param batch: SampleBatch
  :param values: one value per draw
  :param p: level in (0, 1)
  :return: Estimate
  """
  if not 0 < p < 1:
    raise DomainError(f"Confidence level must be in (0, 1), got {p}")
  values = np.asarray(values, dtype=float)
  n = values.size
  var, _ = quantile(batch, values, p)
  h = min(n ** (-1.0 / 3.0), p / 2, (1 - p) / 2)
  upper, _ = quantile(batch, values, p + h)
  lower, _ = quantile(batch, values, p - h)
  sparsity = (upper - lower) / (2 * h)
  return Estimate(var, sparsity * math.sqrt(p * (1 - p) / n))

def tail_value(batch, values, p):
  """
  tail_value returns TVaR_p of values as VaR_p + E[(X - VaR_p)+] / (1 - p),
  which stays right when an atom straddles the level

  :param batch: SampleBatch
  :param values: one value per draw
  :param p: level in (0, 1)
  :return: Estimate
  """
  if not 0 < p < 1:
    raise DomainError(f"Confidence level must be in (0, 1), got {p}")
  values = np.asarray(values, dtype=float)
  var, _ = quantile(batch, values, p)
  excess = expectation(batch, np.maximum(values - var, 0.0))
  return Estimate(var + excess.value / (1 - p), excess.stderr / (1 - p))

def estimate(batch, program, quantity):
  """
  estimate computes a plug-in Monte Carlo estimate and its standard error

  :param batch: SampleBatch
  :param program: ReinsuranceProgram
  :param quantity: Quantity
  :return: Estimate, with length-2 arrays for ALLOC and UNPAID
  """
  loss = losses(batch, program)
  r = loss.r
  kind = quantity.kind

  if kind == QuantityKind.JOINT_TAIL:
    u1, u2 = quantity.args
    return probability(batch, (loss.s1 > u1) & (loss.s2 > u2))
  if kind == QuantityKind.AGG_DF:
    (s,) = quantity.args
    return probability(batch, r <= s)
  if kind == QuantityKind.DEFAULT:
    (capital,) = quantity.args
    return expectation(batch, np.maximum(r - capital, 0.0))
  if kind == QuantityKind.UNPAID:
    k1, k2 = quantity.args
    default = r > k1 + k2
    first = expectation(batch, (loss.t1 - k1) * default)
    second = expectation(batch, (loss.t2 - k2) * default)
    return Estimate(np.array([first.value, second.value]), np.array([first.stderr, second.stderr]))

  (p,) = quantity.args
  if kind == QuantityKind.TVAR:
    return tail_value(batch, r, p)
  if not 0 < p < 1:
    raise DomainError(f"Confidence level must be in (0, 1), got {p}")
  var, pivot = quantile(batch, r, p)
  above = r > var
  # mass of the pivot level that still belongs to the upper 1-p tail
  correction = var * (1 - p - expectation(batch, above).value)
  if kind == QuantityKind.ALLOC:
    share = loss.t1[pivot] / r[pivot] if r[pivot] > 0 else 0.5
    parts = []
    errors = []
    for values, weight in ((loss.t1, share), (loss.t2, 1.0 - share)):
      tail = expectation(batch, values * above)
      parts.append((tail.value + weight * correction) / (1 - p))
      errors.append(tail.stderr / (1 - p))
    return Estimate(np.array(parts), np.array(errors))
  raise DomainError(f"Unknown quantity {quantity}")

def _upper_limits(model):
  return [me_quantile(dist, 1 - QUADRATURE_MASS) for dist in model.marginals]

def quadrature_check(model):
  """
  quadrature_check integrates the joint density over a box holding all but
  1e-10 of each marginal, and compares gamma * E_tilted[X^n] with the
  quadrature of x^n g(x) f(x) for n = 0, 1, 2

  :param model: SarmanovModel with at most three risks
  :return: QuadratureReport
  """
  if model.n > 3:
    raise DomainError(f"Quadrature check supports at most 3 risks, got {model.n}")
  limits = _upper_limits(model)
  gammas = gamma_values(model)

  def density(*x):
    point = np.array(x[::-1])
    product = math.prod(me_eval(dist, point[i], Which.PDF) for i, dist in enumerate(model.marginals))
    return product * float(bracket(model, phi_values(model, point, gammas)))

  options = {'epsabs': 1e-11, 'epsrel': 1e-10, 'limit': 200}
  total, _ = integrate.nquad(density, [(0.0, b) for b in reversed(limits)], opts=[options] * model.n)
  normalization_error = total - 1.0

  residuals = {}
  for i, dist in enumerate(model.marginals):
    tilt = me_kernel_transform(dist, model.kernel)
    for order in (0, 1, 2):
      # one-dimensional, so the full half line is affordable
      direct, _ = integrate.quad(
        lambda x: x ** order * kernel_eval(dist, model.kernel, x) * me_eval(dist, x, Which.PDF),
        0.0, np.inf, epsabs=1e-13, epsrel=1e-11, limit=200
      )
      closed = tilt.gamma * (1.0 if order == 0 else me_moment(tilt.tilted, order))
      residuals[(i, order)] = closed - direct
  logger.info(f"Quadrature normalization error {normalization_error:.3e}")
  return QuadratureReport(normalization_error=normalization_error, tilt_residuals=residuals)

def grid_minimum(model, points=None):
  """
  grid_minimum returns the smallest joint density value on a regular grid
  over the quadrature box of a two- or three-risk model

  :param model: SarmanovModel with two or three risks
  :param points: grid points per axis, 200 for pairs and 40 for triples by default
  """
  if model.n not in (2, 3):
    raise DomainError(f"Grid scan needs 2 or 3 risks, got {model.n}")
  if points is None:
    points = 200 if model.n == 2 else 40
  limits = _upper_limits(model)
  axes = [np.linspace(0.0, b, points) for b in limits]
  grid = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)
  return float(np.min(joint_density(model, grid)))
