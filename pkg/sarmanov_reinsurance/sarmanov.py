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
Sarmanov dependence layer.

The joint density is prod_i f_i(x_i) (1 + sum_T alpha_T prod_{i in T} phi_i(x_i))
with phi_i = g_i - gamma_i and gamma_i = E[g_i(X_i)]. Risk indices are
0-based here; model files use 1-based indices and convert on load.
"""

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from . import monitor
from .erlang_core import KernelFamily, KernelSpec, MixedErlang, Which, me_eval, me_moment
from .errors import DomainError

logger = monitor.getLogger()

# corner enumeration is refused above this many dependent risks
MAX_VALIDATION_DIMENSION = 24
CORNER_CHUNK = 1 << 16

class Admissibility(enum.Enum):
  OK = 'ok'
  VIOLATION = 'violation'
  CONDITIONAL = 'conditional'
  UNCHECKED = 'unchecked'

@dataclass(frozen=True)
class ValidationReport:
  status: Admissibility
  minimum: Optional[float] = None
  corner: Optional[Tuple[float, ...]] = None
  negative_directions: Tuple[Tuple[int, ...], ...] = ()
  message: str = ''

  @property
  def ok(self):
    return self.status == Admissibility.OK

  def describe(self):
    text = f"admissibility {self.status.value}"
    if self.minimum is not None:
      text += f", bracket minimum {self.minimum:.6g}"
    if self.corner is not None:
      text += ", corner (" + ', '.join(f"{phi:.6g}" for phi in self.corner) + ")"
    if self.negative_directions:
      directions = '; '.join('{' + ','.join(str(i + 1) for i in u) + '}' for u in self.negative_directions)
      text += f", negative growth along {directions}"
    if self.message:
      text += f": {self.message}"
    return text

def _normalize_alphas(alphas, n):
  normalized = {}
  for key, value in dict(alphas).items():
    indices = tuple(sorted(int(i) for i in key))
    if len(set(indices)) != len(indices):
      raise DomainError(f"Dependence subset {key} repeats an index")
    if len(indices) < 2:
      raise DomainError(f"Dependence subset {key} needs at least two risks")
    if indices[0] < 0 or indices[-1] >= n:
      raise DomainError(f"Dependence subset {key} is outside risks 0..{n - 1}")
    if indices in normalized:
      raise DomainError(f"Dependence subset {key} given twice")
    value = float(value)
    if value != 0.0:
      normalized[indices] = value
  return dict(sorted(normalized.items(), key=lambda item: (len(item[0]), item[0])))

@dataclass(frozen=True, eq=False)
class SarmanovModel:
  marginals: Tuple[MixedErlang, ...]
  kernel: KernelSpec
  alphas: Dict[Tuple[int, ...], float] = field(default_factory=dict)

  def __post_init__(self):
    marginals = tuple(self.marginals)
    if not marginals:
      raise DomainError("A Sarmanov model needs at least one risk")
    if not isinstance(self.kernel, KernelSpec):
      raise DomainError(f"Kernel must be a KernelSpec, got {self.kernel!r}")
    object.__setattr__(self, 'marginals', marginals)
    object.__setattr__(self, 'alphas', _normalize_alphas(self.alphas, len(marginals)))

  @property
  def n(self):
    return len(self.marginals)

  @property
  def independent(self):
    return not self.alphas

@dataclass(frozen=True)
class XiTable:
  """xi_J for every subset J reached by the expansion, the empty tuple included"""
  values: Dict[Tuple[int, ...], float]
  gammas: Tuple[float, ...]

  def coefficient(self, subset):
    """xi_J prod_{m in J} gamma_m, the weight of the J term"""
    return self.values.get(tuple(subset), 0.0) * math.prod(self.gammas[i] for i in subset)

  def total_probability(self):
    return math.fsum(self.coefficient(subset) for subset in self.values)

def kernel_mean(dist, kernel):
  """
  kernel_mean returns gamma = E[g(X)] in closed form

  :param dist: MixedErlang
  :param kernel: KernelSpec
  """
  if kernel.family == KernelFamily.FGM:
    return 1.0
  if kernel.family == KernelFamily.POWER:
    return me_moment(dist, int(kernel.t))
  shrink = dist.scale / (dist.scale + kernel.t)
  return float(np.dot(dist.weights, np.exp(dist.shapes * math.log(shrink))))

def kernel_eval(dist, kernel, x):
  """
  kernel_eval returns g(x): 2 F̄(x) for FGM, x^t for POWER, exp(-t x) for LAPLACE

  :param dist: MixedErlang the kernel belongs to
  :param kernel: KernelSpec
  :param x: non-negative point or array
  """
  if kernel.family == KernelFamily.FGM:
    return 2.0 * me_eval(dist, x, Which.SF)
  x = np.asarray(x, dtype=float)
  if kernel.family == KernelFamily.POWER:
    values = x ** int(kernel.t)
  else:
    values = np.exp(-kernel.t * x)
  return float(values) if values.ndim == 0 else values

def kernel_range(kernel, gamma):
  """
  kernel_range returns the closure of the range of phi = g - gamma on (0, inf)

  :param kernel: KernelSpec
  :param gamma: E[g(X)]
  """
  if kernel.family == KernelFamily.FGM:
    return -1.0, 1.0
  if kernel.family == KernelFamily.LAPLACE:
    return -gamma, 1.0 - gamma
  return -gamma, math.inf

def gamma_values(model):
  """
  gamma_values returns gamma_i = E[g_i(X_i)] for every risk

  :param model: SarmanovModel
  """
  return tuple(kernel_mean(dist, model.kernel) for dist in model.marginals)

def expand_around(alphas, points):
  """
  expand_around writes the bracket 1 + sum_T alpha_T prod_{i in T} phi_i as a
  polynomial in u_i = phi_i - points_i. Since the bracket is multilinear the
  coefficient of prod_{i in U} u_i is [U empty] + sum_{T >= U} alpha_T prod_{i in T minus U} points_i.

  :param alphas: normalized subset map
  :param points: expansion point per risk
  :return: dict subset -> coefficient, the empty subset included
  """
  coefficients = {(): 1.0}
  for subset, alpha in alphas.items():
    for size in range(len(subset) + 1):
      for inner in itertools.combinations(subset, size):
        rest = math.prod(points[i] for i in subset if i not in inner)
        coefficients[inner] = coefficients.get(inner, 0.0) + alpha * rest
  return coefficients

def xi_coefficients(model):
  """
  xi_coefficients returns the xi table: expanding each
  prod_{i in T} (g_i - gamma_i) gives xi_J = sum_{T >= J} (-1)^{|T|-|J|}
  alpha_T prod_{i in T minus J} gamma_i and xi_empty = 1 + sum_T (-1)^{|T|}
  alpha_T prod_{i in T} gamma_i.

  :param model: SarmanovModel
  :return: XiTable
  """
  gammas = gamma_values(model)
  values = expand_around(model.alphas, [-g for g in gammas])
  values = {subset: value for subset, value in values.items() if subset == () or value != 0.0}
  return XiTable(values=values, gammas=gammas)

def bracket(model, phis):
  """
  bracket evaluates 1 + sum_T alpha_T prod_{i in T} phi_i

  :param model: SarmanovModel
  :param phis: array (..., n) of kernel values phi_i
  """
  phis = np.asarray(phis, dtype=float)
  total = np.ones(phis.shape[:-1])
  for subset, alpha in model.alphas.items():
    total = total + alpha * np.prod(phis[..., list(subset)], axis=-1)
  return total

def phi_values(model, x, gammas=None):
  """
  phi_values returns phi_i(x_i) for every coordinate of x

  :param model: SarmanovModel
  :param x: array (..., n) of non-negative points
  :param gammas: precomputed gamma_values
  """
  x = np.asarray(x, dtype=float)
  if gammas is None:
    gammas = gamma_values(model)
  columns = [kernel_eval(dist, model.kernel, x[..., i]) - gammas[i] for i, dist in enumerate(model.marginals)]
  return np.stack(columns, axis=-1)

def joint_density(model, x):
  """
  joint_density evaluates the Sarmanov density h(x)

  :param model: SarmanovModel
  :param x: array (..., n) of non-negative points
  """
  x = np.asarray(x, dtype=float)
  product = np.ones(x.shape[:-1])
  for i, dist in enumerate(model.marginals):
    product = product * me_eval(dist, x[..., i], Which.PDF)
  values = product * bracket(model, phi_values(model, x))
  return float(values) if values.ndim == 0 else values

def _active_indices(model):
  return sorted(set(itertools.chain.from_iterable(model.alphas)))

def _corner_extreme(model, lows, highs, active, largest):
  """Scans every corner of the phi box on the active indices in chunks."""
  m = len(active)
  best_value = None
  best_corner = None
  for start in range(0, 1 << m, CORNER_CHUNK):
    codes = np.arange(start, min(start + CORNER_CHUNK, 1 << m), dtype=np.int64)
    bits = (codes[:, None] >> np.arange(m)) & 1
    phis = np.zeros((codes.size, model.n))
    phis[:, active] = np.where(bits == 1, highs[active], lows[active])
    values = bracket(model, phis)
    pick = int(np.argmax(values)) if largest else int(np.argmin(values))
    if best_value is None or (values[pick] > best_value if largest else values[pick] < best_value):
      best_value = float(values[pick])
      best_corner = tuple(float(v) for v in phis[pick])
  return best_value, best_corner

def corner_maximum(model):
  """
  corner_maximum returns the largest value of the bracket over the kernel
  ranges, the rejection envelope of the sampler

  :param model: SarmanovModel with a bounded kernel
  """
  gammas = gamma_values(model)
  ranges = [kernel_range(model.kernel, g) for g in gammas]
  lows = np.array([r[0] for r in ranges])
  highs = np.array([r[1] for r in ranges])
  active = _active_indices(model)
  if not active:
    return 1.0
  value, _ = _corner_extreme(model, lows, highs, active, largest=True)
  return value

def validate_model(model):
  """
  validate_model checks that the bracket is non-negative everywhere. The
  bracket is multilinear in (phi_1, ..., phi_n), so over a box of kernel
  ranges its minimum sits on a corner.

  :param model: SarmanovModel
  :return: ValidationReport
  """
  if model.independent:
    return ValidationReport(status=Admissibility.OK, minimum=1.0, message='independence')
  active = _active_indices(model)
  if len(active) > MAX_VALIDATION_DIMENSION:
    return ValidationReport(
      status=Admissibility.UNCHECKED,
      message=f"{len(active)} dependent risks exceed the corner enumeration cap of {MAX_VALIDATION_DIMENSION}"
    )
  gammas = gamma_values(model)
  ranges = [kernel_range(model.kernel, g) for g in gammas]
  lows = np.array([r[0] for r in ranges])
  highs = np.array([r[1] for r in ranges])

  if model.kernel.family == KernelFamily.POWER:
    # phi is unbounded above: expand around the lower corner, every
    # coefficient is the growth rate along one set of directions
    coefficients = expand_around(model.alphas, lows)
    base = coefficients[()]
    corner = tuple(float(v) if i in active else 0.0 for i, v in enumerate(lows))
    if base < 0:
      return ValidationReport(status=Admissibility.VIOLATION, minimum=base, corner=corner)
    negative = tuple(sorted(u for u, c in coefficients.items() if u and c < 0))
    message = 'power kernel is unbounded, checked at the lower corner and along growth directions'
    logger.info(f"Power kernel validation is directional, {len(negative)} negative growth directions")
    return ValidationReport(status=Admissibility.CONDITIONAL, minimum=base, corner=corner,
                            negative_directions=negative, message=message)

  minimum, corner = _corner_extreme(model, lows, highs, active, largest=False)
  if minimum < 0:
    logger.info(f"Bracket is negative at corner {corner}: {minimum}")
    return ValidationReport(status=Admissibility.VIOLATION, minimum=minimum, corner=corner)
  return ValidationReport(status=Admissibility.OK, minimum=minimum, corner=corner)

def marginalize(model, keep):
  """
  marginalize returns the sub-model of the risks in keep. Terms touching a
  dropped risk integrate to zero because E[phi_i(X_i)] = 0.

  :param model: SarmanovModel
  :param keep: iterable of 0-based risk indices
  """
  keep = [int(i) for i in keep]
  if not keep:
    raise DomainError("Cannot marginalize onto an empty set of risks")
  if len(set(keep)) != len(keep):
    raise DomainError(f"Duplicate risk in {keep}")
  for i in keep:
    if i < 0 or i >= model.n:
      raise DomainError(f"Risk {i} outside 0..{model.n - 1}")
  keep = sorted(keep)
  position = {old: new for new, old in enumerate(keep)}
  alphas = {
    tuple(position[i] for i in subset): alpha
    for subset, alpha in model.alphas.items()
    if all(i in position for i in subset)
  }
  return SarmanovModel(
    marginals=tuple(model.marginals[i] for i in keep),
    kernel=model.kernel,
    alphas=alphas
  )
