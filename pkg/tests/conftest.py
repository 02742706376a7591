from importlib import resources

import pytest

from sarmanov_reinsurance.erlang_core import KernelFamily, KernelSpec, MixedErlang
from sarmanov_reinsurance.reinsurance import ReinsuranceProgram
from sarmanov_reinsurance.sarmanov import SarmanovModel

# (beta, weights) of X1..X4
MARGINALS = (
  (0.12, (0.4, 0.6)),
  (0.14, (0.3, 0.7)),
  (0.15, (0.5, 0.5)),
  (0.16, (0.8, 0.2)),
)

SUBSETS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3),
           (0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3), (0, 1, 2, 3))
FGM_ALPHAS = dict(zip(SUBSETS, (0.6, 0.1, 0.1, 0.1, 0.04, 0.5, 0.11, 0.12, 0.10, 0.15, 0.07)))
LAPLACE_ALPHAS = dict(zip(SUBSETS, (16, 5, 3, 5, 3, 8, 56, 30, 15, 20, 170)))

FIXED_SEED = 20240101

def marginal(i):
  beta, weights = MARGINALS[i]
  return MixedErlang.of(beta, weights)

def fixture_path(name):
  return str(resources.files('sarmanov_reinsurance').joinpath('fixtures', f"{name}.json"))

@pytest.fixture(scope='session')
def marginals():
  return tuple(marginal(i) for i in range(4))

@pytest.fixture(scope='session')
def program():
  return ReinsuranceProgram(portfolio_1=(0, 1), portfolio_2=(2, 3), d1=40.0, d2=30.0)

@pytest.fixture(scope='session')
def independence_model(marginals):
  return SarmanovModel(marginals=marginals, kernel=KernelSpec(KernelFamily.FGM), alphas={})

@pytest.fixture(scope='session')
def fgm_model(marginals):
  return SarmanovModel(marginals=marginals, kernel=KernelSpec(KernelFamily.FGM), alphas=FGM_ALPHAS)

@pytest.fixture(scope='session')
def laplace_model(marginals):
  return SarmanovModel(marginals=marginals, kernel=KernelSpec(KernelFamily.LAPLACE, 1.0), alphas=LAPLACE_ALPHAS)

@pytest.fixture(scope='session')
def models(independence_model, laplace_model, fgm_model):
  return {'independence': independence_model, 'laplace': laplace_model, 'fgm': fgm_model}
