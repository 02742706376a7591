import math

import pytest

from sarmanov_reinsurance import reinsurance
from sarmanov_reinsurance.erlang_core import KernelFamily, KernelSpec, Which, me_convolve, me_eval, me_rescale
from sarmanov_reinsurance.errors import DomainError, NumericalQualityError
from sarmanov_reinsurance.reinsurance import (
  ReinsuranceProgram, aggregate_df, aggregate_risk, build_term_list, clamp_probability, default_prob,
  default_value, diversification, joint_tail, mean_excess, portfolio_df, portfolio_var_tvar, risk_profile,
  tvar_allocate, unpaid_losses, var_tvar
)
from sarmanov_reinsurance.sarmanov import SarmanovModel

# closed forms a two-million-draw Monte Carlo run agrees with
JOINT_TAIL_20_15 = {'independence': 0.29424, 'laplace': 0.30718, 'fgm': 0.28769}

@pytest.mark.parametrize('case', sorted(JOINT_TAIL_20_15))
def test_joint_tail_at_the_first_threshold(models, program, case):
  assert joint_tail(models[case], program, 20, 15) == pytest.approx(JOINT_TAIL_20_15[case], abs=2e-5)

def test_joint_tail_decreases_along_the_thresholds(models, program):
  thresholds = ((20, 15), (25, 20), (30, 25), (35, 30), (40, 35))
  for model in models.values():
    values = [joint_tail(model, program, u1, u2) for u1, u2 in thresholds]
    assert all(b < a for a, b in zip(values, values[1:]))

def test_independent_joint_tail_one_threshold_further(independence_model, program):
  # the printed first row of the joint tail table is this cell
  assert joint_tail(independence_model, program, 25, 20) == pytest.approx(0.1494, abs=5e-5)

def test_laplace_var_tvar_at_95(laplace_model, program):
  var, tvar = var_tvar(laplace_model, program, 0.95)
  assert var == pytest.approx(19.900, abs=6e-4)
  assert tvar == pytest.approx(30.577, abs=6e-4)

def test_fgm_standalone_tvar_of_the_second_treaty(fgm_model, program):
  assert portfolio_var_tvar(fgm_model, program, 2, 0.95)[1] == pytest.approx(20.082, abs=6e-4)

@pytest.mark.parametrize('p', [0.9, 0.95, 0.99, 0.999])
def test_var_tvar_ordering(models, program, p):
  for model in models.values():
    var, tvar = var_tvar(model, program, p)
    assert 0 <= var < tvar
    tvar_t1 = portfolio_var_tvar(model, program, 1, p)[1]
    tvar_t2 = portfolio_var_tvar(model, program, 2, p)[1]
    # TVaR is subadditive
    assert tvar <= tvar_t1 + tvar_t2 + 1e-9

@pytest.mark.parametrize('p', [0.9, 0.95, 0.975, 0.99, 0.999])
def test_allocation_is_full(models, program, p):
  for model in models.values():
    k1, k2 = tvar_allocate(model, program, p)
    assert k1 + k2 == pytest.approx(var_tvar(model, program, p)[1], rel=1e-8)
    assert k1 > 0 and k2 > 0

@pytest.mark.parametrize('p', [0.95, 0.975, 0.99, 0.999])
def test_unpaid_losses_split_the_default_value(models, program, p):
  for model in models.values():
    _, capital = var_tvar(model, program, p)
    k1, k2 = tvar_allocate(model, program, p)
    unpaid_1, unpaid_2 = unpaid_losses(model, program, k1, k2)
    assert unpaid_1 + unpaid_2 == pytest.approx(default_value(model, program, capital), abs=1e-9)
    assert 0 < default_prob(model, program, capital) < 1 - p

def test_joint_tail_at_origin_is_one(models, program):
  for model in models.values():
    assert joint_tail(model, program, 0.0, 0.0) == pytest.approx(1.0, abs=1e-10)

def test_independence_joint_tail_factorizes(independence_model, program):
  target = reinsurance.common_target(independence_model)
  sums = [me_convolve([me_rescale(independence_model.marginals[i], target) for i in program.portfolio(which)])
          for which in (1, 2)]
  for u1, u2 in ((0.0, 0.0), (20.0, 15.0), (55.0, 41.0)):
    expected = me_eval(sums[0], u1, Which.SF) * me_eval(sums[1], u2, Which.SF)
    assert joint_tail(independence_model, program, u1, u2) == pytest.approx(expected, abs=1e-12)
    marginal_product = portfolio_df(independence_model, program, 1).sf(u1) * portfolio_df(independence_model, program, 2).sf(u2)
    assert joint_tail(independence_model, program, u1, u2) == pytest.approx(marginal_product, abs=1e-9)

def test_term_list_coefficients_sum_to_one(models, program):
  for model in models.values():
    assert build_term_list(model, program).normalization() == pytest.approx(1.0, abs=1e-10)

def test_aggregate_df_limits(models, program):
  for model in models.values():
    risk = aggregate_risk(model, program)
    assert aggregate_df(model, program, 0.0) == risk.atom
    assert aggregate_df(model, program, math.inf) == 1.0
    assert aggregate_df(model, program, 1e4) == pytest.approx(1.0, abs=1e-10)

def test_aggregate_df_is_nondecreasing(fgm_model, program):
  values = [aggregate_df(fgm_model, program, s) for s in (0.0, 0.1, 1.0, 5.0, 10.0, 30.0, 80.0, 200.0)]
  assert all(b >= a for a, b in zip(values, values[1:]))

def test_default_prob_complements_df(models, program):
  for model in models.values():
    for capital in (5.0, 30.1, 73.89):
      assert default_prob(model, program, capital) + aggregate_df(model, program, capital) == pytest.approx(1.0, abs=1e-12)

def test_var_inside_the_atom(fgm_model, program):
  risk = aggregate_risk(fgm_model, program)
  p = risk.atom / 2
  var, tvar = var_tvar(fgm_model, program, p)
  assert var == 0.0
  assert tvar == pytest.approx(risk.mean() / (1 - p), rel=1e-12)
  k1, k2 = tvar_allocate(fgm_model, program, p)
  assert k1 + k2 == pytest.approx(tvar, rel=1e-10)

def test_var_is_the_quantile(laplace_model, program):
  var, _ = var_tvar(laplace_model, program, 0.99)
  assert aggregate_df(laplace_model, program, var) == pytest.approx(0.99, abs=1e-9)

def test_mean_excess(fgm_model, program):
  risk = aggregate_risk(fgm_model, program)
  c = 12.0
  expected = (risk.tail_expectation(c) - c * risk.sf(c)) / risk.sf(c)
  assert mean_excess(fgm_model, program, c) == pytest.approx(expected, rel=1e-12)
  assert mean_excess(fgm_model, program, 0.0) > 0

def test_risk_profile_is_consistent(laplace_model, program):
  profile = risk_profile(laplace_model, program, 0.95)
  assert profile.k1 + profile.k2 == pytest.approx(profile.tvar, rel=1e-8)
  assert profile.unpaid_1 + profile.unpaid_2 == pytest.approx(profile.default_value, abs=1e-9)
  assert profile.diversification == pytest.approx(1 - profile.tvar / (profile.tvar_t1 + profile.tvar_t2))
  assert diversification(laplace_model, program, 0.95) == pytest.approx(profile.diversification, rel=1e-12)

def test_program_must_partition_the_risks(fgm_model):
  with pytest.raises(DomainError):
    ReinsuranceProgram(portfolio_1=(0, 1), portfolio_2=(1, 2), d1=40.0, d2=30.0)
  with pytest.raises(DomainError):
    ReinsuranceProgram(portfolio_1=(0, 1), portfolio_2=(2, 3), d1=0.0, d2=30.0)
  partial = ReinsuranceProgram(portfolio_1=(0,), portfolio_2=(2, 3), d1=40.0, d2=30.0)
  with pytest.raises(DomainError):
    joint_tail(fgm_model, partial, 1.0, 1.0)

def test_arguments_outside_their_domain(fgm_model, program):
  with pytest.raises(DomainError):
    var_tvar(fgm_model, program, 1.0)
  with pytest.raises(DomainError):
    default_value(fgm_model, program, 0.0)
  with pytest.raises(DomainError):
    aggregate_df(fgm_model, program, -1.0)
  with pytest.raises(DomainError):
    joint_tail(fgm_model, program, -1.0, 0.0)

def test_clamp_probability():
  assert clamp_probability(0.25, 'test') == 0.25
  assert clamp_probability(1.0 + 1e-13, 'test') == 1.0
  assert clamp_probability(-1e-13, 'test') == 0.0
  with pytest.raises(NumericalQualityError):
    clamp_probability(1.0 + 1e-6, 'test')

def test_single_risk_portfolios(marginals):
  model = SarmanovModel(marginals=marginals[:2], kernel=KernelSpec(KernelFamily.FGM), alphas={(0, 1): 0.6})
  program = ReinsuranceProgram(portfolio_1=(0,), portfolio_2=(1,), d1=20.0, d2=15.0)
  assert joint_tail(model, program, 0.0, 0.0) == pytest.approx(1.0, abs=1e-10)
  k1, k2 = tvar_allocate(model, program, 0.99)
  assert k1 + k2 == pytest.approx(var_tvar(model, program, 0.99)[1], rel=1e-8)
