import numpy as np
import pandas as pd
import pytest

from sarmanov_reinsurance import oracle
from sarmanov_reinsurance.erlang_core import KernelFamily, KernelSpec, me_moment
from sarmanov_reinsurance.errors import DomainError, InadmissibleModelError, UnsupportedKernelError
from sarmanov_reinsurance.oracle import (
  Quantity, SampleBatch, draw, estimate, expectation, grid_minimum, losses, quadrature_check, sample,
  sample_signed, tail_value, value_at_risk
)
from sarmanov_reinsurance.reinsurance import (
  aggregate_df, default_value, joint_tail, portfolio_var_tvar, tvar_allocate, var_tvar
)
from sarmanov_reinsurance.sarmanov import SarmanovModel, corner_maximum, marginalize

from conftest import FGM_ALPHAS, FIXED_SEED, marginal

SMALL = 200_000
AGREEMENT = 4.0

def pair_model(alpha, kernel):
  return SarmanovModel(marginals=(marginal(0), marginal(1)), kernel=kernel, alphas={(0, 1): alpha})

@pytest.fixture(scope='module')
def half_fgm_model(marginals):
  # half the shipped FGM coefficients keeps every corner positive
  alphas = {subset: alpha / 2 for subset, alpha in FGM_ALPHAS.items()}
  return SarmanovModel(marginals=marginals, kernel=KernelSpec(KernelFamily.FGM), alphas=alphas)

@pytest.fixture(scope='module')
def fgm_batch(fgm_model):
  return draw(fgm_model, SMALL, FIXED_SEED, procs=2)

@pytest.fixture(scope='module')
def exact_batch(half_fgm_model):
  return sample(half_fgm_model, SMALL, FIXED_SEED, procs=2)

def assert_agrees(result, closed):
  assert abs(result.value - closed) <= AGREEMENT * result.stderr + 1e-12

def test_sampling_is_deterministic(half_fgm_model):
  first = sample(half_fgm_model, 20_000, 7, procs=1)
  second = sample(half_fgm_model, 20_000, 7, procs=3)
  assert np.array_equal(first.draws, second.draws)
  other = sample(half_fgm_model, 20_000, 8, procs=1)
  assert not np.array_equal(first.draws, other.draws)

def test_signed_sampling_is_deterministic(fgm_model):
  first = sample_signed(fgm_model, 20_000, 7, procs=1)
  second = sample_signed(fgm_model, 20_000, 7, procs=3)
  assert np.array_equal(first.draws, second.draws)
  assert np.array_equal(first.weights, second.weights)

def test_independent_batch(independence_model):
  batch = sample(independence_model, SMALL, FIXED_SEED)
  assert batch.acceptance_rate == 1.0
  assert not batch.signed
  assert batch.draws.shape == (SMALL, 4)
  assert np.all(batch.draws > 0)
  column = batch.draws[:, 0]
  stderr = column.std(ddof=1) / np.sqrt(SMALL)
  assert abs(column.mean() - 13.33) <= AGREEMENT * stderr + 0.0034

def test_exact_acceptance_rate_is_one_over_the_envelope(exact_batch, half_fgm_model):
  assert exact_batch.acceptance_rate == pytest.approx(1 / corner_maximum(half_fgm_model), abs=0.01)

@pytest.mark.parametrize('which', ['exact', 'signed'])
def test_marginal_moments_survive_dependence(exact_batch, fgm_batch, half_fgm_model, which):
  batch = exact_batch if which == 'exact' else fgm_batch
  for i, dist in enumerate(half_fgm_model.marginals):
    assert_agrees(expectation(batch, batch.draws[:, i]), me_moment(dist, 1))

def test_admissible_model_draws_exactly(half_fgm_model):
  assert not draw(half_fgm_model, 1_000, 3).signed

def test_inadmissible_model_draws_signed_weights(fgm_batch):
  assert fgm_batch.signed
  assert fgm_batch.count == SMALL
  assert 0 < fgm_batch.negative_share < 1e-3
  total = expectation(fgm_batch, np.ones(SMALL))
  assert abs(total.value - 1.0) <= AGREEMENT * total.stderr

def test_signed_laplace_joint_tail(laplace_model, program):
  batch = draw(laplace_model, SMALL, FIXED_SEED, procs=2)
  assert 0 < batch.negative_share < 1e-3
  assert_agrees(estimate(batch, program, Quantity.joint_tail(20, 15)), joint_tail(laplace_model, program, 20, 15))

def test_power_kernel_is_refused():
  with pytest.raises(UnsupportedKernelError):
    sample(pair_model(0.001, KernelSpec(KernelFamily.POWER, 1)), 100, 1)
  with pytest.raises(UnsupportedKernelError):
    draw(pair_model(0.001, KernelSpec(KernelFamily.POWER, 1)), 100, 1)

def test_exact_sampler_refuses_an_inadmissible_model(fgm_model):
  with pytest.raises(InadmissibleModelError):
    sample(pair_model(2.0, KernelSpec(KernelFamily.FGM)), 100, 1)
  with pytest.raises(InadmissibleModelError):
    sample(fgm_model, 100, 1)

def test_count_must_be_positive(fgm_model):
  with pytest.raises(DomainError):
    sample(fgm_model, 0, 1)
  with pytest.raises(DomainError):
    draw(fgm_model, 0, 1)

@pytest.mark.parametrize('thresholds', [(20, 15), (25, 20), (35, 30)])
def test_joint_tail_estimate(fgm_batch, fgm_model, program, thresholds):
  result = estimate(fgm_batch, program, Quantity.joint_tail(*thresholds))
  assert_agrees(result, joint_tail(fgm_model, program, *thresholds))

def test_joint_tail_of_the_exact_sampler(exact_batch, half_fgm_model, program):
  result = estimate(exact_batch, program, Quantity.joint_tail(20, 15))
  assert_agrees(result, joint_tail(half_fgm_model, program, 20, 15))

@pytest.mark.parametrize('s', [0.0, 5.0, 20.0])
def test_aggregate_df_estimate(fgm_batch, fgm_model, program, s):
  assert_agrees(estimate(fgm_batch, program, Quantity.agg_df(s)), aggregate_df(fgm_model, program, s))

def test_tvar_and_allocation_estimates(fgm_batch, fgm_model, program):
  tvar = estimate(fgm_batch, program, Quantity.tvar(0.95))
  assert_agrees(tvar, var_tvar(fgm_model, program, 0.95)[1])
  allocation = estimate(fgm_batch, program, Quantity.alloc(0.95))
  assert allocation.value.sum() == pytest.approx(tvar.value, rel=1e-10)
  for value, stderr, closed in zip(allocation.value, allocation.stderr, tvar_allocate(fgm_model, program, 0.95)):
    assert abs(value - closed) <= AGREEMENT * stderr

def test_value_at_risk_estimate(fgm_batch, fgm_model, program):
  loss = losses(fgm_batch, program)
  result = value_at_risk(fgm_batch, loss.r, 0.95)
  assert result.stderr > 0
  assert_agrees(result, var_tvar(fgm_model, program, 0.95)[0])

@pytest.mark.parametrize('which', [1, 2])
def test_standalone_tail_value(fgm_batch, fgm_model, program, which):
  loss = losses(fgm_batch, program)
  assert_agrees(tail_value(fgm_batch, loss.treaty(which), 0.95), portfolio_var_tvar(fgm_model, program, which, 0.95)[1])

def test_default_estimate(fgm_batch, fgm_model, program):
  capital = var_tvar(fgm_model, program, 0.95)[1]
  assert_agrees(estimate(fgm_batch, program, Quantity.default(capital)), default_value(fgm_model, program, capital))

def test_default_beyond_every_draw(fgm_batch, program):
  result = estimate(fgm_batch, program, Quantity.default(1e6))
  assert (result.value, result.stderr) == (0.0, 0.0)

def test_unpaid_estimates_add_up(fgm_batch, program):
  unpaid = estimate(fgm_batch, program, Quantity.unpaid(22.11, 11.02))
  total = estimate(fgm_batch, program, Quantity.default(33.13))
  assert unpaid.value.sum() == pytest.approx(total.value, rel=1e-9)

def test_empty_batch_is_refused(program):
  batch = SampleBatch(draws=np.empty((0, 4)), seed=0, acceptance_rate=1.0)
  with pytest.raises(DomainError):
    estimate(batch, program, Quantity.joint_tail(1, 1))

def test_dump_batch(tmp_path, half_fgm_model):
  batch = sample(half_fgm_model, 50, 3)
  path = tmp_path / 'draws.csv'
  oracle.dump_batch(batch, path)
  frame = pd.read_csv(path)
  assert list(frame.columns) == ['x1', 'x2', 'x3', 'x4']
  assert np.allclose(frame.to_numpy(), batch.draws, rtol=1e-11)

def test_dump_signed_batch_keeps_the_weights(tmp_path, fgm_model):
  batch = sample_signed(fgm_model, 50, 3)
  path = tmp_path / 'draws.csv'
  oracle.dump_batch(batch, path)
  frame = pd.read_csv(path)
  assert list(frame.columns) == ['x1', 'x2', 'x3', 'x4', 'weight']
  assert np.allclose(frame['weight'].to_numpy(), batch.weights, rtol=1e-11)

def test_quadrature_of_an_independent_pair(independence_model):
  report = quadrature_check(marginalize(independence_model, (0, 1)))
  assert abs(report.normalization_error) <= 1e-8

def test_quadrature_of_an_fgm_pair():
  report = quadrature_check(pair_model(0.6, KernelSpec(KernelFamily.FGM)))
  assert abs(report.normalization_error) <= 1e-6
  assert report.max_tilt_residual <= 1e-7

@pytest.mark.parametrize('pair', [(0, 1), (2, 3), (0, 3)])
def test_quadrature_of_laplace_sub_models(laplace_model, pair):
  report = quadrature_check(marginalize(laplace_model, pair))
  assert abs(report.normalization_error) <= 1e-6
  assert report.max_tilt_residual <= 1e-7

def test_laplace_pair_density_is_non_negative():
  assert grid_minimum(pair_model(16.0, KernelSpec(KernelFamily.LAPLACE, 1.0))) >= 0.0

def test_grid_needs_two_or_three_risks(fgm_model):
  with pytest.raises(DomainError):
    grid_minimum(fgm_model)

def test_quadrature_refuses_large_models(fgm_model):
  with pytest.raises(DomainError):
    quadrature_check(fgm_model)

@pytest.mark.slow
@pytest.mark.parametrize('case', ['independence', 'fgm', 'laplace'])
def test_closed_forms_against_ten_million_draws(models, program, case):
  model = models[case]
  batch = draw(model, 10_000_000, FIXED_SEED, procs=4)
  assert_agrees(estimate(batch, program, Quantity.joint_tail(20, 15)), joint_tail(model, program, 20, 15))
  for s in (0.0, 10.0, 30.0):
    assert_agrees(estimate(batch, program, Quantity.agg_df(s)), aggregate_df(model, program, s))
  assert_agrees(estimate(batch, program, Quantity.tvar(0.95)), var_tvar(model, program, 0.95)[1])
  allocation = estimate(batch, program, Quantity.alloc(0.95))
  for value, stderr, closed in zip(allocation.value, allocation.stderr, tvar_allocate(model, program, 0.95)):
    assert abs(value - closed) <= AGREEMENT * stderr
  for p in (0.95, 0.975, 0.99, 0.999):
    capital = var_tvar(model, program, p)[1]
    assert_agrees(estimate(batch, program, Quantity.default(capital)), default_value(model, program, capital))
