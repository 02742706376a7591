import math

import numpy as np
import pytest
from scipy import integrate

from sarmanov_reinsurance.erlang_core import Which, me_eval, me_rescale, me_stop_loss_premium
from sarmanov_reinsurance.errors import DomainError, ScaleMismatchError
from sarmanov_reinsurance.stop_loss import (
  PairPart, StopLossPair, StopLossRisk, delta_coeffs, partial_expectation_pair, partial_expectation_single,
  stoploss_df, stoploss_sum_continuous_df
)

@pytest.fixture(scope='module')
def pair(marginals):
  first = me_rescale(marginals[0], 0.16)
  second = me_rescale(marginals[2], 0.16)
  return first, second

@pytest.mark.parametrize('d', [0.5, 10.0, 40.0, 150.0])
def test_delta_coefficients_hold_the_excess_mass(marginals, d):
  for dist in marginals:
    assert delta_coeffs(dist, d).mass == pytest.approx(me_eval(dist, d, Which.SF), abs=1e-10)

def test_delta_coefficients_need_positive_deductible(marginals):
  with pytest.raises(DomainError):
    delta_coeffs(marginals[0], 0.0)

def test_atom_is_the_df_at_the_deductible(marginals):
  risk = StopLossRisk(marginals[1], 40.0)
  assert risk.atom == me_eval(marginals[1], 40.0, Which.CDF)
  assert risk.df(0.0) == risk.atom

@pytest.mark.parametrize('y', [0.0, 0.3, 5.0, 25.0, 100.0])
def test_stop_loss_df_is_shifted_df(marginals, y):
  dist = marginals[0]
  assert stoploss_df(dist, 40.0, y) == pytest.approx(me_eval(dist, 40.0 + y, Which.CDF), abs=1e-12)

def test_stop_loss_df_rejects_negative_points(marginals):
  with pytest.raises(DomainError):
    stoploss_df(marginals[0], 40.0, -1.0)

@pytest.mark.parametrize('c', [0.0, 2.0, 17.0, 60.0])
def test_single_partial_expectation(marginals, c):
  dist = marginals[3]
  d = 30.0
  expected = me_stop_loss_premium(dist, d + c) + c * me_eval(dist, d + c, Which.SF)
  assert partial_expectation_single(dist, d, c) == pytest.approx(expected, rel=1e-10)

def test_continuous_part_of_the_sum_tends_to_both_tails(pair):
  first, second = pair
  expected = me_eval(first, 40.0, Which.SF) * me_eval(second, 30.0, Which.SF)
  assert stoploss_sum_continuous_df(first, second, 40.0, 30.0, 5000.0) == pytest.approx(expected, rel=1e-10)
  assert stoploss_sum_continuous_df(first, second, 40.0, 30.0, 0.0) == 0.0

def test_continuous_part_of_the_sum_against_quadrature(pair):
  first, second = pair
  s = 12.0
  value, _ = integrate.dblquad(
    lambda y2, y1: me_eval(first, 40.0 + y1, Which.PDF) * me_eval(second, 30.0 + y2, Which.PDF),
    0.0, s, 0.0, lambda y1: s - y1, epsabs=1e-13, epsrel=1e-10
  )
  assert stoploss_sum_continuous_df(first, second, 40.0, 30.0, s) == pytest.approx(value, rel=1e-8)

def test_pair_parts_add_up(pair):
  first, second = pair
  for c in (0.0, 3.0, 25.0):
    parts = [partial_expectation_pair(first, second, 40.0, 30.0, c, part) for part in PairPart]
    assert parts[0] + parts[1] == pytest.approx(parts[2], rel=1e-13)

def test_pair_expectation_at_zero_factorizes(pair):
  first, second = pair
  tail_1 = me_eval(first, 40.0, Which.SF)
  tail_2 = me_eval(second, 30.0, Which.SF)
  premium_1 = me_stop_loss_premium(first, 40.0)
  premium_2 = me_stop_loss_premium(second, 30.0)
  both = StopLossPair(StopLossRisk(first, 40.0), StopLossRisk(second, 30.0))
  assert both.partial_expectation(0.0, PairPart.FIRST) == pytest.approx(premium_1 * tail_2, rel=1e-10)
  assert both.partial_expectation(0.0, PairPart.SECOND) == pytest.approx(premium_2 * tail_1, rel=1e-10)

def test_pair_partial_expectation_against_quadrature(pair):
  first, second = pair
  c = 8.0
  density = lambda y2, y1: me_eval(first, 40.0 + y1, Which.PDF) * me_eval(second, 30.0 + y2, Which.PDF)
  total_mass = partial_expectation_pair(first, second, 40.0, 30.0, 0.0, PairPart.FIRST)
  below, _ = integrate.dblquad(lambda y2, y1: y1 * density(y2, y1), 0.0, c, 0.0, lambda y1: c - y1,
                               epsabs=1e-13, epsrel=1e-10)
  above = partial_expectation_pair(first, second, 40.0, 30.0, c, PairPart.FIRST)
  assert above + below == pytest.approx(total_mass, rel=1e-8)

def test_pair_needs_a_common_scale(marginals):
  with pytest.raises(ScaleMismatchError):
    StopLossPair(StopLossRisk(marginals[0], 40.0), StopLossRisk(marginals[1], 30.0))
  with pytest.raises(ScaleMismatchError):
    stoploss_sum_continuous_df(marginals[0], marginals[1], 40.0, 30.0, 1.0)

def test_partial_expectation_rejects_negative_threshold(pair):
  first, second = pair
  with pytest.raises(DomainError):
    partial_expectation_single(first, 40.0, -1.0)
  with pytest.raises(DomainError):
    partial_expectation_pair(first, second, 40.0, 30.0, -1.0, PairPart.SUM)

def test_delta_coefficients_are_non_negative(marginals):
  coeffs = delta_coeffs(me_rescale(marginals[0], 0.32), 40.0).coeffs
  assert np.all(coeffs >= 0)
  assert math.fsum(coeffs) <= 1.0
