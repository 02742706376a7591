import io

import pandas as pd
import pytest

from sarmanov_reinsurance import tables
from sarmanov_reinsurance.errors import DomainError
from sarmanov_reinsurance.oracle import Estimate
from sarmanov_reinsurance.tables import (
  CLOSED_FORM_REFUTED, CONFIRMED, PUBLISHED_REFUTED, UNRESOLVED, judge, published_cells
)

from conftest import FIXED_SEED

@pytest.fixture(scope='module')
def report():
  return tables.check(procs=2, draws=400_000, seed=FIXED_SEED)

def cell(report, table, case, quantity, at):
  rows = report[(report['table'] == str(table)) & (report['case'] == case)
                & (report['quantity'] == quantity) & (report['at'] == at)]
  assert len(rows) == 1
  return rows.iloc[0]

@pytest.mark.parametrize('table, count', [(3, 12), (4, 42), (5, 24), (6, 28), (7, 56)])
def test_published_cell_counts(table, count):
  cells = published_cells((table,))
  assert len(cells) == count
  assert {c.table for c in cells} == {table}

def test_every_printed_cell_is_reported(report):
  assert len(report) == len(published_cells())
  assert list(report.columns) == ['table', 'case', 'quantity', 'at', 'published', 'closed_form', 'mc', 'stderr', 'verdict']
  assert set(report['verdict']) <= {CONFIRMED, UNRESOLVED, PUBLISHED_REFUTED, CLOSED_FORM_REFUTED}

def test_sampler_never_rejects_a_closed_form(report):
  rejected = report[report['verdict'] == CLOSED_FORM_REFUTED]
  assert rejected.empty, rejected.to_string()

@pytest.mark.parametrize('case', tables.CASES)
def test_first_joint_tail_row_is_refuted(report, case):
  row = cell(report, 3, case, 'joint_tail', '20 15')
  assert row['verdict'] == PUBLISHED_REFUTED

def test_independent_first_row_is_printed_one_threshold_late(report):
  assert float(cell(report, 3, 'independence', 'joint_tail', '20 15')['closed_form']) == pytest.approx(0.29424, abs=1e-5)
  assert float(cell(report, 3, 'independence', 'joint_tail', '25 20')['closed_form']) == pytest.approx(0.1494, abs=5e-5)

def test_fgm_standalone_second_treaty_is_refuted(report):
  row = cell(report, 5, 'fgm', 'tvar_t2', '0.95')
  assert row['published'] == '18.64'
  assert float(row['closed_form']) == pytest.approx(20.082, abs=6e-4)
  assert row['verdict'] == PUBLISHED_REFUTED

def test_confirmed_cells_match_to_the_printed_precision(report):
  confirmed = report[report['verdict'] == CONFIRMED]
  assert not confirmed.empty
  for _, row in confirmed.iterrows():
    digits = len(row['published'].split('.')[1])
    assert abs(float(row['published']) - float(row['closed_form'])) <= 10.0 ** -digits + 1e-9

def test_judge():
  sharp = Estimate(10.0, 0.01)
  assert judge(10.0, 10.001, sharp, 2) == CONFIRMED
  assert judge(9.5, 10.001, sharp, 2) == PUBLISHED_REFUTED
  assert judge(10.0, 11.0, sharp, 2) == CLOSED_FORM_REFUTED
  loose = Estimate(10.0, 1.0)
  assert judge(9.5, 10.001, loose, 2) == UNRESOLVED

def test_table_one_has_nothing_to_sample():
  frame = tables.check(tables=(1,))
  assert frame.empty
  assert 'verdict' in frame.columns

def test_unknown_table():
  with pytest.raises(DomainError):
    tables.check(tables=(2,))

def test_reproduce_is_deterministic():
  first = tables.reproduce(tables=(3,), procs=1)[3]
  second = tables.reproduce(tables=(3,), procs=3)[3]
  assert first.equals(second)
  buffer = io.StringIO()
  tables.write_frame(first, buffer)
  frame = pd.read_csv(io.StringIO(buffer.getvalue()))
  assert frame.loc[0, ['independence', 'laplace', 'fgm']].tolist() == pytest.approx([0.2942, 0.3072, 0.2877], abs=1e-4)
