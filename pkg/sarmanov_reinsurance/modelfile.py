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
Model file reader. A model file is JSON with a top-level "schema": 1 and
1-based risk indices, see docs/model-file.md.
"""

import json
from importlib import resources
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import monitor
from .erlang_core import KernelFamily, KernelSpec, MixedErlang
from .errors import InadmissibleModelError, ModelFileError, SarmanovError
from .reinsurance import ReinsuranceProgram, check_program
from .sarmanov import Admissibility, SarmanovModel, validate_model

logger = monitor.getLogger()

FIXTURES = ('tables_independence', 'tables_laplace', 'tables_fgm')

class RiskEntry(BaseModel):
  model_config = ConfigDict(extra='forbid')

  beta: float = Field(..., gt=0, description="Common Erlang rate of the risk")
  weights: List[float] = Field(..., min_length=1, description="Mixing weights q_1, q_2, ...")

  @field_validator('weights')
  @classmethod
  def weights_non_negative(cls, weights):
    if any(w < 0 for w in weights):
      raise ValueError("weights must be non-negative")
    return weights

class KernelEntry(BaseModel):
  model_config = ConfigDict(extra='forbid')

  family: Literal['fgm', 'power', 'laplace']
  t: Optional[float] = Field(None, gt=0)

class AlphaEntry(BaseModel):
  model_config = ConfigDict(extra='forbid')

  indices: List[int] = Field(..., min_length=2)
  value: float

  @field_validator('indices')
  @classmethod
  def distinct_indices(cls, indices):
    if len(set(indices)) != len(indices):
      raise ValueError(f"duplicate risk index in {indices}")
    if min(indices) < 1:
      raise ValueError("risk indices are 1-based")
    return indices

class DeductibleEntry(BaseModel):
  model_config = ConfigDict(extra='forbid')

  d1: float = Field(..., gt=0)
  d2: float = Field(..., gt=0)

class ModelFile(BaseModel):
  model_config = ConfigDict(extra='forbid', populate_by_name=True)

  version: Literal[1] = Field(..., alias='schema')
  risks: List[RiskEntry] = Field(..., min_length=1)
  kernel: KernelEntry
  alphas: List[AlphaEntry] = Field(default_factory=list)
  portfolios: Tuple[List[int], List[int]]
  deductibles: DeductibleEntry
  admissibility: Literal['enforce', 'warn'] = Field(
    'enforce', description="'warn' loads a model whose density goes negative, as if --force were given"
  )

def _location(loc):
  path = ''
  for part in loc:
    if isinstance(part, int):
      path += f"[{part}]"
    else:
      path += f".{part}" if path else str(part)
  return path

def _index_error(path, index, n):
  return ModelFileError(path, f"risk index {index} outside 1..{n}")

def build_model(document):
  """
  build_model turns a validated ModelFile into the engine objects

  :param document: ModelFile
  :return: (SarmanovModel, ReinsuranceProgram)
  """
  n = len(document.risks)
  marginals = []
  for i, risk in enumerate(document.risks):
    try:
      marginals.append(MixedErlang.of(risk.beta, risk.weights))
    except SarmanovError as exc:
      raise ModelFileError(f"risks[{i}]", str(exc)) from exc

  try:
    kernel = KernelSpec(KernelFamily(document.kernel.family), document.kernel.t)
  except SarmanovError as exc:
    raise ModelFileError('kernel', str(exc)) from exc

  alphas = {}
  for i, entry in enumerate(document.alphas):
    for index in entry.indices:
      if index > n:
        raise _index_error(f"alphas[{i}].indices", index, n)
    key = tuple(sorted(index - 1 for index in entry.indices))
    if key in alphas:
      raise ModelFileError(f"alphas[{i}].indices", f"subset {sorted(entry.indices)} given twice")
    alphas[key] = entry.value

  portfolios = []
  for which, members in enumerate(document.portfolios):
    for index in members:
      if index < 1 or index > n:
        raise _index_error(f"portfolios[{which}]", index, n)
    portfolios.append(tuple(index - 1 for index in members))

  try:
    model = SarmanovModel(marginals=tuple(marginals), kernel=kernel, alphas=alphas)
  except SarmanovError as exc:
    raise ModelFileError('alphas', str(exc)) from exc
  try:
    program = ReinsuranceProgram(
      portfolio_1=portfolios[0],
      portfolio_2=portfolios[1],
      d1=document.deductibles.d1,
      d2=document.deductibles.d2
    )
  except SarmanovError as exc:
    raise ModelFileError('portfolios', str(exc)) from exc
  try:
    check_program(model, program)
  except SarmanovError as exc:
    missing = sorted(set(range(1, n + 1)) - {index for members in document.portfolios for index in members})
    raise ModelFileError('portfolios', f"risks {missing} are in neither portfolio, every risk 1..{n} must be covered") from exc
  return model, program

def load_document(text, source='<model>'):
  try:
    raw = json.loads(text)
  except json.JSONDecodeError as exc:
    raise ModelFileError(f"{source}: line {exc.lineno} column {exc.colno}", exc.msg) from exc
  try:
    return ModelFile.model_validate(raw)
  except ValidationError as exc:
    first = exc.errors()[0]
    more = f" (+{exc.error_count() - 1} more)" if exc.error_count() > 1 else ''
    raise ModelFileError(_location(first['loc']), f"{first['msg']}{more}") from exc

def parse_text(text, force=False, source='<model>'):
  """
  parse_text reads a model file body, builds the model and checks that it is
  admissible

  :param text: JSON document
  :param force: accept an inadmissible dependence structure with a warning
  :param source: name used in messages
  :return: (SarmanovModel, ReinsuranceProgram, ValidationReport)
  """
  document = load_document(text, source)
  model, program = build_model(document)
  report = validate_model(model)
  if report.status == Admissibility.VIOLATION:
    if not force and document.admissibility != 'warn':
      raise InadmissibleModelError(report)
    logger.warning(f"{source}: forcing an inadmissible model, {report.describe()}")
  elif not report.ok:
    logger.warning(f"{source}: {report.describe()}")
  logger.info(f"Loaded {source}: {model.n} risks, kernel {model.kernel.describe()}, {len(model.alphas)} dependence terms")
  return model, program, report

def parse_model(path, force=False):
  """
  parse_model reads a model file from disk

  :param path: file path
  :param force: accept an inadmissible dependence structure
  :return: (SarmanovModel, ReinsuranceProgram, ValidationReport)
  """
  try:
    with open(path, 'r', encoding='utf-8') as handle:
      text = handle.read()
  except OSError as exc:
    raise ModelFileError(str(path), exc.strerror or str(exc)) from exc
  return parse_text(text, force=force, source=str(path))

def fixture_text(name):
  if name not in FIXTURES:
    raise ModelFileError(name, f"unknown fixture, expected one of {', '.join(FIXTURES)}")
  return resources.files(__package__).joinpath('fixtures', f"{name}.json").read_text(encoding='utf-8')

def load_fixture(name):
  """
  load_fixture parses one of the shipped model files

  :param name: tables_independence, tables_laplace or tables_fgm
  :return: (SarmanovModel, ReinsuranceProgram)
  """
  model, program, _ = parse_text(fixture_text(name), source=name)
  return model, program
