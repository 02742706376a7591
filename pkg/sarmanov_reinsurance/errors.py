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

"""Exception types raised by the engine. Each one knows the exit code the cli
hands back to the shell."""

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64

class SarmanovError(Exception):
  exit_code = EXIT_FAILURE

class DomainError(SarmanovError, ValueError):
  """Argument outside the domain of the operation (negative x, p not in (0,1), ...)"""

class ScaleMismatchError(DomainError):
  """Mixed Erlang inputs that must share one scale do not."""

class TruncationError(SarmanovError):
  """A weight vector needs more components than MAX_COMPONENTS."""

class UnsupportedKernelError(SarmanovError):
  pass

class NumericalQualityError(SarmanovError):
  """A signed mixture left [0, 1] by more than roundoff."""
  exit_code = EXIT_NUMERICAL

class ModelFileError(SarmanovError):
  exit_code = EXIT_VALIDATION

  def __init__(self, path, message):
    self.path = path
    self.message = message
    location = path if path else "<root>"
    super().__init__(f"{location}: {message}")

class InadmissibleModelError(SarmanovError):
  exit_code = EXIT_VALIDATION

  def __init__(self, report):
    self.report = report
    super().__init__(report.describe())
