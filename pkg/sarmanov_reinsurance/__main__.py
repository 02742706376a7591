#!/usr/bin/env python3
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

import sys

from typing import Any

from . import cli
from . import monitor
from .errors import EXIT_FAILURE, SarmanovError

def main(argv=None) -> Any:
  logger = monitor.getLogger()
  try:
    error = cli.dispatch(sys.argv[1:] if argv is None else argv)
  except SarmanovError as exc:
      error = exc.exit_code
      logger.critical(f"{exc}")
  except Exception as exc:
      error = EXIT_FAILURE
      logger.critical(f"{type(exc).__name__}: {exc}")

  return error

if __name__ == "__main__":
  sys.exit(main())
