# Copyright (c) 2023 autosim developers
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
# implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import logging
import os
from pathlib import Path
from typing import List

from rich.console import Console

from autosim.jobs.common import AutosimException

LOG = logging.getLogger(__name__)


class Check:
    """Base class for Pre-flight checks.

    Check performs a verification step to determine
    to proceed further or not.
    """

    def __init__(self, name: str, description: str = ""):
        """Initialise the Check.

        :param name: the name of the check
        """
        self.name = name
        self.description = description
        self.message = None

    def run(self) -> bool:
        """Run the check logic here.

        Return True if check is Ok.
        Otherwise update self.message and return False.
        """

        return True


class InputFileCheck(Check):
    """Check that an input file exists and can be read."""

    def __init__(self, path: Path, what: str = "input"):
        self.path = Path(path)
        super().__init__(
            f"Check {what} file",
            f"Checking {what} file {self.path}",
        )

    def run(self) -> bool:
        if not self.path.is_file():
            self.message = f"{self.path}: no such file"
            return False
        if not os.access(self.path, os.R_OK):
            self.message = f"{self.path}: not readable"
            return False
        return True


class OutputDirCheck(Check):
    """Check that the output directory exists or can be created."""

    def __init__(self, path: Path):
        self.path = Path(path)
        super().__init__(
            "Check output directory",
            f"Checking output directory {self.path}",
        )

    def run(self) -> bool:
        try:
            self.path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            self.message = f"{self.path}: cannot create output directory: {e}"
            return False
        if not os.access(self.path, os.W_OK):
            self.message = f"{self.path}: output directory is not writable"
            return False
        return True


def run_preflight_checks(checks: List[Check], console: Console) -> None:
    """:raises: AutosimException with the first failing check's message"""
    for check in checks:
        LOG.debug(f"Starting pre-flight check {check.name}")
        message = f"{check.description} ... "
        with console.status(message):
            if check.run():
                LOG.debug(f"{message}done")
            else:
                console.print(f"{message}[red]failed[/red]")
                raise AutosimException(check.message)
