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

import enum
import logging
from typing import List, Optional

import click
from rich.console import Console
from rich.status import Status

LOG = logging.getLogger(__name__)


class AutosimException(click.ClickException):
    """A command failure reported to the user with a chosen exit code."""

    exit_code = 1


class ScenarioInvalid(AutosimException):
    exit_code = 2


class LedgerInvalid(AutosimException):
    exit_code = 3


class ResultType(enum.Enum):
    COMPLETED = 0
    FAILED = 1
    SKIPPED = 2


class Result:
    """The result of running a step"""

    def __init__(self, result_type: ResultType, message: Optional[str] = ""):
        """Creates a new result

        :param result_type: whether the step completed, failed or was skipped
        :param message: text shown to the user
        """
        self.result_type = result_type
        self.message = message


class BaseStep:
    """A step defines a logical unit of work to be done as part of a plan.

    Steps of one command share their inputs and outputs through the
    attributes of the objects they were constructed with.
    """

    def __init__(self, name: str, description: str = ""):
        """Initialise the BaseStep

        :param name: the name of the step
        :param description: shown next to the status spinner
        """
        self.name = name
        self.description = description

    def is_skip(self, status: Optional[Status] = None) -> bool:
        """Determines if the step should be skipped or not.

        :return: True if the Step should be skipped, False otherwise
        """
        return False

    def run(self, status: Optional[Status] = None) -> Result:
        """Run the step to completion.

        :return: the Result of the step
        """
        return Result(ResultType.COMPLETED)


def run_plan(
    plan: List[BaseStep],
    console: Console,
    error: type = AutosimException,
) -> List[Result]:
    """Run each step of a plan under a status spinner.

    :param plan: the steps, in order
    :param console: where progress is printed
    :param error: exception raised for a failed step
    :raises: `error` with the step's message when a step fails
    """
    results = []
    for step in plan:
        LOG.debug(f"Starting step {step.name}")
        message = f"{step.description} ... "
        with console.status(message) as status:
            if step.is_skip(status):
                LOG.debug(f"Skipping step {step.name}")
                console.print(f"{message}[yellow]skipped[/yellow]")
                results.append(Result(ResultType.SKIPPED))
                continue

            result = step.run(status)
            results.append(result)
            if result.result_type == ResultType.FAILED:
                console.print(f"{message}[red]failed[/red]")
                raise error(result.message)
            console.print(f"{message}[green]done[/green]")
        LOG.debug(f"Finished running step {step.name}. Result: {result.result_type}")
    return results
