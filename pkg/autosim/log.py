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
import sys
from pathlib import Path
from typing import Union

import click
from rich.logging import RichHandler

LOG_LEVEL_ENV = "AUTOSIM_LOG_LEVEL"
LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def get_log_level(default: int = logging.WARNING) -> int:
    """Returns the console log level requested through the environment.

    :param default: the level used when AUTOSIM_LOG_LEVEL is unset
    :return: a logging level
    :raises: click.ClickException if the variable names an unknown level
    """
    value = os.environ.get(LOG_LEVEL_ENV)
    if not value:
        return default
    try:
        return LOG_LEVELS[value.lower()]
    except KeyError:
        raise click.ClickException(
            f"{LOG_LEVEL_ENV} must be one of {', '.join(LOG_LEVELS)}, got {value!r}"
        ) from None


def setup_root_logging():
    """Sets up the root logging level for the application.

    By default, console logging is limited to warnings. The
    AUTOSIM_LOG_LEVEL environment variable selects another console level
    and `-v`/`--verbose` on the command line switches the console to debug
    output.

    File logging for a command is configured separately with setup_logging
    once the command knows its output directory.
    """
    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG)

    verbose = any(arg.lower() in ["-v", "--verbose"] for arg in sys.argv)
    level = logging.DEBUG if verbose else get_log_level()

    # quieten noisy third-party loggers
    for namespace in ["matplotlib", "PIL", "asyncio"]:
        logging.getLogger(namespace).setLevel(logging.WARNING)

    handler = RichHandler(show_path=verbose)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
    logger.addHandler(handler)


def setup_logging(logfile: Union[Path, str]) -> None:
    """Sets up the logging for the specified logfile.

    :param logfile: the file to record logging information to
    :type logfile: Path or str
    :return: None
    """
    handler = logging.FileHandler(str(logfile), mode="a")
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(
        logging.Formatter(
            "%(asctime)s,%(msecs)d %(name)s %(levelname)s %(message)s",
            datefmt="%H:%M:%S",
        )
    )
    logging.getLogger().addHandler(handler)
