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

import csv
import logging
import sys
from pathlib import Path
from typing import Optional, Tuple

import click
from rich.console import Console
from rich.table import Table

from autosim import utils
from autosim.jobs.checks import InputFileCheck, run_preflight_checks
from autosim.jobs.common import AutosimException
from autosim.simworld.replay import (
    Replay,
    ReplayError,
    metrics_columns,
    metrics_rows,
    read_replay,
    select_ticks,
)

LOG = logging.getLogger(__name__)
console = Console()


def tick_range_option(f):
    return click.option(
        "--ticks",
        "tick_range",
        default="",
        help="Inclusive tick range A..B (either bound may be omitted).",
    )(f)


def parse_ticks(text: str) -> Tuple[Optional[int], Optional[int]]:
    if not text:
        return None, None
    try:
        return utils.parse_tick_range(text)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--ticks")


def load(path: Path) -> Replay:
    """:raises: AutosimException naming the line that failed to parse"""
    run_preflight_checks([InputFileCheck(path, "replay")], console)
    try:
        return read_replay(path)
    except ReplayError as e:
        raise AutosimException(f"{path}: {e}")


def _describe_action(action: dict) -> str:
    continuous = action["continuous"]
    kinds = [d["action"]["kind"] for d in action.get("discrete", [])]
    text = f"turn {continuous['heading_rate']:+.2f} speed {continuous['speed_cmd']:.2f}"
    if kinds:
        text += " " + ", ".join(kinds)
    return text


def _table(replay: Replay, first: Optional[int], last: Optional[int]) -> Table:
    controllers = replay.controllers
    table = Table()
    table.add_column("Tick", justify="right")
    table.add_column("Asset", justify="left")
    table.add_column("Action", justify="left")
    table.add_column("Lead controller", justify="left")
    table.add_column("Audit", justify="right")
    for tick in select_ticks(replay, first, last):
        for asset, entry in sorted(tick["assets"].items()):
            gates = entry.get("gates", [])
            lead = ""
            if gates and len(gates) == len(controllers):
                index = max(range(len(gates)), key=lambda k: gates[k])
                lead = f"{controllers[index]} {gates[index]:.2f}"
            table.add_row(
                str(tick["tick"]),
                asset,
                _describe_action(entry["action"]),
                lead,
                str(len(entry.get("audit", []))),
            )
    return table


@click.command()
@click.option(
    "--replay",
    "replay_path",
    required=True,
    type=click.Path(path_type=Path, dir_okay=False),
    help="Replay log written by `autosim run`.",
)
@tick_range_option
@click.option(
    "--format",
    "output_format",
    type=click.Choice(["text", "csv"]),
    default="text",
    help="Table for reading, or metrics CSV on stdout.",
)
def replay(replay_path: Path, tick_range: str, output_format: str) -> None:
    """Show the decisions recorded in a replay log."""
    first, last = parse_ticks(tick_range)
    recorded = load(replay_path)
    try:
        rows = metrics_rows(recorded, first, last)
    except ReplayError as e:
        raise AutosimException(f"{replay_path}: {e}")
    if output_format == "csv":
        writer = csv.DictWriter(
            sys.stdout,
            fieldnames=metrics_columns(recorded.controllers),
            lineterminator="\n",
        )
        writer.writeheader()
        writer.writerows(rows)
        return

    header = recorded.header
    console.print(
        f"Scenario {header.get('scenario', '?')} seed {header.get('seed', '?')}, "
        f"assets {', '.join(header.get('assets', []))}"
    )
    console.print(_table(recorded, first, last))
    if recorded.result is not None:
        total = recorded.result["utility"]["total"]
        console.print(
            f"Ended at tick {recorded.result['ticks_used']} with utility {total:.4f}"
        )
