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
from pathlib import Path

import click
from rich.console import Console

from autosim.commands.replay import load, parse_ticks, tick_range_option
from autosim.jobs.checks import OutputDirCheck, run_preflight_checks
from autosim.jobs.common import AutosimException
from autosim.simworld.replay import ReplayError, metrics_rows, write_metrics_csv

LOG = logging.getLogger(__name__)
console = Console()


@click.command("export-metrics")
@click.option(
    "--replay",
    "replay_path",
    required=True,
    type=click.Path(path_type=Path, dir_okay=False),
    help="Replay log written by `autosim run`.",
)
@click.option(
    "--csv",
    "csv_path",
    required=True,
    type=click.Path(path_type=Path, dir_okay=False),
    help="Metrics CSV to write.",
)
@tick_range_option
def export_metrics(replay_path: Path, csv_path: Path, tick_range: str) -> None:
    """Export per-tick utility components and gate weights as CSV.

    One row per tick and acting asset; columns are described in
    doc/metrics.md.
    """
    first, last = parse_ticks(tick_range)
    recorded = load(replay_path)
    run_preflight_checks([OutputDirCheck(csv_path.parent)], console)
    try:
        rows = metrics_rows(recorded, first, last)
    except ReplayError as e:
        raise AutosimException(f"{replay_path}: {e}")
    write_metrics_csv(rows, recorded.controllers, csv_path)
    console.print(f"[green]{len(rows)} rows written to {csv_path}[/green]")
