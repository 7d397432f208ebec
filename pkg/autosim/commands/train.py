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
from pathlib import Path
from typing import List, Optional, Tuple

import click
import numpy as np
from rich.console import Console
from rich.status import Status
from rich.table import Table

from autosim import log
from autosim.commands.run import LoadScenarioStep
from autosim.jobs.checks import InputFileCheck, OutputDirCheck, run_preflight_checks
from autosim.jobs.common import (
    AutosimException,
    BaseStep,
    Result,
    ResultType,
    ScenarioInvalid,
    run_plan,
)
from autosim.training.personality import Personality, save_personality
from autosim.training.reinforce import TrainingError
from autosim.training.trainer import (
    CurvePoint,
    evaluate_baseline,
    train as train_personality,
    write_learning_curve,
)

LOG = logging.getLogger(__name__)
console = Console()


class TrainStep(BaseStep):
    def __init__(self, scenario_step: LoadScenarioStep, personality_id: Optional[str]):
        super().__init__("Train personality", "Training personality")
        self.scenario_step = scenario_step
        self.personality_id = personality_id
        self.personality: Optional[Personality] = None
        self.curve: List[CurvePoint] = []

    def run(self, status: Optional[Status] = None) -> Result:
        scenario = self.scenario_step.scenario
        total = scenario.training.iterations

        def progress(point: CurvePoint) -> None:
            if status:
                status.update(
                    f"Training personality ... iteration {point.iteration + 1}"
                    f"/{total}, mean return {point.mean_return:.3f}"
                )

        try:
            self.personality, self.curve = train_personality(
                scenario, personality_id=self.personality_id, progress=progress
            )
        except TrainingError as e:
            LOG.error(f"Training aborted: {e}")
            return Result(ResultType.FAILED, f"Training aborted: {e}")
        return Result(ResultType.COMPLETED)


class BaselineStep(BaseStep):
    """Utility of randomly initialised personalities on the same scenario."""

    def __init__(self, scenario_step: LoadScenarioStep, count: int):
        super().__init__(
            "Evaluate baseline", f"Evaluating {count} random personalities"
        )
        self.scenario_step = scenario_step
        self.count = count
        self.totals: List[float] = []

    def is_skip(self, status: Optional[Status] = None) -> bool:
        return self.count == 0

    def run(self, status: Optional[Status] = None) -> Result:
        scenario = self.scenario_step.scenario
        self.totals = evaluate_baseline(
            scenario, self.count, seed=scenario.training.seed
        )
        return Result(ResultType.COMPLETED)


def _summary(curve: List[CurvePoint], baseline: List[float]) -> Table:
    table = Table()
    table.add_column("Measure", justify="left")
    table.add_column("Value", justify="right")
    if curve:
        tail = [p.mean_return for p in curve[-20:]]
        table.add_row("iterations", str(len(curve)))
        table.add_row("final mean return (last 20)", f"{np.mean(tail):.4f}")
        table.add_row("best mean return", f"{curve[-1].best_return:.4f}")
    if baseline:
        table.add_row("random baseline mean", f"{np.mean(baseline):.4f}")
    return table


def _write_baseline(totals: List[float], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["personality", "utility"])
        for index, total in enumerate(totals):
            writer.writerow([index, total])


@click.command()
@click.option(
    "--scenario",
    "scenario_path",
    required=True,
    type=click.Path(path_type=Path, dir_okay=False),
    help="Training scenario file.",
)
@click.option("--seed", required=True, type=int, help="Master training seed.")
@click.option(
    "--out",
    required=True,
    type=click.Path(path_type=Path, file_okay=False),
    help="Directory receiving the personality and learning curve.",
)
@click.option(
    "--set",
    "overrides",
    multiple=True,
    metavar="KEY=VALUE",
    help="Override a training setting, e.g. --set iterations=50.",
)
@click.option("--id", "personality_id", help="Id of the trained personality.")
@click.option(
    "--baseline",
    default=0,
    type=click.IntRange(min=0),
    help="Also evaluate this many random personalities.",
)
def train(
    scenario_path: Path,
    seed: int,
    out: Path,
    overrides: Tuple[str, ...],
    personality_id: Optional[str],
    baseline: int,
) -> None:
    """Train a mission personality with reinforcement learning."""
    run_preflight_checks(
        [InputFileCheck(scenario_path, "scenario"), OutputDirCheck(out)], console
    )
    log.setup_logging(out / "autosim.log")

    scenario_step = LoadScenarioStep(
        scenario_path, list(overrides) + [f"training.seed={seed}"]
    )
    run_plan([scenario_step], console, error=ScenarioInvalid)

    train_step = TrainStep(scenario_step, personality_id)
    baseline_step = BaselineStep(scenario_step, baseline)
    run_plan([train_step, baseline_step], console)

    personality = train_step.personality
    personality_path = out / f"{personality.id}.personality"
    curve_path = out / "learning_curve.csv"
    try:
        save_personality(personality, personality_path)
        write_learning_curve(train_step.curve, curve_path)
        if baseline_step.totals:
            _write_baseline(baseline_step.totals, out / "baseline.csv")
    except OSError as e:
        raise AutosimException(f"Cannot write training outputs: {e}")

    console.print(_summary(train_step.curve, baseline_step.totals))
    console.print(f"[green]Personality written to {personality_path}[/green]")
    console.print(f"[green]Learning curve written to {curve_path}[/green]")
