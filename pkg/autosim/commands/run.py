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

import json
import logging
from pathlib import Path
from typing import List, Optional

import click
from rich.console import Console
from rich.status import Status

from autosim import log
from autosim.ensembler.network import EnsemblerError
from autosim.jobs.checks import InputFileCheck, OutputDirCheck, run_preflight_checks
from autosim.jobs.common import (
    BaseStep,
    Result,
    ResultType,
    ScenarioInvalid,
    run_plan,
)
from autosim.simworld.episode import EpisodeResult, published_ledger, run_episode
from autosim.simworld.replay import (
    metrics_rows,
    read_replay,
    write_metrics_csv,
    write_replay,
)
from autosim.simworld.scenario import (
    Scenario,
    ScenarioError,
    apply_overrides,
    parse_scenario,
    read_document,
)
from autosim.statemap.corpus import save_corpus
from autosim.swarmledger.chain import dump_chainset
from autosim.training.personality import (
    Personality,
    PersonalityError,
    load_personality,
)

LOG = logging.getLogger(__name__)
console = Console()


class LoadScenarioStep(BaseStep):
    """Parse and validate a scenario document, applying overrides."""

    def __init__(self, path: Path, overrides: Optional[List[str]] = None):
        super().__init__("Load scenario", f"Loading scenario {path}")
        self.path = path
        self.overrides = overrides or []
        self.scenario: Optional[Scenario] = None

    def run(self, status: Optional[Status] = None) -> Result:
        try:
            document = apply_overrides(read_document(self.path), self.overrides)
            self.scenario = parse_scenario(document)
        except ScenarioError as e:
            LOG.debug(f"Scenario {self.path} rejected: {e.problems}")
            return Result(ResultType.FAILED, f"{self.path}: {e}")
        return Result(ResultType.COMPLETED)


class LoadPersonalityStep(BaseStep):
    def __init__(self, path: Optional[Path], scenario_step: LoadScenarioStep):
        super().__init__("Load personality", f"Loading personality {path}")
        self.path = path
        self.scenario_step = scenario_step
        self.personality: Optional[Personality] = None

    def is_skip(self, status: Optional[Status] = None) -> bool:
        return self.path is None

    def run(self, status: Optional[Status] = None) -> Result:
        try:
            self.personality = load_personality(self.path)
        except PersonalityError as e:
            return Result(ResultType.FAILED, str(e))
        expected = self.scenario_step.scenario.mission.mission_type
        if self.personality.mission_type != expected:
            LOG.warning(
                f"Personality {self.personality.id} was trained for "
                f"{self.personality.mission_type} missions, scenario flies {expected}"
            )
        return Result(ResultType.COMPLETED)


class RunEpisodeStep(BaseStep):
    def __init__(
        self,
        scenario_step: LoadScenarioStep,
        personality_step: LoadPersonalityStep,
        seed: int,
    ):
        super().__init__("Run episode", f"Flying mission with seed {seed}")
        self.scenario_step = scenario_step
        self.personality_step = personality_step
        self.seed = seed
        self.result: Optional[EpisodeResult] = None

    def run(self, status: Optional[Status] = None) -> Result:
        scenario = self.scenario_step.scenario
        personality = self.personality_step.personality
        params = personality.params if personality else None
        record = None
        if personality is not None:
            record = personality.record(str(self.personality_step.path))
        try:
            self.result = run_episode(scenario, params, self.seed, personality=record)
        except EnsemblerError as e:
            return Result(ResultType.FAILED, f"Personality does not fit: {e}")
        return Result(ResultType.COMPLETED)


class WriteOutputsStep(BaseStep):
    """Replay log, audit log, metrics, utility, ledger and corpora."""

    def __init__(self, scenario_step: LoadScenarioStep, episode_step, out: Path):
        super().__init__("Write outputs", f"Writing outputs to {out}")
        self.scenario_step = scenario_step
        self.episode_step = episode_step
        self.out = out
        self.written: List[Path] = []

    def run(self, status: Optional[Status] = None) -> Result:
        outputs = self.scenario_step.scenario.outputs
        result = self.episode_step.result
        replay_path = self.out / outputs.replay
        write_replay(result.replay, replay_path)

        audit_path = self.out / outputs.audit
        result.audit.write_jsonl(audit_path)

        replay = read_replay(replay_path)
        metrics_path = self.out / outputs.metrics
        write_metrics_csv(metrics_rows(replay), replay.controllers, metrics_path)

        utility_path = self.out / outputs.utility
        document = {
            "ticks_used": result.ticks_used,
            "report": result.report.model_dump(mode="json"),
        }
        utility_path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")

        ledger_path = self.out / outputs.ledger
        dump_chainset(published_ledger(result.chains), ledger_path)

        corpus_dir = self.out / outputs.corpus_dir
        corpus_dir.mkdir(parents=True, exist_ok=True)
        for aid, corpus in sorted(result.corpora.items()):
            save_corpus(corpus, corpus_dir / f"{aid}.json")

        self.written = [replay_path, audit_path, metrics_path, utility_path]
        self.written.append(ledger_path)
        return Result(ResultType.COMPLETED)


@click.command()
@click.option(
    "--scenario",
    "scenario_path",
    required=True,
    type=click.Path(path_type=Path, dir_okay=False),
    help="Scenario file (JSON, or YAML by extension).",
)
@click.option("--seed", required=True, type=int, help="Master seed of the run.")
@click.option(
    "--personality",
    "personality_path",
    type=click.Path(path_type=Path, dir_okay=False),
    help="Trained personality to fly with.",
)
@click.option(
    "--out",
    required=True,
    type=click.Path(path_type=Path, file_okay=False),
    help="Directory receiving the run outputs.",
)
@click.option(
    "--ticks", type=click.IntRange(min=1), help="Override the mission's max_ticks."
)
def run(
    scenario_path: Path,
    seed: int,
    personality_path: Optional[Path],
    out: Path,
    ticks: Optional[int],
) -> None:
    """Fly one mission episode.

    Writes the replay log, audit log, metrics CSV, utility report, ledger
    dump and each asset's corpus into the output directory.
    """
    checks = [InputFileCheck(scenario_path, "scenario")]
    if personality_path is not None:
        checks.append(InputFileCheck(personality_path, "personality"))
    checks.append(OutputDirCheck(out))
    run_preflight_checks(checks, console)
    log.setup_logging(out / "autosim.log")

    overrides = [f"mission.max_ticks={ticks}"] if ticks else []
    scenario_step = LoadScenarioStep(scenario_path, overrides)
    run_plan([scenario_step], console, error=ScenarioInvalid)

    personality_step = LoadPersonalityStep(personality_path, scenario_step)
    episode_step = RunEpisodeStep(scenario_step, personality_step, seed)
    outputs_step = WriteOutputsStep(scenario_step, episode_step, out)
    run_plan([personality_step, episode_step, outputs_step], console)

    report = episode_step.result.report
    console.print(
        f"Mission {scenario_step.scenario.name} ended at tick "
        f"{episode_step.result.ticks_used}: utility [bold]{report.total:.4f}[/bold]"
    )
    for path in outputs_step.written:
        console.print(f"[green]Output file written to {path}[/green]")
