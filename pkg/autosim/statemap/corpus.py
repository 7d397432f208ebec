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

"""The Cognitive Corpus: an asset's mission, map, limits and history."""

import logging
from pathlib import Path
from typing import List, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from autosim.actionfilter.constraints import ConstraintSet
from autosim.simworld.mission import MissionPlan, UtilityReport
from autosim.statemap.entity import StateMap, StateMapError

LOG = logging.getLogger(__name__)


class CorpusError(StateMapError):
    """Raised for out-of-order history or unreadable corpus files."""

    pass


class PerformanceEntry(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tick: int = Field(ge=0)
    report: UtilityReport


class PersonalityRecord(BaseModel):
    """Registry entry for a personality the asset can load."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str
    mission_type: str
    scenario_digest: str = ""
    final_mean_utility: float = 0.0
    path: str = ""


class CognitiveCorpus(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mission: MissionPlan
    state_map: StateMap
    constraints: ConstraintSet = ConstraintSet()
    performance_log: List[PerformanceEntry] = []
    personalities: List[PersonalityRecord] = []

    @model_validator(mode="after")
    def _log_strictly_increasing(self):
        ticks = [entry.tick for entry in self.performance_log]
        if any(b <= a for a, b in zip(ticks, ticks[1:])):
            raise ValueError("performance_log ticks must be strictly increasing")
        return self


def new_corpus(mission: MissionPlan, state_map: StateMap) -> CognitiveCorpus:
    return CognitiveCorpus(
        mission=mission, state_map=state_map, constraints=mission.constraints
    )


def corpus_record_performance(
    corpus: CognitiveCorpus, tick: int, report: UtilityReport
) -> CognitiveCorpus:
    """Append a utility report.

    :raises: CorpusError unless tick is later than the last recorded tick
    """
    log = corpus.performance_log
    if log and tick <= log[-1].tick:
        raise CorpusError(
            f"performance at tick {tick} does not follow tick {log[-1].tick}"
        )
    entry = PerformanceEntry(tick=tick, report=report)
    return corpus.model_copy(update={"performance_log": log + [entry]})


def register_personality(
    corpus: CognitiveCorpus, record: PersonalityRecord
) -> CognitiveCorpus:
    kept = [p for p in corpus.personalities if p.id != record.id]
    return corpus.model_copy(update={"personalities": kept + [record]})


def save_corpus(corpus: CognitiveCorpus, path: Union[Path, str]) -> None:
    Path(path).write_text(corpus.model_dump_json(indent=2) + "\n")


def load_corpus(path: Union[Path, str]) -> CognitiveCorpus:
    """:raises: CorpusError when the file is not a valid corpus"""
    try:
        return CognitiveCorpus.model_validate_json(Path(path).read_text())
    except ValidationError as e:
        raise CorpusError(f"{path} is not a valid corpus: {e}") from e
