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

"""Mission plan and the utility function U."""

import logging
from typing import List, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from autosim.actionfilter.constraints import ConstraintSet
from autosim.simworld.state import WorldState

LOG = logging.getLogger(__name__)


class UtilityWeights(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    w_targets: float = Field(default=1.0, ge=0.0, allow_inf_nan=False)
    w_waypoints: float = Field(default=1.0, ge=0.0, allow_inf_nan=False)
    w_survival: float = Field(default=1.0, ge=0.0, allow_inf_nan=False)
    w_constraints: float = Field(default=1.0, ge=0.0, allow_inf_nan=False)
    w_time: float = Field(default=0.0, ge=0.0, allow_inf_nan=False)


class MissionTarget(BaseModel):
    """A briefed target and its priority."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str = Field(min_length=1)
    priority: float = Field(default=1.0, ge=0.0, le=1.0)


class MissionPlan(BaseModel):
    """The mission brief shared by every asset of the swarm."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mission_type: str = "strike"
    waypoints: List[Tuple[float, float]] = []
    target_list: List[MissionTarget] = []
    weights: UtilityWeights = UtilityWeights()
    constraints: ConstraintSet = ConstraintSet()
    max_ticks: int = Field(default=600, gt=0)
    capture_radius: float = Field(default=100.0, gt=0.0)
    rejection_normalizer: float = Field(default=10.0, gt=0.0)

    @model_validator(mode="after")
    def _unique_targets(self):
        ids = [t.id for t in self.target_list]
        if len(set(ids)) != len(ids):
            raise ValueError("target_list ids must be unique")
        return self

    @property
    def target_ids(self) -> List[str]:
        return [t.id for t in self.target_list]

    def priority_of(self, target_id: str) -> float:
        for target in self.target_list:
            if target.id == target_id:
                return target.priority
        return 0.0


class UtilityComponents(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    targets_frac: float = Field(ge=0.0, le=1.0)
    waypoints_frac: float = Field(ge=0.0, le=1.0)
    survival_frac: float = Field(ge=0.0, le=1.0)
    constraint_score: float = Field(ge=0.0, le=1.0)
    time_frac: float = Field(ge=0.0, le=1.0)


class UtilityReport(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    components: UtilityComponents
    total: float


class EpisodeHistory(BaseModel):
    """What compute_utility needs to know about a finished episode."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    initial: WorldState
    final: WorldState
    ticks_used: int = Field(ge=0)
    audit_rejections: int = Field(default=0, ge=0)


def _fraction(numerator: float, denominator: float) -> float:
    if denominator <= 0:
        return 0.0
    return min(1.0, max(0.0, numerator / denominator))


def neutralized_ids(world: WorldState) -> List[str]:
    ids = [t.id for t in world.targets if t.neutralized]
    ids += [s.id for s in world.sam_sites if s.neutralized]
    return sorted(ids)


def utility_components(history: EpisodeHistory, plan: MissionPlan) -> UtilityComponents:
    final = history.final
    briefed = set(plan.target_ids)
    hit = briefed.intersection(neutralized_ids(final))

    n_waypoints = len(plan.waypoints)
    captured = sum(min(a.next_waypoint, n_waypoints) for a in final.assets)
    n_assets = len(history.initial.assets)

    return UtilityComponents(
        targets_frac=_fraction(len(hit), len(briefed)),
        waypoints_frac=_fraction(captured, n_waypoints * n_assets),
        survival_frac=_fraction(sum(1 for a in final.assets if a.alive), n_assets),
        constraint_score=1.0
        - min(1.0, history.audit_rejections / plan.rejection_normalizer),
        time_frac=_fraction(history.ticks_used, plan.max_ticks),
    )


def compute_utility(history: EpisodeHistory, plan: MissionPlan) -> UtilityReport:
    """Weighted achievement of the mission.

    total = w_targets·targets + w_waypoints·waypoints + w_survival·survival
    + w_constraints·constraint_score − w_time·time_frac. Waypoints count
    per asset; surviving includes assets that terminated their mission.

    :param history: the finished episode
    :param plan: the mission the episode flew
    :return: the report with every component in [0, 1]
    """
    c = utility_components(history, plan)
    w = plan.weights
    total = (
        w.w_targets * c.targets_frac
        + w.w_waypoints * c.waypoints_frac
        + w.w_survival * c.survival_frac
        + w.w_constraints * c.constraint_score
        - w.w_time * c.time_frac
    )
    LOG.debug(f"Utility {total:.4f} from {c.model_dump()}")
    return UtilityReport(components=c, total=total)
