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

"""Actions that controllers propose and the ensembler emits."""

import enum
from typing import Annotated, List, Literal, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from autosim.statemap.entity import Entity


class ActionKind(str, enum.Enum):
    """The discrete mission actions, in mask/logit order."""

    TERMINATE_MISSION = "TerminateMission"
    UPDATE_MISSION_ACHIEVEMENT = "UpdateMissionAchievement"
    ADD_NEW_TARGET = "AddNewTarget"
    DEPRIORITIZE_TARGET = "DeprioritizeTarget"
    CHANGE_COURSE = "ChangeCourse"
    ADD_OBSTACLE = "AddObstacle"
    ENGAGE_WEAPON_SYSTEM = "EngageWeaponSystem"
    EVASIVE_MANEUVERS = "EvasiveManeuvers"
    ENGAGE_COUNTERMEASURES = "EngageCountermeasures"

    @property
    def index(self) -> int:
        return ACTION_KINDS.index(self)


class _Action(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    @property
    def action_kind(self) -> ActionKind:
        return ActionKind(self.kind)


class TerminateMission(_Action):
    kind: Literal["TerminateMission"] = "TerminateMission"


class UpdateMissionAchievement(_Action):
    kind: Literal["UpdateMissionAchievement"] = "UpdateMissionAchievement"
    target_id: str


class AddNewTarget(_Action):
    kind: Literal["AddNewTarget"] = "AddNewTarget"
    entity: Entity


class DeprioritizeTarget(_Action):
    kind: Literal["DeprioritizeTarget"] = "DeprioritizeTarget"
    target_id: str


class ChangeCourse(_Action):
    kind: Literal["ChangeCourse"] = "ChangeCourse"
    new_path: List[Tuple[float, float]] = Field(min_length=1)


class AddObstacle(_Action):
    kind: Literal["AddObstacle"] = "AddObstacle"
    obstacle_id: str
    center: Tuple[float, float]
    radius: float = Field(ge=0.0)


class EngageWeaponSystem(_Action):
    kind: Literal["EngageWeaponSystem"] = "EngageWeaponSystem"
    target_id: str


class EvasiveManeuvers(_Action):
    kind: Literal["EvasiveManeuvers"] = "EvasiveManeuvers"


class EngageCountermeasures(_Action):
    kind: Literal["EngageCountermeasures"] = "EngageCountermeasures"


DiscreteAction = Annotated[
    Union[
        TerminateMission,
        UpdateMissionAchievement,
        AddNewTarget,
        DeprioritizeTarget,
        ChangeCourse,
        AddObstacle,
        EngageWeaponSystem,
        EvasiveManeuvers,
        EngageCountermeasures,
    ],
    Field(discriminator="kind"),
]

ACTION_KINDS = tuple(ActionKind)
N_ACTIONS = len(ACTION_KINDS)


class ContinuousCommand(BaseModel):
    """Normalized flight command.

    heading_rate is a fraction of the maximum turn rate, speed_cmd a
    fraction of the maximum speed.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    heading_rate: float = Field(default=0.0, ge=-1.0, le=1.0)
    speed_cmd: float = Field(default=0.0, ge=0.0, le=1.0)

    @classmethod
    def clipped(cls, heading_rate: float, speed_cmd: float) -> "ContinuousCommand":
        return cls(
            heading_rate=min(1.0, max(-1.0, float(heading_rate))),
            speed_cmd=min(1.0, max(0.0, float(speed_cmd))),
        )


class ProposedAction(BaseModel):
    """A discrete action together with the records that justify it."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    action: DiscreteAction
    justifications: List[int] = Field(min_length=1)

    @property
    def kind(self) -> ActionKind:
        return self.action.action_kind


class ControllerProposal(BaseModel):
    """One controller's suggested action for this tick.

    The proposal-level justifications are always the union of the records
    cited by its discrete actions and any extra records given explicitly.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    controller_id: str
    continuous: ContinuousCommand
    discrete: List[ProposedAction] = []
    confidence: float = Field(default=0.0, ge=0.0, le=1.0)
    justifications: List[int] = []

    @model_validator(mode="before")
    @classmethod
    def _collect_justifications(cls, data):
        if not isinstance(data, dict):
            return data
        cited = set(data.get("justifications") or [])
        for proposed in data.get("discrete") or []:
            if isinstance(proposed, ProposedAction):
                cited.update(proposed.justifications)
            else:
                cited.update(proposed.get("justifications", []))
        return {**data, "justifications": sorted(cited)}

    def kinds(self) -> List[ActionKind]:
        return sorted({p.kind for p in self.discrete}, key=lambda k: k.index)

    def of_kind(self, kind: ActionKind) -> List[ProposedAction]:
        return [p for p in self.discrete if p.kind == kind]

    def mask(self) -> List[float]:
        """9-bit discrete mask in ActionKind order."""
        kinds = {p.kind for p in self.discrete}
        return [1.0 if kind in kinds else 0.0 for kind in ACTION_KINDS]


class EmittedAction(BaseModel):
    """A discrete action in the ensembler's output, with its provenance."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    action: DiscreteAction
    controllers: List[str] = Field(min_length=1)
    justifications: List[int] = []

    @property
    def kind(self) -> ActionKind:
        return self.action.action_kind


class ActionVector(BaseModel):
    """The unified action Aᵗ: continuous command plus discrete actions."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    continuous: ContinuousCommand
    discrete: List[EmittedAction] = []

    def kinds(self) -> List[ActionKind]:
        return [e.kind for e in self.discrete]

    def has(self, kind: ActionKind) -> bool:
        return any(e.kind == kind for e in self.discrete)

    def of_kind(self, kind: ActionKind) -> List[EmittedAction]:
        return [e for e in self.discrete if e.kind == kind]
