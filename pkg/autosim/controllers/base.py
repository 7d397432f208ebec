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

"""Common machinery of the controller bank."""

import logging
import math
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from autosim import utils
from autosim.controllers.actions import ContinuousCommand, ControllerProposal
from autosim.sensorbus.bus import BusSnapshot
from autosim.simworld.mission import MissionPlan
from autosim.simworld.state import AssetState
from autosim.statemap.entity import Bounds, StateMap

LOG = logging.getLogger(__name__)

DEFAULT_GAIN = 2.0 / math.pi


class SwarmRole(BaseModel):
    """A formation slot on the ring around the swarm centroid."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    priority: float = Field(ge=0.0, le=1.0)
    angle: float


DEFAULT_ROLES = [
    SwarmRole(name="lead", priority=1.0, angle=0.0),
    SwarmRole(name="left-wing", priority=0.8, angle=2.0 * math.pi / 3.0),
    SwarmRole(name="right-wing", priority=0.6, angle=4.0 * math.pi / 3.0),
    SwarmRole(name="trail", priority=0.4, angle=math.pi),
]

CONTROLLER_IDS = ("avoidance", "evasion", "swarm", "targeting", "waypoint")


class ControllersConfig(BaseModel):
    """The `controllers` section of a scenario."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    enabled: List[str] = list(CONTROLLER_IDS)
    idle_speed_cmd: float = Field(default=0.5, ge=0.0, le=1.0)
    # waypoint
    waypoint_gain: float = Field(default=DEFAULT_GAIN, gt=0.0)
    # avoidance
    avoidance_horizon: float = Field(default=2000.0, gt=0.0)
    avoidance_margin: float = Field(default=50.0, ge=0.0)
    cell_size: float = Field(default=100.0, gt=0.0)
    # evasion
    evasion_gain: float = Field(default=DEFAULT_GAIN, gt=0.0)
    intercept_alert_range: float = Field(default=1500.0, ge=0.0)
    # targeting
    weapon_range: float = Field(default=800.0, ge=0.0)
    threat_classes: List[str] = ["SAM"]
    new_target_priority: float = Field(default=0.5, ge=0.0, le=1.0)
    abort_vibration: float = Field(default=0.95, ge=0.0, le=1.0)
    abort_stress: float = Field(default=0.98, ge=0.0, le=1.0)
    # swarm
    formation_radius: float = Field(default=300.0, ge=0.0)
    roles: List[SwarmRole] = DEFAULT_ROLES

    @model_validator(mode="after")
    def _known_controllers(self):
        unknown = sorted(set(self.enabled) - set(CONTROLLER_IDS))
        if unknown:
            raise ValueError(f"unknown controllers: {', '.join(unknown)}")
        return self


class SelfState(BaseModel):
    """What an asset knows about itself when its controllers run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str
    position: Tuple[float, float]
    heading: float
    speed: float = 0.0
    max_speed: float = Field(gt=0.0)
    max_turn: float = Field(gt=0.0)
    weapons: int = 0
    countermeasures: int = 0
    engaged: List[str] = []
    roster: List[str] = []

    @classmethod
    def from_asset(
        cls, asset: AssetState, snapshot: Optional[BusSnapshot] = None
    ) -> "SelfState":
        """Own stores and heading from the asset, position from navigation."""
        position = asset.position
        if snapshot is not None and snapshot.nav is not None:
            position = snapshot.nav.payload.position_estimate
        return cls(
            id=asset.id,
            position=position,
            heading=asset.heading,
            speed=asset.speed,
            max_speed=asset.max_speed,
            max_turn=asset.max_turn,
            weapons=asset.weapons,
            countermeasures=asset.countermeasures,
            engaged=asset.engaged,
            roster=asset.roster,
        )


class ControllerContext(BaseModel):
    """Everything a controller may read during one tick."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    own: SelfState
    snapshot: BusSnapshot
    state_map: StateMap
    mission: MissionPlan
    bounds: Bounds
    active_path: List[Tuple[float, float]] = []
    # allies silent for longer than this are presumed lost
    stale_ticks: int = Field(default=10, ge=1)


def steer_toward(
    position: utils.Point, heading: float, goal: utils.Point, gain: float
) -> float:
    """Proportional heading_rate toward a point, clipped to [-1, 1]."""
    error = utils.relative_bearing(position, heading, goal)
    return min(1.0, max(-1.0, gain * error))


def abstain(controller_id: str, idle_speed_cmd: float) -> ControllerProposal:
    """A proposal with no opinion: straight on at idle speed, confidence 0."""
    return ControllerProposal(
        controller_id=controller_id,
        continuous=ContinuousCommand(heading_rate=0.0, speed_cmd=idle_speed_cmd),
        confidence=0.0,
    )


class BaseController:
    """A controller cₖ: reads the tick's context and proposes an action."""

    controller_id = ""

    def __init__(self, config: ControllersConfig):
        self.config = config

    def propose(self, ctx: ControllerContext) -> ControllerProposal:
        """Returns this controller's proposal for the tick.

        Controllers are pure: the same context always gives the same
        proposal.
        """
        raise NotImplementedError

    def abstain(self) -> ControllerProposal:
        return abstain(self.controller_id, self.config.idle_speed_cmd)
