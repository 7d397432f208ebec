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

"""Evasion on radar warning, missile approach warning or interceptor contact."""

import logging
import math
from typing import Optional

from autosim import utils
from autosim.controllers.actions import (
    ContinuousCommand,
    ControllerProposal,
    EngageCountermeasures,
    EvasiveManeuvers,
    ProposedAction,
)
from autosim.controllers.base import (
    DEFAULT_GAIN,
    BaseController,
    ControllerContext,
    abstain,
)
from autosim.sensorbus.bus import BusSnapshot
from autosim.sensorbus.records import WarningKind

LOG = logging.getLogger(__name__)

RWR_CONFIDENCE = 0.7
MAW_CONFIDENCE = 1.0
INTERCEPT_CONFIDENCE = 0.5


def perpendicular_away(bearing: float) -> float:
    """Relative heading that puts a threat at bearing b on the beam, away."""
    if bearing >= 0.0:
        return utils.angle_diff(bearing + math.pi / 2.0, 0.0)
    return utils.angle_diff(bearing - math.pi / 2.0, 0.0)


def hard_turn_away(bearing: float) -> float:
    """Full-rate turn away from a threat; dead ahead breaks right."""
    return -1.0 if bearing >= 0.0 else 1.0


def evasion_controller(
    snapshot: BusSnapshot,
    own_position: Optional[utils.Point] = None,
    own_heading: float = 0.0,
    gain: float = DEFAULT_GAIN,
    intercept_alert_range: float = 0.0,
    idle_speed_cmd: float = 0.5,
    controller_id: str = "evasion",
) -> ControllerProposal:
    """React to the threat warnings on the bus.

    A missile approach warning wins over a radar warning, which wins over
    an interceptor within the alert range.
    """
    maws = snapshot.warnings(WarningKind.MAW)
    if maws:
        ids = [r.record_id for r in maws]
        return ControllerProposal(
            controller_id=controller_id,
            continuous=ContinuousCommand(
                heading_rate=hard_turn_away(maws[0].payload.bearing), speed_cmd=1.0
            ),
            discrete=[
                ProposedAction(action=EvasiveManeuvers(), justifications=ids),
                ProposedAction(action=EngageCountermeasures(), justifications=ids),
            ],
            confidence=MAW_CONFIDENCE,
        )

    rwrs = snapshot.warnings(WarningKind.RWR)
    if rwrs:
        desired = perpendicular_away(rwrs[0].payload.bearing)
        return ControllerProposal(
            controller_id=controller_id,
            continuous=ContinuousCommand(
                heading_rate=min(1.0, max(-1.0, gain * desired)), speed_cmd=1.0
            ),
            discrete=[
                ProposedAction(
                    action=EvasiveManeuvers(),
                    justifications=[r.record_id for r in rwrs],
                )
            ],
            confidence=RWR_CONFIDENCE,
        )

    if own_position is not None and intercept_alert_range > 0.0:
        threats = [
            r
            for r in snapshot.contacts()
            if r.payload.classification == "interceptor"
            and utils.distance(own_position, r.payload.position)
            <= intercept_alert_range
        ]
        if threats:
            threats.sort(
                key=lambda r: (
                    utils.distance(own_position, r.payload.position),
                    r.record_id,
                )
            )
            nearest = threats[0]
            bearing = utils.relative_bearing(
                own_position, own_heading, nearest.payload.position
            )
            desired = utils.angle_diff(bearing + math.pi, 0.0)
            return ControllerProposal(
                controller_id=controller_id,
                continuous=ContinuousCommand(
                    heading_rate=min(1.0, max(-1.0, gain * desired)), speed_cmd=1.0
                ),
                discrete=[
                    ProposedAction(
                        action=EvasiveManeuvers(),
                        justifications=[nearest.record_id],
                    )
                ],
                confidence=INTERCEPT_CONFIDENCE,
            )

    return abstain(controller_id, idle_speed_cmd)


class EvasionController(BaseController):
    controller_id = "evasion"

    def propose(self, ctx: ControllerContext) -> ControllerProposal:
        return evasion_controller(
            ctx.snapshot,
            own_position=ctx.own.position,
            own_heading=ctx.own.heading,
            gain=self.config.evasion_gain,
            intercept_alert_range=self.config.intercept_alert_range,
            idle_speed_cmd=self.config.idle_speed_cmd,
            controller_id=self.controller_id,
        )
