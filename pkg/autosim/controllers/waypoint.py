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

"""Pure-pursuit waypoint following."""

from typing import List, Optional

from autosim import utils
from autosim.controllers.actions import ContinuousCommand, ControllerProposal
from autosim.controllers.base import (
    DEFAULT_GAIN,
    BaseController,
    ControllerContext,
    SelfState,
    steer_toward,
)


def pursuit_point(
    position: utils.Point, path: List[utils.Point], capture_radius: float
) -> Optional[utils.Point]:
    """The first path point farther than the capture radius, if any."""
    for point in path:
        if utils.distance(position, point) > capture_radius:
            return point
    return None


def waypoint_controller(
    self_state: SelfState,
    active_path: List[utils.Point],
    capture_radius: float = 100.0,
    gain: float = DEFAULT_GAIN,
    controller_id: str = "waypoint",
) -> ControllerProposal:
    """Steer toward the active path.

    heading_rate = clip(gain · bearing error); full speed en route and
    zero speed once the final point is captured.

    :raises: ValueError when the path is empty
    """
    if not active_path:
        raise ValueError("waypoint controller needs a non-empty path")
    goal = pursuit_point(self_state.position, active_path, capture_radius)
    if goal is None:
        command = ContinuousCommand(heading_rate=0.0, speed_cmd=0.0)
    else:
        command = ContinuousCommand(
            heading_rate=steer_toward(
                self_state.position, self_state.heading, goal, gain
            ),
            speed_cmd=1.0,
        )
    return ControllerProposal(
        controller_id=controller_id, continuous=command, confidence=1.0
    )


class WaypointController(BaseController):
    controller_id = "waypoint"

    def propose(self, ctx: ControllerContext) -> ControllerProposal:
        if not ctx.active_path:
            return self.abstain()
        return waypoint_controller(
            ctx.own,
            ctx.active_path,
            capture_radius=ctx.mission.capture_radius,
            gain=self.config.waypoint_gain,
            controller_id=self.controller_id,
        )
