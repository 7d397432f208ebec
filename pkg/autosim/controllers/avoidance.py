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

"""Obstruction avoidance: project ahead, report new obstacles, replan."""

import logging
import math
from typing import List, Optional, Tuple

from autosim import utils
from autosim.controllers.actions import (
    AddObstacle,
    ChangeCourse,
    ContinuousCommand,
    ControllerProposal,
    ProposedAction,
)
from autosim.controllers.base import (
    DEFAULT_GAIN,
    BaseController,
    ControllerContext,
    SelfState,
    abstain,
    steer_toward,
)
from autosim.controllers.planner import NoPathError, PlanGrid, plan_path_astar
from autosim.controllers.waypoint import pursuit_point
from autosim.sensorbus.bus import BusSnapshot
from autosim.sensorbus.records import SensorRecord
from autosim.statemap.entity import Bounds, Entity, EntityKind, StateMap

LOG = logging.getLogger(__name__)

OBSTRUCTION_KINDS = (EntityKind.NO_FLY_ZONE, EntityKind.OBSTACLE)


def entry_distance(
    position: utils.Point, heading: float, center: utils.Point, radius: float
) -> Optional[float]:
    """Distance along the heading ray at which a circle is entered.

    :return: 0 when already inside, None when the ray misses the circle
    """
    dx = center[0] - position[0]
    dy = center[1] - position[1]
    if math.hypot(dx, dy) < radius:
        return 0.0
    along = dx * math.cos(heading) + dy * math.sin(heading)
    if along <= 0.0:
        return None
    across_sq = dx * dx + dy * dy - along * along
    if across_sq >= radius * radius:
        return None
    return along - math.sqrt(radius * radius - across_sq)


def sensed_obstructions(
    snapshot: BusSnapshot, state_map: StateMap
) -> List[Tuple[SensorRecord, Entity]]:
    """Zone and obstacle contacts on the bus, as map entities.

    Contacts the map does not hold yet are the newly sensed ones.
    """
    found = []
    kinds = {k.value for k in OBSTRUCTION_KINDS}
    for record in snapshot.contacts():
        contact = record.payload
        if contact.object_type not in kinds:
            continue
        entity = Entity(
            id=contact.entity_id,
            kind=EntityKind(contact.object_type),
            position=contact.position,
            classification=contact.classification,
            radius=contact.radius,
            last_update_tick=snapshot.tick,
            author=state_map.own_id,
        )
        found.append((record, entity))
    return found


def smooth_path(points: List[utils.Point]) -> List[utils.Point]:
    """Drop intermediate points lying on a straight run."""
    if len(points) <= 2:
        return list(points)
    kept = [points[0]]
    for prev, here, nxt in zip(points, points[1:], points[2:]):
        d1 = (here[0] - prev[0], here[1] - prev[1])
        d2 = (nxt[0] - here[0], nxt[1] - here[1])
        if abs(d1[0] * d2[1] - d1[1] * d2[0]) > 1e-9:
            kept.append(here)
    kept.append(points[-1])
    return kept


def replan(
    grid: PlanGrid, start: utils.Point, goal: utils.Point
) -> List[utils.Point]:
    """A* path between two points as cell centers, ending exactly at goal.

    :raises: NoPathError when no path exists
    """
    start_cell = grid.cell_of(start)
    goal_cell = grid.cell_of(goal)
    # the asset may already sit inside an inflated obstruction
    grid.blocked[start_cell] = False
    cells = plan_path_astar(grid, start_cell, goal_cell)
    points = [grid.center_of(cell) for cell in cells[1:]]
    if points:
        points[-1] = goal
    else:
        points = [goal]
    return smooth_path(points)


def avoidance_controller(
    self_state: SelfState,
    snapshot: BusSnapshot,
    state_map: StateMap,
    bounds: Bounds,
    active_path: Optional[List[utils.Point]] = None,
    capture_radius: float = 100.0,
    horizon: float = 2000.0,
    margin: float = 50.0,
    cell_size: float = 100.0,
    gain: float = DEFAULT_GAIN,
    idle_speed_cmd: float = 0.5,
    controller_id: str = "avoidance",
) -> ControllerProposal:
    """Keep the asset out of no-fly zones and obstacles.

    Newly sensed obstructions are reported with AddObstacle. When the
    straight projection over the horizon enters an obstruction inflated by
    the margin, a ChangeCourse with an A* path to the current goal is
    proposed, with confidence rising as the entry point gets closer.
    """
    sensed = sensed_obstructions(snapshot, state_map)
    new = [(r, e) for r, e in sensed if e.id not in state_map.entities]
    known = state_map.of_kind(EntityKind.NO_FLY_ZONE) + state_map.of_kind(
        EntityKind.OBSTACLE
    )
    obstructions = known + [e for _, e in new]
    records = {e.id: r for r, e in sensed}

    discrete = [
        ProposedAction(
            action=AddObstacle(
                obstacle_id=entity.id, center=entity.position, radius=entity.radius
            ),
            justifications=[record.record_id],
        )
        for record, entity in new
    ]

    hits = []
    for entity in obstructions:
        reach = entry_distance(
            self_state.position,
            self_state.heading,
            entity.position,
            entity.radius + margin,
        )
        if reach is not None and reach <= horizon:
            hits.append((reach, entity.id))
    if not hits:
        if not discrete:
            return abstain(controller_id, idle_speed_cmd)
        return ControllerProposal(
            controller_id=controller_id,
            continuous=ContinuousCommand(heading_rate=0.0, speed_cmd=idle_speed_cmd),
            discrete=discrete,
            confidence=0.0,
        )

    hits.sort()
    nearest = hits[0][0]
    urgency = 2.0 * (1.0 - nearest / horizon)
    confidence = min(1.0, max(0.0, urgency))

    goal = None
    if active_path:
        goal = pursuit_point(self_state.position, active_path, capture_radius)
    if goal is None:
        goal = bounds.clamp(
            (
                self_state.position[0] + horizon * math.cos(self_state.heading),
                self_state.position[1] + horizon * math.sin(self_state.heading),
            )
        )

    cited = [records[eid].record_id for _, eid in hits if eid in records]
    if not cited and snapshot.nav is not None:
        cited = [snapshot.nav.record_id]

    grid = PlanGrid.from_bounds(bounds, cell_size)
    for entity in obstructions:
        grid.block_circle(entity.position, entity.radius + margin)
    command = ContinuousCommand(heading_rate=0.0, speed_cmd=1.0)
    try:
        path = replan(grid, self_state.position, goal)
    except NoPathError:
        LOG.debug(f"{self_state.id}: no path around obstruction to {goal}")
        # no way through, turn off the projected line
        command = ContinuousCommand(heading_rate=1.0, speed_cmd=idle_speed_cmd)
    else:
        command = ContinuousCommand(
            heading_rate=steer_toward(
                self_state.position, self_state.heading, path[0], gain
            ),
            speed_cmd=1.0,
        )
        if cited:
            discrete.append(
                ProposedAction(
                    action=ChangeCourse(new_path=path), justifications=cited
                )
            )

    return ControllerProposal(
        controller_id=controller_id,
        continuous=command,
        discrete=discrete,
        confidence=confidence,
    )


class AvoidanceController(BaseController):
    controller_id = "avoidance"

    def propose(self, ctx: ControllerContext) -> ControllerProposal:
        return avoidance_controller(
            ctx.own,
            ctx.snapshot,
            ctx.state_map,
            ctx.bounds,
            active_path=ctx.active_path,
            capture_radius=ctx.mission.capture_radius,
            horizon=self.config.avoidance_horizon,
            margin=self.config.avoidance_margin,
            cell_size=self.config.cell_size,
            gain=self.config.waypoint_gain,
            idle_speed_cmd=self.config.idle_speed_cmd,
            controller_id=self.controller_id,
        )
