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

"""Swarm formation keeping and re-tasking after the loss of an asset."""

import logging
import math
from typing import Dict, List, Optional, Sequence

from autosim import utils
from autosim.controllers.actions import (
    ChangeCourse,
    ContinuousCommand,
    ControllerProposal,
    ProposedAction,
)
from autosim.controllers.base import (
    DEFAULT_GAIN,
    DEFAULT_ROLES,
    BaseController,
    ControllerContext,
    SwarmRole,
    steer_toward,
)
from autosim.statemap.entity import EntityKind, StateMap

LOG = logging.getLogger(__name__)

FORMATION_CONFIDENCE = 0.5
ALONE_CONFIDENCE = 0.2


def survivors(state_map: StateMap, stale_ticks: int) -> List[str]:
    """The asset plus every ally heard from within the last stale_ticks."""
    cutoff = state_map.tick - stale_ticks
    alive = [state_map.own_id]
    for ally in state_map.of_kind(EntityKind.ALLIED):
        if ally.last_update_tick >= cutoff and not ally.neutralized:
            alive.append(ally.id)
    return sorted(alive)


def assign_roles(
    asset_ids: Sequence[str], roles: Sequence[SwarmRole]
) -> Dict[str, Optional[SwarmRole]]:
    """Assets sorted by id take roles sorted by descending priority.

    Assets beyond the number of roles get no role.
    """
    ranked = sorted(roles, key=lambda r: (-r.priority, r.name))
    assignment = {}
    for index, asset_id in enumerate(sorted(asset_ids)):
        assignment[asset_id] = ranked[index] if index < len(ranked) else None
    return assignment


def slot_position(
    state_map: StateMap, members: Sequence[str], role: SwarmRole, radius: float
) -> utils.Point:
    """The role's point on the ring around the members' centroid."""
    points = [state_map.entities[m].position for m in members]
    cx = sum(p[0] for p in points) / len(points)
    cy = sum(p[1] for p in points) / len(points)
    return (cx + radius * math.cos(role.angle), cy + radius * math.sin(role.angle))


def swarm_controller(
    state_map: StateMap,
    roster: Sequence[str] = (),
    roles: Sequence[SwarmRole] = DEFAULT_ROLES,
    formation_radius: float = 300.0,
    stale_ticks: int = 10,
    gain: float = DEFAULT_GAIN,
    justification: Optional[int] = None,
    controller_id: str = "swarm",
) -> ControllerProposal:
    """Hold the assigned formation slot.

    roster is the set of members that were flying at the previous tick.
    When a member has gone stale the survivors are re-tasked and a
    ChangeCourse to the new slot is proposed, cited by `justification`
    (the tick's navigation record).
    """
    own = state_map.self_entity
    members = survivors(state_map, stale_ticks)
    assignment = assign_roles(members, roles)
    role = assignment[own.id]
    if role is None:
        return ControllerProposal(
            controller_id=controller_id,
            continuous=ContinuousCommand(heading_rate=0.0, speed_cmd=1.0),
            confidence=0.0,
        )

    slot = slot_position(state_map, members, role, formation_radius)
    gap = utils.distance(own.position, slot)
    speed = 1.0 if formation_radius <= 0.0 else min(1.0, gap / formation_radius)
    command = ContinuousCommand(
        heading_rate=steer_toward(own.position, own.heading, slot, gain),
        speed_cmd=speed,
    )

    discrete = []
    lost = sorted(set(roster) - set(members))
    if lost and justification is not None:
        LOG.debug(
            f"{own.id}: lost {', '.join(lost)}, re-tasked as {role.name} "
            f"among {', '.join(members)}"
        )
        discrete.append(
            ProposedAction(
                action=ChangeCourse(new_path=[slot]), justifications=[justification]
            )
        )

    confidence = FORMATION_CONFIDENCE if len(members) > 1 else ALONE_CONFIDENCE
    return ControllerProposal(
        controller_id=controller_id,
        continuous=command,
        discrete=discrete,
        confidence=confidence,
    )


class SwarmController(BaseController):
    controller_id = "swarm"

    def propose(self, ctx: ControllerContext) -> ControllerProposal:
        nav = ctx.snapshot.nav
        return swarm_controller(
            ctx.state_map,
            roster=ctx.own.roster,
            roles=self.config.roles,
            formation_radius=self.config.formation_radius,
            stale_ticks=ctx.stale_ticks,
            gain=self.config.waypoint_gain,
            justification=nav.record_id if nav is not None else None,
            controller_id=self.controller_id,
        )
