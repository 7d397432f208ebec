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

"""Target list upkeep and weapon employment."""

import logging
from typing import List, Optional

from autosim import utils
from autosim.controllers.actions import (
    AddNewTarget,
    ContinuousCommand,
    ControllerProposal,
    DeprioritizeTarget,
    EngageWeaponSystem,
    ProposedAction,
    TerminateMission,
    UpdateMissionAchievement,
)
from autosim.controllers.base import BaseController, ControllerContext, SelfState
from autosim.sensorbus.bus import BusSnapshot
from autosim.sensorbus.records import SensorRecord
from autosim.simworld.mission import MissionPlan
from autosim.statemap.entity import Entity, EntityKind, StateMap

LOG = logging.getLogger(__name__)

ACTIVE_CONFIDENCE = 0.8


def _contact_index(snapshot: BusSnapshot) -> dict:
    return {r.payload.entity_id: r for r in snapshot.contacts()}


def primaries_done(state_map: StateMap, mission: MissionPlan) -> bool:
    """True once every briefed target is marked neutralized in the map."""
    for target_id in mission.target_ids:
        entity = state_map.get(target_id)
        if entity is None or not entity.neutralized:
            return False
    return True


def _new_target(record: SensorRecord, owner: str, priority: float) -> Entity:
    contact = record.payload
    return Entity(
        id=contact.entity_id,
        kind=EntityKind.TARGET,
        position=contact.position,
        classification=contact.classification,
        priority=priority,
        radius=contact.radius,
        last_update_tick=record.tick,
        author=owner,
    )


def targeting_controller(
    state_map: StateMap,
    snapshot: BusSnapshot,
    mission: MissionPlan,
    self_state: Optional[SelfState] = None,
    weapon_range: float = 800.0,
    threat_classes: List[str] = ("SAM",),
    new_target_priority: float = 0.5,
    abort_vibration: float = 0.95,
    abort_stress: float = 0.98,
    idle_speed_cmd: float = 0.5,
    controller_id: str = "targeting",
) -> ControllerProposal:
    """Maintain the target list and pick what to shoot.

    - TerminateMission when engine vibration or airframe stress exceed
      their abort thresholds.
    - AddNewTarget for threat contacts not on the target list, and for
      unbriefed target contacts once every briefed target is neutralized.
    - DeprioritizeTarget for listed targets seen neutralized or on the
      no-strike list.
    - UpdateMissionAchievement when a target this asset engaged is seen
      neutralized.
    - EngageWeaponSystem on the highest priority target in weapon range.
    """
    discrete: List[ProposedAction] = []
    owner = state_map.own_id
    origin = self_state.position if self_state else state_map.self_entity.position
    engaged = set(self_state.engaged) if self_state else set()
    weapons = self_state.weapons if self_state else 0

    abort = []
    health = snapshot.health
    if health is not None and health.payload.engine_vibration > abort_vibration:
        abort.append(health.record_id)
    perf = snapshot.perf
    if perf is not None and perf.payload.stress > abort_stress:
        abort.append(perf.record_id)
    if abort:
        discrete.append(
            ProposedAction(action=TerminateMission(), justifications=abort)
        )

    contacts = _contact_index(snapshot)
    listed = {e.id: e for e in state_map.of_kind(EntityKind.TARGET)}
    briefed = set(mission.target_ids)

    secondary_open = primaries_done(state_map, mission)
    for entity_id, record in sorted(contacts.items()):
        contact = record.payload
        if entity_id in listed or entity_id in briefed or contact.neutralized:
            continue
        is_threat = (
            contact.object_type == EntityKind.HOSTILE.value
            and contact.classification in threat_classes
        )
        is_secondary = contact.object_type == EntityKind.TARGET.value and (
            secondary_open
        )
        if is_threat or is_secondary:
            discrete.append(
                ProposedAction(
                    action=AddNewTarget(
                        entity=_new_target(record, owner, new_target_priority)
                    ),
                    justifications=[record.record_id],
                )
            )

    candidates = []
    for target_id, target in sorted(listed.items()):
        record = contacts.get(target_id)
        if record is None:
            continue
        seen_down = record.payload.neutralized
        no_strike = mission.constraints.is_no_strike(target_id)
        if (seen_down or no_strike) and target.priority > 0.0:
            discrete.append(
                ProposedAction(
                    action=DeprioritizeTarget(target_id=target_id),
                    justifications=[record.record_id],
                )
            )
        if seen_down and target_id in engaged and not target.neutralized:
            discrete.append(
                ProposedAction(
                    action=UpdateMissionAchievement(target_id=target_id),
                    justifications=[record.record_id],
                )
            )
        if seen_down or no_strike or target.neutralized or target.priority <= 0.0:
            continue
        if utils.distance(origin, record.payload.position) <= weapon_range:
            candidates.append((-target.priority, target_id, record.record_id))

    if candidates and weapons > 0:
        candidates.sort()
        _, target_id, record_id = candidates[0]
        discrete.append(
            ProposedAction(
                action=EngageWeaponSystem(target_id=target_id),
                justifications=[record_id],
            )
        )

    return ControllerProposal(
        controller_id=controller_id,
        continuous=ContinuousCommand(heading_rate=0.0, speed_cmd=idle_speed_cmd),
        discrete=discrete,
        confidence=ACTIVE_CONFIDENCE if discrete else 0.0,
    )


class TargetingController(BaseController):
    controller_id = "targeting"

    def propose(self, ctx: ControllerContext) -> ControllerProposal:
        config = self.config
        return targeting_controller(
            ctx.state_map,
            ctx.snapshot,
            ctx.mission,
            self_state=ctx.own,
            weapon_range=config.weapon_range,
            threat_classes=config.threat_classes,
            new_target_priority=config.new_target_priority,
            abort_vibration=config.abort_vibration,
            abort_stress=config.abort_stress,
            idle_speed_cmd=config.idle_speed_cmd,
            controller_id=self.controller_id,
        )
