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

"""Deterministic world dynamics, one second per step."""

import logging
import math
from typing import Dict, List, Mapping, Optional, Set

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from autosim import utils
from autosim.controllers.actions import ActionKind, ActionVector
from autosim.simworld.mission import MissionPlan
from autosim.simworld.state import (
    AssetState,
    HostileState,
    Missile,
    SamSite,
    WorldEvent,
    WorldState,
)

LOG = logging.getLogger(__name__)

DT = 1.0


class EngagementConfig(BaseModel):
    """Weapon and threat constants of the world."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    p_kill: float = Field(default=0.8, ge=0.0, le=1.0)
    p_hit: float = Field(default=0.7, ge=0.0, le=1.0)
    weapon_range: float = Field(default=800.0, ge=0.0)
    missile_lifetime: int = Field(default=30, ge=1)
    evasion_breaks_lock: bool = True


def active_path(asset: AssetState, mission: Optional[MissionPlan]) -> List[utils.Point]:
    """Points the asset is flying now.

    A route override wins over the remaining mission waypoints.
    """
    if asset.route:
        return list(asset.route)
    if mission is None:
        return []
    return list(mission.waypoints[asset.next_waypoint :])


class _Step:
    """Mutable working copy of one world step."""

    def __init__(self, world: WorldState, rng: np.random.Generator):
        self.world = world
        self.rng = rng
        self.tick = world.tick + 1
        self.assets: Dict[str, dict] = {a.id: a.model_dump() for a in world.assets}
        self.targets = {t.id: t for t in world.targets}
        self.sites: Dict[str, dict] = {s.id: s.model_dump() for s in world.sam_sites}
        self.events: List[WorldEvent] = []
        self.countermeasures_fired: Set[str] = set()
        self.evading: Set[str] = set()
        self.missile_seq = world.missile_seq

    def event(self, kind: str, subject: str, detail: str = "") -> None:
        self.events.append(
            WorldEvent(tick=self.tick, kind=kind, subject=subject, detail=detail)
        )

    def active(self, asset_id: str) -> bool:
        asset = self.assets[asset_id]
        return asset["alive"] and not asset["terminated"]

    def kill(self, asset_id: str, cause: str) -> None:
        asset = self.assets[asset_id]
        if not asset["alive"]:
            return
        asset.update(alive=False, health=0.0, speed=0.0, death_tick=self.tick)
        self.event("asset-killed", asset_id, cause)
        LOG.debug(f"Tick {self.tick}: {asset_id} killed by {cause}")


def _fly(asset: dict, action: ActionVector, bounds) -> None:
    command = action.continuous
    heading = utils.wrap_angle(
        asset["heading"] + command.heading_rate * asset["max_turn"] * DT
    )
    burn = min(asset["fuel"], command.speed_cmd * DT)
    speed = command.speed_cmd * asset["max_speed"] if asset["fuel"] > 0.0 else 0.0
    x = asset["position"][0] + speed * DT * math.cos(heading)
    y = asset["position"][1] + speed * DT * math.sin(heading)
    asset.update(
        heading=heading,
        speed=speed,
        fuel=asset["fuel"] - burn,
        position=bounds.clamp((x, y)),
        last_heading_rate=command.heading_rate,
    )


def _engage(step: _Step, asset: dict, target_id: str, config: EngagementConfig):
    if asset["weapons"] <= 0:
        return
    asset["weapons"] -= 1
    if target_id not in asset["engaged"]:
        asset["engaged"] = asset["engaged"] + [target_id]

    target = step.targets.get(target_id)
    site = step.sites.get(target_id)
    if target is not None:
        position, down = target.position, target.neutralized
    elif site is not None:
        position, down = site["position"], site["neutralized"]
    else:
        step.event("weapon-miss", asset["id"], f"{target_id} unknown")
        return
    if down or utils.distance(asset["position"], position) > config.weapon_range:
        step.event("weapon-miss", asset["id"], f"{target_id} out of reach")
        return
    if step.rng.random() < config.p_hit:
        if target is not None:
            step.targets[target_id] = target.model_copy(update={"neutralized": True})
        else:
            site["neutralized"] = True
        step.event("target-neutralized", target_id, f"by {asset['id']}")
    else:
        step.event("weapon-miss", asset["id"], f"{target_id} survived")


def _apply_actions(
    step: _Step,
    actions: Mapping[str, ActionVector],
    config: EngagementConfig,
    mission: Optional[MissionPlan],
) -> None:
    for asset_id in sorted(step.assets):
        asset = step.assets[asset_id]
        action = actions.get(asset_id)
        if not step.active(asset_id):
            asset["speed"] = 0.0
            continue
        if action is None:
            continue
        if action.has(ActionKind.TERMINATE_MISSION):
            asset.update(terminated=True, speed=0.0)
            step.event("mission-terminated", asset_id)
            continue

        _fly(asset, action, step.world.bounds)

        if action.has(ActionKind.EVASIVE_MANEUVERS):
            step.evading.add(asset_id)
        fires = action.has(ActionKind.ENGAGE_COUNTERMEASURES)
        if fires and asset["countermeasures"] > 0:
            asset["countermeasures"] -= 1
            step.countermeasures_fired.add(asset_id)
        for emitted in action.of_kind(ActionKind.CHANGE_COURSE):
            asset["route"] = list(emitted.action.new_path)
        for emitted in action.of_kind(ActionKind.ENGAGE_WEAPON_SYSTEM):
            _engage(step, asset, emitted.action.target_id, config)

        if mission is not None:
            _capture(step, asset, mission)


def _capture(step: _Step, asset: dict, mission: MissionPlan) -> None:
    position = asset["position"]
    index = asset["next_waypoint"]
    if index < len(mission.waypoints):
        point = mission.waypoints[index]
        if utils.distance(position, point) <= mission.capture_radius:
            asset["next_waypoint"] = index + 1
            step.event("waypoint-captured", asset["id"], str(index))
    route = asset["route"]
    while route and utils.distance(position, route[0]) <= mission.capture_radius:
        route = route[1:]
    asset["route"] = route


def _turn_toward(heading: float, desired: float, max_turn: float) -> float:
    delta = utils.angle_diff(desired, heading)
    delta = max(-max_turn * DT, min(max_turn * DT, delta))
    return utils.wrap_angle(heading + delta)


def _move_hostiles(step: _Step) -> List[HostileState]:
    moved = []
    for hostile in sorted(step.world.hostiles, key=lambda h: h.id):
        if not hostile.alive:
            moved.append(hostile)
            continue
        prey = [a for a in sorted(step.assets) if step.active(a)]
        if not prey:
            moved.append(hostile)
            continue
        prey.sort(
            key=lambda a: (
                utils.distance(hostile.position, step.assets[a]["position"]),
                a,
            )
        )
        target = step.assets[prey[0]]
        heading = _turn_toward(
            hostile.heading,
            utils.bearing(hostile.position, target["position"]),
            hostile.max_turn,
        )
        position = step.world.bounds.clamp(
            (
                hostile.position[0] + hostile.max_speed * DT * math.cos(heading),
                hostile.position[1] + hostile.max_speed * DT * math.sin(heading),
            )
        )
        if utils.distance(position, target["position"]) <= hostile.engage_radius:
            health = max(0.0, target["health"] - hostile.damage)
            target["health"] = health
            step.event("asset-hit", target["id"], f"by {hostile.id}")
            if health <= 0.0:
                step.kill(target["id"], hostile.id)
        moved.append(
            hostile.model_copy(update={"position": position, "heading": heading})
        )
    return moved


def _radar_and_launch(
    step: _Step, missiles: List[Missile], config: EngagementConfig
) -> List[Missile]:
    seq = step.missile_seq
    in_flight = {(m.launcher, m.target) for m in missiles}
    launched = []
    for site_id in sorted(step.sites):
        site = step.sites[site_id]
        radar = SamSite(**site)
        progress = dict(site["lock_progress"])
        for asset_id in sorted(step.assets):
            asset = step.assets[asset_id]
            lit = step.active(asset_id) and radar.illuminates(asset["position"])
            if not lit or (site_id, asset_id) in in_flight:
                progress.pop(asset_id, None)
                continue
            if config.evasion_breaks_lock and asset_id in step.evading:
                progress[asset_id] = 0
                continue
            progress[asset_id] = progress.get(asset_id, 0) + 1
            if progress[asset_id] >= site["lock_ticks"] and site["missiles_left"] > 0:
                missile_id = f"m{seq}"
                seq += 1
                site["missiles_left"] -= 1
                progress[asset_id] = 0
                launched.append(
                    Missile(
                        id=missile_id,
                        launcher=site_id,
                        target=asset_id,
                        position=site["position"],
                        speed=site["missile_speed"],
                        fuse_radius=site["fuse_radius"],
                    )
                )
                step.event("missile-launched", missile_id, f"{site_id} at {asset_id}")
        site["lock_progress"] = progress
    step.missile_seq = seq
    return launched


def _fly_missiles(
    step: _Step, missiles: List[Missile], config: EngagementConfig
) -> List[Missile]:
    survivors = []
    for missile in sorted(missiles, key=lambda m: m.id):
        target = step.assets.get(missile.target)
        if target is None or not step.active(missile.target):
            step.event("missile-lost", missile.id)
            continue
        aim = target["position"]
        gap = utils.distance(missile.position, aim)
        if gap <= missile.speed * DT:
            position = aim
            velocity = (0.0, 0.0)
        else:
            ux = (aim[0] - missile.position[0]) / gap
            uy = (aim[1] - missile.position[1]) / gap
            velocity = (missile.speed * ux, missile.speed * uy)
            position = (
                missile.position[0] + velocity[0] * DT,
                missile.position[1] + velocity[1] * DT,
            )
        if utils.distance(position, aim) <= missile.fuse_radius:
            p_kill = config.p_kill
            if missile.target in step.countermeasures_fired:
                p_kill /= 2.0
            if step.rng.random() < p_kill:
                step.kill(missile.target, missile.id)
            else:
                step.event("missile-defeated", missile.id, missile.target)
            continue
        age = missile.age + 1
        if age >= config.missile_lifetime:
            step.event("missile-expired", missile.id)
            continue
        survivors.append(
            missile.model_copy(
                update={"position": position, "velocity": velocity, "age": age}
            )
        )
    return survivors


def step(
    world: WorldState,
    actions: Mapping[str, ActionVector],
    rng: np.random.Generator,
    config: EngagementConfig = EngagementConfig(),
    mission: Optional[MissionPlan] = None,
) -> WorldState:
    """Advance the world by one tick.

    Assets act in id order, then interceptors pursue, SAM radars build
    lock and launch, and missiles fly and detonate. Actions of dead or
    terminated assets are ignored.

    :param world: the world at tick t
    :param actions: filtered action per asset
    :param rng: the world's random stream (hits and kills)
    :param config: engagement constants
    :param mission: the mission, for waypoint capture
    :return: the world at tick t + 1
    """
    work = _Step(world, rng)
    _apply_actions(work, actions, config, mission)
    hostiles = _move_hostiles(work)
    missiles = _fly_missiles(work, list(world.missiles), config)
    missiles += _radar_and_launch(work, missiles, config)
    return WorldState(
        tick=work.tick,
        bounds=world.bounds,
        wind=world.wind,
        assets=[AssetState(**work.assets[a.id]) for a in world.assets],
        hostiles=hostiles,
        sam_sites=[SamSite(**work.sites[s.id]) for s in world.sam_sites],
        missiles=sorted(missiles, key=lambda m: m.id),
        targets=[work.targets[t.id] for t in world.targets],
        zones=world.zones,
        obstacles=world.obstacles,
        missile_seq=work.missile_seq,
        events=work.events,
    )
