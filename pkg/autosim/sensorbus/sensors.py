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

"""Simulated sensors.

Every sensor output is already semantically transformed: a contact is a
typed record (position, speed, heading, type, classification), never a raw
signal. Camera, LIDAR and FLIR returns are folded into radar contacts.
"""

import logging
import math
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from autosim import utils
from autosim.sensorbus.records import (
    ContactReport,
    HealthReport,
    NavReport,
    PerfReport,
    SensorBusError,
    SensorCategory,
    SensorRecord,
    WarningKind,
    WarningReport,
)
from autosim.simworld.state import AssetState, WorldState
from autosim.statemap.entity import EntityKind

LOG = logging.getLogger(__name__)


class SensorSuite(BaseModel):
    """Sensor fit of one asset."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    radar_range: float = Field(default=5000.0, ge=0.0)
    radar_noise_std: float = Field(default=5.0, ge=0.0)
    rwr_enabled: bool = True
    maws_enabled: bool = True
    health_noise_std: float = Field(default=0.01, ge=0.0)
    bearing_noise_std: float = Field(default=0.02, ge=0.0)
    nav_noise_std: float = Field(default=0.0, ge=0.0)


def _clip01(value: float) -> float:
    return min(1.0, max(0.0, value))


def _contacts(world: WorldState, asset: AssetState) -> List[ContactReport]:
    """Ground-truth contacts for every non-self object, in id order."""
    contacts = []
    for other in world.assets:
        if other.id != asset.id and other.alive:
            contacts.append(
                ContactReport(
                    entity_id=other.id,
                    position=other.position,
                    speed=other.speed,
                    heading=other.heading,
                    object_type=EntityKind.ALLIED.value,
                    classification="ally",
                )
            )
    for hostile in world.hostiles:
        if hostile.alive:
            contacts.append(
                ContactReport(
                    entity_id=hostile.id,
                    position=hostile.position,
                    speed=hostile.max_speed,
                    heading=hostile.heading,
                    object_type=EntityKind.HOSTILE.value,
                    classification=hostile.classification,
                )
            )
    for site in world.sam_sites:
        contacts.append(
            ContactReport(
                entity_id=site.id,
                position=site.position,
                speed=0.0,
                heading=0.0,
                object_type=EntityKind.HOSTILE.value,
                classification="SAM",
                neutralized=site.neutralized,
            )
        )
    for entity in world.targets + world.zones + world.obstacles:
        contacts.append(
            ContactReport(
                entity_id=entity.id,
                position=entity.position,
                speed=math.hypot(*entity.velocity),
                heading=entity.heading,
                object_type=entity.kind.value,
                classification=entity.classification,
                neutralized=entity.neutralized,
                radius=entity.radius,
            )
        )
    contacts.sort(key=lambda c: c.entity_id)
    return contacts


def _internal_reports(
    world: WorldState, asset: AssetState, suite: SensorSuite, rng: np.random.Generator
) -> Tuple[HealthReport, PerfReport, NavReport]:
    speed_frac = asset.speed / asset.max_speed
    damage = 1.0 - asset.health
    h_noise = rng.normal(0.0, suite.health_noise_std, size=4)
    health = HealthReport(
        engine_vibration=_clip01(0.1 + 0.5 * speed_frac + 0.4 * damage + h_noise[0]),
        temperature=60.0 + 30.0 * speed_frac + 40.0 * damage + 10.0 * h_noise[1],
        pressure=101.325 * (1.0 - 0.05 * speed_frac) + 5.0 * h_noise[2],
    )
    perf = PerfReport(
        velocity=asset.speed,
        stress=_clip01(0.7 * abs(asset.last_heading_rate) + 0.3 * damage + h_noise[3]),
    )
    n_noise = rng.normal(0.0, suite.nav_noise_std, size=2)
    nav = NavReport(
        position_estimate=(
            asset.position[0] + n_noise[0],
            asset.position[1] + n_noise[1],
        ),
        wind=world.wind,
        attitude_ok=asset.health >= 0.25,
    )
    return health, perf, nav


def sense(
    world: WorldState, asset_id: str, suite: SensorSuite, rng: np.random.Generator
) -> List[SensorRecord]:
    """Produce one tick of sensor records for an asset.

    Always emits exactly one Health, Performance and Navigation record,
    then one ContactReport per object within radar range (position
    perturbed with Gaussian noise), one RWR warning while any SAM radar
    illuminates the asset and one MAW warning per missile tracking it.

    :param world: the pre-tick ground truth
    :param asset_id: the sensing asset
    :param suite: the asset's sensor fit
    :param rng: the asset's sensor stream
    :return: records with sequential record ids
    :raises: SensorBusError if the asset is unknown or dead
    """
    asset = world.asset(asset_id)
    if asset is None or not asset.alive:
        raise SensorBusError(f"asset {asset_id} is not alive in the world")

    tick = world.tick
    records: List[SensorRecord] = []

    def emit(category: SensorCategory, source: str, payload) -> None:
        records.append(
            SensorRecord(
                record_id=len(records),
                tick=tick,
                category=category,
                source=source,
                payload=payload,
            )
        )

    health, perf, nav = _internal_reports(world, asset, suite, rng)
    emit(SensorCategory.HEALTH, "engine", health)
    emit(SensorCategory.PERFORMANCE, "airdata", perf)
    emit(SensorCategory.NAVIGATION, "imu", nav)

    for contact in _contacts(world, asset):
        reach = utils.distance(asset.position, contact.position) - contact.radius
        if reach > suite.radar_range:
            continue
        noise = rng.normal(0.0, suite.radar_noise_std, size=2)
        noisy = contact.model_copy(
            update={
                "position": (
                    contact.position[0] + noise[0],
                    contact.position[1] + noise[1],
                )
            }
        )
        emit(SensorCategory.ENVIRONMENTAL_MAPPING, "radar", noisy)

    if suite.rwr_enabled:
        emitters = [s for s in world.sam_sites if s.illuminates(asset.position)]
        if emitters:
            emitters.sort(
                key=lambda s: (utils.distance(asset.position, s.position), s.id)
            )
            site = emitters[0]
            emit(
                SensorCategory.ENVIRONMENTAL_MAPPING,
                "rwr",
                WarningReport(
                    warning_kind=WarningKind.RWR,
                    bearing=utils.relative_bearing(
                        asset.position, asset.heading, site.position
                    ),
                    source_id=site.id,
                ),
            )

    if suite.maws_enabled:
        for missile in sorted(world.missiles, key=lambda m: m.id):
            if missile.target != asset.id:
                continue
            true_bearing = utils.relative_bearing(
                asset.position, asset.heading, missile.position
            )
            noisy_bearing = utils.angle_diff(
                true_bearing + rng.normal(0.0, suite.bearing_noise_std), 0.0
            )
            emit(
                SensorCategory.ENVIRONMENTAL_MAPPING,
                "maws",
                WarningReport(
                    warning_kind=WarningKind.MAW,
                    bearing=noisy_bearing,
                    source_id=missile.id,
                ),
            )

    LOG.debug(f"Asset {asset_id} sensed {len(records)} records at tick {tick}")
    return records
