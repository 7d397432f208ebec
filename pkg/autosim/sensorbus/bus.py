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

"""The sensor bus: one immutable snapshot per asset per tick.

Every consumer (controllers, ensembler, action filter, ledger writer)
reads the same snapshot, so they all observe the identical record list.
"""

import math
from typing import Iterable, List, Optional, Tuple

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
from autosim.statemap.entity import Bounds, EntityKind

HEALTH_FIELDS = 3
PERF_FIELDS = 2
NAV_FIELDS = 4
WARNING_FIELDS = 2
CONTACT_FIELDS = 6


class BusSnapshot(BaseModel):
    """The records published on one asset's bus at one tick."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    tick: int = Field(ge=0)
    asset: str = ""
    records: Tuple[SensorRecord, ...] = ()

    def record(self, record_id: int) -> Optional[SensorRecord]:
        for record in self.records:
            if record.record_id == record_id:
                return record
        return None

    def records_for(self, record_ids: Iterable[int]) -> List[SensorRecord]:
        wanted = set(record_ids)
        return [r for r in self.records if r.record_id in wanted]

    def of_category(self, category: SensorCategory) -> List[SensorRecord]:
        return [r for r in self.records if r.category == category]

    def contacts(self) -> List[SensorRecord]:
        return [r for r in self.records if isinstance(r.payload, ContactReport)]

    def warnings(self, kind: Optional[WarningKind] = None) -> List[SensorRecord]:
        return [
            r
            for r in self.records
            if isinstance(r.payload, WarningReport)
            and (kind is None or r.payload.warning_kind == kind)
        ]

    def _first(self, payload_type) -> Optional[SensorRecord]:
        for record in self.records:
            if isinstance(record.payload, payload_type):
                return record
        return None

    @property
    def health(self) -> Optional[SensorRecord]:
        return self._first(HealthReport)

    @property
    def perf(self) -> Optional[SensorRecord]:
        return self._first(PerfReport)

    @property
    def nav(self) -> Optional[SensorRecord]:
        return self._first(NavReport)

    def replay_record(self) -> dict:
        """Line-delimited replay form: {tick, asset, records}."""
        return {
            "type": "bus",
            "tick": self.tick,
            "asset": self.asset,
            "records": [r.model_dump(mode="json") for r in self.records],
        }


def publish(tick_records: Iterable[SensorRecord], asset: str = "") -> BusSnapshot:
    """Freeze one tick of records into a snapshot ordered by record id.

    :raises: SensorBusError when the records span several ticks or repeat
             a record id
    """
    records = sorted(tick_records, key=lambda r: r.record_id)
    ticks = {r.tick for r in records}
    if len(ticks) > 1:
        raise SensorBusError(
            f"records from several ticks published together: {sorted(ticks)}"
        )
    ids = [r.record_id for r in records]
    if len(set(ids)) != len(ids):
        raise SensorBusError("duplicate record ids published")
    tick = ticks.pop() if ticks else 0
    return BusSnapshot(tick=tick, asset=asset, records=tuple(records))


class EnvLayout(BaseModel):
    """Layout of the environment vector Eᵗ."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    contact_slots: int = Field(default=4, ge=0)
    bounds: Bounds
    range_scale: float = Field(default=5000.0, gt=0.0)
    speed_scale: float = Field(default=300.0, gt=0.0)
    wind_scale: float = Field(default=30.0, gt=0.0)

    @property
    def length(self) -> int:
        return (
            HEALTH_FIELDS
            + PERF_FIELDS
            + NAV_FIELDS
            + WARNING_FIELDS
            + self.contact_slots * CONTACT_FIELDS
        )


def _clip(value: float, low: float = -1.0, high: float = 1.0) -> float:
    return min(high, max(low, value))


def build_env_vector(snapshot: BusSnapshot, layout: EnvLayout) -> np.ndarray:
    """Fixed-length environment vector for the ensembler.

    [health(3), perf(2), nav(4), rwr flag, maw flag, C contact slots × 6];
    contacts fill slots nearest first (ties by record id), relative to the
    navigation position estimate. Absent fields stay zero.
    """
    vector = np.zeros(layout.length, dtype=np.float64)

    health = snapshot.health
    if health is not None:
        vector[0:3] = (
            health.payload.engine_vibration,
            _clip(health.payload.temperature / 100.0, 0.0, 2.0),
            _clip(health.payload.pressure / 101.325, 0.0, 2.0),
        )
    perf = snapshot.perf
    if perf is not None:
        vector[3:5] = (
            _clip(perf.payload.velocity / layout.speed_scale, 0.0, 1.0),
            perf.payload.stress,
        )
    origin = (0.0, 0.0)
    nav = snapshot.nav
    if nav is not None:
        origin = nav.payload.position_estimate
        x, y = layout.bounds.normalize(origin)
        vector[5:9] = (
            x,
            y,
            _clip(math.hypot(*nav.payload.wind) / layout.wind_scale, 0.0, 1.0),
            1.0 if nav.payload.attitude_ok else 0.0,
        )
    if snapshot.warnings(WarningKind.RWR):
        vector[9] = 1.0
    if snapshot.warnings(WarningKind.MAW):
        vector[10] = 1.0

    contacts = snapshot.contacts()
    contacts.sort(
        key=lambda r: (utils.distance(origin, r.payload.position), r.record_id)
    )
    base = HEALTH_FIELDS + PERF_FIELDS + NAV_FIELDS + WARNING_FIELDS
    scale = layout.range_scale
    for slot, record in enumerate(contacts[: layout.contact_slots]):
        contact = record.payload
        offset = base + slot * CONTACT_FIELDS
        vector[offset : offset + CONTACT_FIELDS] = (
            1.0,
            _clip((contact.position[0] - origin[0]) / scale),
            _clip((contact.position[1] - origin[1]) / scale),
            _clip(contact.speed * math.cos(contact.heading) / layout.speed_scale),
            _clip(contact.speed * math.sin(contact.heading) / layout.speed_scale),
            1.0 if contact.object_type == EntityKind.HOSTILE.value else 0.0,
        )
    return vector
