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

import enum
from typing import Literal, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class SensorBusError(Exception):
    """Base exception for the sensor bus."""

    pass


class SensorCategory(str, enum.Enum):
    """Sensor taxonomy: internal (health, performance), external (nav, mapping)."""

    HEALTH = "Health"
    PERFORMANCE = "Performance"
    NAVIGATION = "Navigation"
    ENVIRONMENTAL_MAPPING = "EnvironmentalMapping"


class WarningKind(str, enum.Enum):
    RWR = "RWR"
    MAW = "MAW"


class _Report(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ContactReport(_Report):
    """Semantic radar contact: what was seen, where, and how it moves."""

    report: Literal["contact"] = "contact"
    entity_id: str
    position: Tuple[float, float]
    speed: float = Field(ge=0.0)
    heading: float
    object_type: str
    classification: str = ""
    neutralized: bool = False
    radius: float = Field(default=0.0, ge=0.0)


class HealthReport(_Report):
    report: Literal["health"] = "health"
    engine_vibration: float = Field(ge=0.0, le=1.0)
    temperature: float
    pressure: float


class PerfReport(_Report):
    report: Literal["perf"] = "perf"
    velocity: float = Field(ge=0.0)
    stress: float = Field(ge=0.0, le=1.0)


class NavReport(_Report):
    report: Literal["nav"] = "nav"
    position_estimate: Tuple[float, float]
    wind: Tuple[float, float] = (0.0, 0.0)
    attitude_ok: bool = True


class WarningReport(_Report):
    """RWR illumination or missile approach warning.

    The bearing is relative to the asset's heading, in (-π, π].
    """

    report: Literal["warning"] = "warning"
    warning_kind: WarningKind
    bearing: float
    source_id: str = ""


Payload = Union[ContactReport, HealthReport, PerfReport, NavReport, WarningReport]

PAYLOAD_CATEGORY = {
    "contact": SensorCategory.ENVIRONMENTAL_MAPPING,
    "warning": SensorCategory.ENVIRONMENTAL_MAPPING,
    "health": SensorCategory.HEALTH,
    "perf": SensorCategory.PERFORMANCE,
    "nav": SensorCategory.NAVIGATION,
}


class SensorRecord(BaseModel):
    """One semantically transformed sensor output."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    record_id: int = Field(ge=0)
    tick: int = Field(ge=0)
    category: SensorCategory
    source: str
    payload: Payload = Field(discriminator="report")

    @model_validator(mode="after")
    def _category_matches_payload(self):
        expected = PAYLOAD_CATEGORY[self.payload.report]
        if self.category != expected:
            raise ValueError(
                f"{self.payload.report} payload requires category "
                f"{expected.value}, got {self.category.value}"
            )
        return self
