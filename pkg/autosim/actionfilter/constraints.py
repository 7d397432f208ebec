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

"""Not-to-violate parameters gating the final action of an asset."""

from typing import Iterable, List, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from autosim import utils


class Circle(BaseModel):
    """A forbidden circular region, in meters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    center: Tuple[float, float]
    radius: float = Field(ge=0.0, allow_inf_nan=False)

    def contains(self, point: utils.Point) -> bool:
        return utils.distance(point, self.center) < self.radius

    def intersects_path(self, points: Iterable[utils.Point]) -> bool:
        return utils.polyline_intersects_circle(points, self.center, self.radius)


class ConstraintSet(BaseModel):
    """Hard limits applied to every action after the ensembler.

    max_speed_cmd and max_heading_rate are fractions of the asset's
    maximum speed and turn rate.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    max_speed_cmd: float = Field(default=1.0, ge=0.0, le=1.0)
    max_heading_rate: float = Field(default=1.0, ge=0.0, le=1.0)
    geofence: List[Circle] = []
    no_strike_ids: List[str] = []
    weapons_free: bool = True
    min_countermeasures_reserve: int = Field(default=0, ge=0)

    @field_validator("no_strike_ids")
    @classmethod
    def _sorted_unique(cls, value: List[str]) -> List[str]:
        return sorted(set(value))

    def is_no_strike(self, entity_id: str) -> bool:
        return entity_id in self.no_strike_ids

    def path_violates_geofence(self, points: Iterable[utils.Point]) -> bool:
        points = list(points)
        return any(circle.intersects_path(points) for circle in self.geofence)
