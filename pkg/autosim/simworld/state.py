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

"""Ground truth of the simulated world."""

import math
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from autosim.statemap.entity import Bounds, Entity, EntityKind


class AssetState(BaseModel):
    """One friendly air vehicle."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str = Field(min_length=1)
    position: Tuple[float, float]
    heading: float = 0.0
    speed: float = Field(default=0.0, ge=0.0)
    max_speed: float = Field(gt=0.0)
    max_turn: float = Field(gt=0.0)
    health: float = Field(default=1.0, ge=0.0, le=1.0)
    fuel: float = Field(default=3600.0, ge=0.0)
    weapons: int = Field(default=0, ge=0)
    countermeasures: int = Field(default=0, ge=0)
    alive: bool = True
    terminated: bool = False
    death_tick: Optional[int] = None
    # mission progress and memory carried between ticks
    next_waypoint: int = Field(default=0, ge=0)
    route: List[Tuple[float, float]] = []
    engaged: List[str] = []
    roster: List[str] = []
    last_heading_rate: float = 0.0

    @model_validator(mode="after")
    def _speed_within_cap(self):
        if self.speed > self.max_speed:
            raise ValueError(
                f"asset {self.id} speed {self.speed} exceeds max {self.max_speed}"
            )
        return self

    @property
    def active(self) -> bool:
        """Alive and still flying the mission."""
        return self.alive and not self.terminated


class HostileState(BaseModel):
    """A pursuing interceptor."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str = Field(min_length=1)
    position: Tuple[float, float]
    heading: float = 0.0
    max_speed: float = Field(gt=0.0)
    max_turn: float = Field(gt=0.0)
    classification: str = "interceptor"
    engage_radius: float = Field(default=150.0, ge=0.0)
    damage: float = Field(default=0.25, ge=0.0, le=1.0)
    alive: bool = True

    @property
    def velocity(self) -> Tuple[float, float]:
        return (
            self.max_speed * math.cos(self.heading),
            self.max_speed * math.sin(self.heading),
        )


class SamSite(BaseModel):
    """Surface-to-air site: a search radar that locks on and launches."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str = Field(min_length=1)
    position: Tuple[float, float]
    radar_range: float = Field(ge=0.0)
    missile_speed: float = Field(gt=0.0)
    lock_ticks: int = Field(default=5, ge=1)
    fuse_radius: float = Field(default=50.0, ge=0.0)
    missiles_left: int = Field(default=4, ge=0)
    lock_progress: Dict[str, int] = {}
    neutralized: bool = False

    def illuminates(self, position: Tuple[float, float]) -> bool:
        if self.neutralized:
            return False
        dx = position[0] - self.position[0]
        dy = position[1] - self.position[1]
        return math.hypot(dx, dy) <= self.radar_range


class Missile(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str
    launcher: str
    target: str
    position: Tuple[float, float]
    velocity: Tuple[float, float] = (0.0, 0.0)
    speed: float = Field(gt=0.0)
    fuse_radius: float = Field(ge=0.0)
    age: int = Field(default=0, ge=0)


class WorldEvent(BaseModel):
    """Something notable that happened during a step."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    tick: int
    kind: str
    subject: str
    detail: str = ""


class WorldState(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tick: int = Field(default=0, ge=0)
    bounds: Bounds
    wind: Tuple[float, float] = (0.0, 0.0)
    assets: List[AssetState]
    hostiles: List[HostileState] = []
    sam_sites: List[SamSite] = []
    missiles: List[Missile] = []
    targets: List[Entity] = []
    zones: List[Entity] = []
    obstacles: List[Entity] = []
    missile_seq: int = 0
    events: List[WorldEvent] = []

    @model_validator(mode="after")
    def _check_world(self):
        for asset in self.assets:
            if not self.bounds.contains(asset.position):
                raise ValueError(f"asset {asset.id} starts outside the world bounds")
        for entity in self.targets:
            if entity.kind != EntityKind.TARGET:
                raise ValueError(f"target {entity.id} must have kind Target")
        for entity in self.zones:
            if entity.kind != EntityKind.NO_FLY_ZONE:
                raise ValueError(f"zone {entity.id} must have kind NoFlyZone")
        for entity in self.obstacles:
            if entity.kind != EntityKind.OBSTACLE:
                raise ValueError(f"obstacle {entity.id} must have kind Obstacle")
        return self

    def asset(self, asset_id: str) -> Optional[AssetState]:
        for asset in self.assets:
            if asset.id == asset_id:
                return asset
        return None

    def active_assets(self) -> List[AssetState]:
        return sorted((a for a in self.assets if a.active), key=lambda a: a.id)

    def target(self, target_id: str) -> Optional[Entity]:
        for target in self.targets:
            if target.id == target_id:
                return target
        return None

    def sam_site(self, site_id: str) -> Optional[SamSite]:
        for site in self.sam_sites:
            if site.id == site_id:
                return site
        return None
