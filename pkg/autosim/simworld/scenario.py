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

"""Scenario documents: parsing, validation and the initial world."""

import json
import logging
from pathlib import Path
from typing import List, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from autosim import utils
from autosim.controllers.base import ControllersConfig
from autosim.sensorbus.bus import EnvLayout
from autosim.sensorbus.sensors import SensorSuite
from autosim.simworld.dynamics import EngagementConfig
from autosim.simworld.mission import MissionPlan
from autosim.simworld.state import AssetState, HostileState, SamSite, WorldState
from autosim.statemap.encoding import MapEncodingLayout
from autosim.statemap.entity import Bounds, Entity, EntityKind
from autosim.swarmledger.network import NetworkConfig
from autosim.training.config import TrainConfig

LOG = logging.getLogger(__name__)


class ScenarioError(Exception):
    """Raised when a scenario document is unreadable or invalid.

    `problems` holds (dotted field path, message) pairs.
    """

    def __init__(self, message: str, problems: List[Tuple[str, str]] = ()):
        super().__init__(message)
        self.problems = list(problems)


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class TargetSpec(_Section):
    id: str = Field(min_length=1)
    position: Tuple[float, float]
    classification: str = "target"
    radius: float = Field(default=0.0, ge=0.0)


class CircleSpec(_Section):
    id: str = Field(min_length=1)
    center: Tuple[float, float]
    radius: float = Field(gt=0.0)
    classification: str = ""


class WorldConfig(_Section):
    bounds: Bounds
    wind: Tuple[float, float] = (0.0, 0.0)
    targets: List[TargetSpec] = []
    zones: List[CircleSpec] = []
    obstacles: List[CircleSpec] = []
    engagement: EngagementConfig = EngagementConfig()


class AssetSpec(_Section):
    id: str = Field(min_length=1)
    position: Tuple[float, float]
    heading: float = 0.0
    max_speed: float = Field(default=250.0, gt=0.0)
    max_turn: float = Field(default=0.2, gt=0.0)
    fuel: float = Field(default=3600.0, ge=0.0)
    weapons: int = Field(default=2, ge=0)
    countermeasures: int = Field(default=4, ge=0)
    sensors: SensorSuite = SensorSuite()


class SamSpec(_Section):
    id: str = Field(min_length=1)
    position: Tuple[float, float]
    radar_range: float = Field(default=3000.0, ge=0.0)
    missile_speed: float = Field(default=600.0, gt=0.0)
    lock_ticks: int = Field(default=5, ge=1)
    fuse_radius: float = Field(default=50.0, ge=0.0)
    missiles: int = Field(default=4, ge=0)


class HostileSpec(_Section):
    id: str = Field(min_length=1)
    position: Tuple[float, float]
    heading: float = 0.0
    max_speed: float = Field(default=300.0, gt=0.0)
    max_turn: float = Field(default=0.25, gt=0.0)
    engage_radius: float = Field(default=150.0, ge=0.0)
    damage: float = Field(default=0.25, ge=0.0, le=1.0)


class EnsemblerConfig(_Section):
    d_h: int = Field(default=16, ge=1)
    delta_max: float = Field(default=0.25, ge=0.0)
    init_scale: float = Field(default=0.1, gt=0.0)
    map_slots: int = Field(default=2, ge=0)
    contact_slots: int = Field(default=4, ge=0)
    velocity_scale: float = Field(default=300.0, gt=0.0)
    range_scale: float = Field(default=5000.0, gt=0.0)


class OutputsConfig(_Section):
    replay: str = "replay.jsonl"
    audit: str = "audit.jsonl"
    metrics: str = "metrics.csv"
    utility: str = "utility.json"
    ledger: str = "ledger.json"
    corpus_dir: str = "corpus"


class Scenario(_Section):
    name: str = "scenario"
    world: WorldConfig
    assets: List[AssetSpec] = Field(min_length=1)
    sam_sites: List[SamSpec] = []
    hostiles: List[HostileSpec] = []
    mission: MissionPlan = MissionPlan()
    controllers: ControllersConfig = ControllersConfig()
    ensembler: EnsemblerConfig = EnsemblerConfig()
    training: TrainConfig = TrainConfig()
    network: NetworkConfig = NetworkConfig()
    outputs: OutputsConfig = OutputsConfig()

    @model_validator(mode="after")
    def _consistent(self):
        ids = (
            [a.id for a in self.assets]
            + [s.id for s in self.sam_sites]
            + [h.id for h in self.hostiles]
            + [t.id for t in self.world.targets]
            + [z.id for z in self.world.zones]
            + [o.id for o in self.world.obstacles]
        )
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise ValueError(f"duplicate object ids: {', '.join(duplicates)}")
        strikeable = {t.id for t in self.world.targets} | {
            s.id for s in self.sam_sites
        }
        unknown = [t for t in self.mission.target_ids if t not in strikeable]
        if unknown:
            raise ValueError(
                f"mission targets not in the world: {', '.join(sorted(unknown))}"
            )
        for asset in self.assets:
            if not self.world.bounds.contains(asset.position):
                raise ValueError(f"asset {asset.id} starts outside the world bounds")
        return self

    @property
    def asset_ids(self) -> List[str]:
        return sorted(a.id for a in self.assets)

    def suite(self, asset_id: str) -> SensorSuite:
        for asset in self.assets:
            if asset.id == asset_id:
                return asset.sensors
        raise KeyError(asset_id)

    def digest(self) -> str:
        return utils.digest(self.model_dump(mode="json"))

    def env_layout(self) -> EnvLayout:
        return EnvLayout(
            contact_slots=self.ensembler.contact_slots,
            bounds=self.world.bounds,
            range_scale=self.ensembler.range_scale,
            speed_scale=self.ensembler.velocity_scale,
        )

    def map_layout(self) -> MapEncodingLayout:
        return MapEncodingLayout(
            per_kind_slots=self.ensembler.map_slots,
            bounds=self.world.bounds,
            velocity_scale=self.ensembler.velocity_scale,
        )

    def initial_world(self) -> WorldState:
        roster = self.asset_ids
        return WorldState(
            tick=0,
            bounds=self.world.bounds,
            wind=self.world.wind,
            assets=[
                AssetState(
                    id=a.id,
                    position=a.position,
                    heading=utils.wrap_angle(a.heading),
                    max_speed=a.max_speed,
                    max_turn=a.max_turn,
                    fuel=a.fuel,
                    weapons=a.weapons,
                    countermeasures=a.countermeasures,
                    roster=roster,
                )
                for a in sorted(self.assets, key=lambda a: a.id)
            ],
            hostiles=[
                HostileState(**h.model_dump())
                for h in sorted(self.hostiles, key=lambda h: h.id)
            ],
            sam_sites=[
                SamSite(
                    id=s.id,
                    position=s.position,
                    radar_range=s.radar_range,
                    missile_speed=s.missile_speed,
                    lock_ticks=s.lock_ticks,
                    fuse_radius=s.fuse_radius,
                    missiles_left=s.missiles,
                )
                for s in sorted(self.sam_sites, key=lambda s: s.id)
            ],
            targets=[
                Entity(
                    id=t.id,
                    kind=EntityKind.TARGET,
                    position=t.position,
                    classification=t.classification,
                    priority=self.mission.priority_of(t.id),
                    radius=t.radius,
                )
                for t in sorted(self.world.targets, key=lambda t: t.id)
            ],
            zones=[_circle(z, EntityKind.NO_FLY_ZONE) for z in self.world.zones],
            obstacles=[_circle(o, EntityKind.OBSTACLE) for o in self.world.obstacles],
        )


def _circle(spec: CircleSpec, kind: EntityKind) -> Entity:
    return Entity(
        id=spec.id,
        kind=kind,
        position=spec.center,
        classification=spec.classification or kind.value,
        radius=spec.radius,
    )


def _problems(error: ValidationError) -> List[Tuple[str, str]]:
    problems = []
    for item in error.errors():
        path = ".".join(str(part) for part in item["loc"]) or "<root>"
        problems.append((path, item["msg"]))
    return problems


def parse_scenario(document: dict) -> Scenario:
    """Validate a scenario document.

    :raises: ScenarioError naming every offending field
    """
    try:
        return Scenario.model_validate(document)
    except ValidationError as e:
        problems = _problems(e)
        detail = "; ".join(f"{path}: {msg}" for path, msg in problems)
        raise ScenarioError(f"invalid scenario: {detail}", problems) from e


def read_document(path: Union[Path, str]) -> dict:
    """Read a JSON document, or YAML when the extension says so.

    :raises: FileNotFoundError for a missing file, ScenarioError when the
             text does not parse
    """
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            document = yaml.safe_load(text)
        else:
            document = json.loads(text)
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ScenarioError(f"{path} does not parse: {e}") from e
    if not isinstance(document, dict):
        raise ScenarioError(f"{path} must hold a mapping at the top level")
    return document


def load_scenario(path: Union[Path, str]) -> Scenario:
    scenario = parse_scenario(read_document(path))
    LOG.debug(f"Loaded scenario {scenario.name} ({scenario.digest()[:12]}) from {path}")
    return scenario


def apply_overrides(document: dict, overrides: List[str]) -> dict:
    """Apply `key=value` overrides to a scenario document.

    A bare key addresses the training section, a dotted key any section,
    e.g. `iterations=5` or `mission.max_ticks=200`. Values are read as
    YAML scalars.

    :raises: ScenarioError for malformed overrides
    """
    document = json.loads(json.dumps(document))
    for override in overrides:
        key, sep, raw = override.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ScenarioError(f"override {override!r} is not key=value")
        parts = key.split(".") if "." in key else ["training", key]
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as e:
            raise ScenarioError(f"override {key}: value does not parse: {e}") from e
        node = document
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ScenarioError(f"override {key}: {part} is not a section")
        node[parts[-1]] = value
        LOG.debug(f"Override {key} = {value!r}")
    return document
