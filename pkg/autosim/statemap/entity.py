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

"""Per-asset world model.

A StateMap is an immutable snapshot of everything one asset believes about
the world. Updates never mutate a map; they return a new one, so snapshots
can be shared read-only between concurrently running episodes.
"""

import enum
import logging
import math
from typing import Dict, List, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from autosim import utils

LOG = logging.getLogger(__name__)


class StateMapError(Exception):
    """Base exception for state map failures."""

    pass


class MalformedObservation(StateMapError):
    """Raised when an observation cannot be applied to a state map."""

    pass


class EntityKind(str, enum.Enum):
    """The kinds of entity tracked by a state map.

    The declaration order is the slot order of the vector encoding.
    """

    SELF_ASSET = "SelfAsset"
    ALLIED = "Allied"
    HOSTILE = "Hostile"
    TARGET = "Target"
    NO_FLY_ZONE = "NoFlyZone"
    OBSTACLE = "Obstacle"
    WAYPOINT = "Waypoint"


class Bounds(BaseModel):
    """Axis aligned box of the local planar frame, in meters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @model_validator(mode="after")
    def _non_degenerate(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("bounds must have positive width and height")
        return self

    def contains(self, point: utils.Point) -> bool:
        return (
            self.x_min <= point[0] <= self.x_max
            and self.y_min <= point[1] <= self.y_max
        )

    def clamp(self, point: utils.Point) -> utils.Point:
        return (
            min(self.x_max, max(self.x_min, point[0])),
            min(self.y_max, max(self.y_min, point[1])),
        )

    def normalize(self, point: utils.Point) -> utils.Point:
        """Map a point into [-1, 1] relative to the box."""
        x = 2.0 * (point[0] - self.x_min) / (self.x_max - self.x_min) - 1.0
        y = 2.0 * (point[1] - self.y_min) / (self.y_max - self.y_min) - 1.0
        return (min(1.0, max(-1.0, x)), min(1.0, max(-1.0, y)))

    def translated(self, dx: float, dy: float) -> "Bounds":
        return Bounds(
            x_min=self.x_min + dx,
            y_min=self.y_min + dy,
            x_max=self.x_max + dx,
            y_max=self.y_max + dy,
        )


class Entity(BaseModel):
    """One tracked object: the asset itself, an ally, a threat, a zone..."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str = Field(min_length=1)
    kind: EntityKind
    position: Tuple[float, float]
    velocity: Tuple[float, float] = (0.0, 0.0)
    heading: float = 0.0
    classification: str = ""
    priority: float = Field(default=0.0, ge=0.0, le=1.0)
    neutralized: bool = False
    last_update_tick: int = Field(default=0, ge=0)
    author: str = ""
    radius: float = Field(default=0.0, ge=0.0)

    @field_validator("heading")
    @classmethod
    def _wrap_heading(cls, value: float) -> float:
        if math.isfinite(value):
            return utils.wrap_angle(value)
        return value

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.position + self.velocity) and (
            math.isfinite(self.heading)
        )

    def supersedes(self, other: "Entity") -> bool:
        """Last-writer-wins ordering.

        (last_update_tick, author) decides; the serialized content only
        breaks ties between two different writes carrying the same tick and
        author, so that merging is independent of arrival order.
        """
        mine = (self.last_update_tick, self.author)
        theirs = (other.last_update_tick, other.author)
        if mine != theirs:
            return mine > theirs
        return self.model_dump_json() > other.model_dump_json()


class StateMap(BaseModel):
    """An asset's world picture at a tick."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    own_id: str = Field(min_length=1)
    tick: int = Field(default=0, ge=0)
    entities: Dict[str, Entity]

    @model_validator(mode="after")
    def _check_invariants(self):
        selves = [e for e in self.entities.values() if e.kind == EntityKind.SELF_ASSET]
        if len(selves) != 1 or selves[0].id != self.own_id:
            raise ValueError(
                f"state map for {self.own_id} must hold exactly one SelfAsset "
                f"entity with that id"
            )
        for key, entity in self.entities.items():
            if key != entity.id:
                raise ValueError(f"entity key {key} does not match id {entity.id}")
            if entity.last_update_tick > self.tick:
                raise ValueError(
                    f"entity {key} updated at tick {entity.last_update_tick} "
                    f"after map tick {self.tick}"
                )
        return self

    @property
    def self_entity(self) -> Entity:
        return self.entities[self.own_id]

    def get(self, entity_id: str):
        return self.entities.get(entity_id)

    def of_kind(self, kind: EntityKind) -> List[Entity]:
        """Entities of one kind, in id order."""
        return sorted(
            (e for e in self.entities.values() if e.kind == kind), key=lambda e: e.id
        )


def new_state_map(own: Entity, tick: int = 0) -> StateMap:
    """Creates a map holding only the asset itself."""
    if own.kind != EntityKind.SELF_ASSET:
        raise StateMapError(f"entity {own.id} is not a SelfAsset")
    return StateMap(
        own_id=own.id, tick=max(tick, own.last_update_tick), entities={own.id: own}
    )


def _check_observation(state_map: StateMap, obs: Entity) -> None:
    if not obs.id:
        raise MalformedObservation("observation has an empty id")
    if not obs.is_finite():
        raise MalformedObservation(
            f"observation {obs.id} from {obs.author or 'unknown'} has a "
            f"non-finite position, velocity or heading"
        )
    if obs.kind == EntityKind.SELF_ASSET and obs.id != state_map.own_id:
        raise MalformedObservation(
            f"SelfAsset observation {obs.id} does not belong to {state_map.own_id}"
        )
    if obs.id == state_map.own_id and obs.kind != EntityKind.SELF_ASSET:
        raise MalformedObservation(
            f"observation {obs.id} would replace the asset's own entity"
        )


def _with_entity(state_map: StateMap, obs: Entity) -> StateMap:
    entities = dict(state_map.entities)
    entities[obs.id] = obs
    return state_map.model_copy(
        update={
            "entities": entities,
            "tick": max(state_map.tick, obs.last_update_tick),
        }
    )


def upsert_entity(state_map: StateMap, obs: Entity) -> StateMap:
    """Apply one observation with last-writer-wins semantics.

    A new id is always inserted. An existing entity is replaced only when
    the observation is strictly newer by (last_update_tick, author); stale
    observations leave the map unchanged.

    :param state_map: the map to update
    :param obs: the observation
    :return: the updated map (the same object when nothing changed)
    :raises: MalformedObservation for an empty id, non-finite data or an
             observation that would overwrite the asset's own entity
    """
    _check_observation(state_map, obs)
    existing = state_map.entities.get(obs.id)
    if existing is not None and not obs.supersedes(existing):
        return state_map
    return _with_entity(state_map, obs)


def replace_entity(state_map: StateMap, entity: Entity) -> StateMap:
    """Local authoritative write by the map's owner.

    Used for the owner's own bookkeeping (e.g. marking a target neutralized)
    where several writes to one entity can happen within one tick. Only the
    final version of each entity is published to the swarm.
    """
    _check_observation(state_map, entity)
    return _with_entity(state_map, entity)


def query_nearest(
    state_map: StateMap, kind: EntityKind, origin: utils.Point, k: int
) -> List[Entity]:
    """The k entities of a kind closest to origin.

    Results are ordered by ascending distance with ties broken by id.
    Neutralized targets are not returned when querying targets.
    """
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    if k == 0:
        return []
    candidates = [
        e
        for e in state_map.entities.values()
        if e.kind == kind and not (kind == EntityKind.TARGET and e.neutralized)
    ]
    candidates.sort(key=lambda e: (utils.distance(origin, e.position), e.id))
    return candidates[:k]
