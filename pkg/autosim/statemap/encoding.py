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

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from autosim import utils
from autosim.statemap.entity import Bounds, EntityKind, StateMap

FIELDS_PER_SLOT = 7


class MapEncodingLayout(BaseModel):
    """Fixed-width vector layout for a state map.

    Every kind gets `per_kind_slots` slots of 7 fields: present flag,
    normalized x and y, normalized vx and vy, priority and neutralized flag.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    per_kind_slots: int = Field(default=2, ge=0)
    fields_per_slot: Literal[7] = FIELDS_PER_SLOT
    bounds: Bounds
    velocity_scale: float = Field(default=300.0, gt=0.0)

    @property
    def length(self) -> int:
        return len(EntityKind) * self.per_kind_slots * self.fields_per_slot


def encode_state_map(state_map: StateMap, layout: MapEncodingLayout) -> np.ndarray:
    """Encode a map as the fixed-length vector fed to the ensembler.

    Per kind, the entities nearest the asset fill the slots in
    (distance, id) order; entities beyond the slot count are dropped and
    unused slots stay all zero.
    """
    vector = np.zeros(layout.length, dtype=np.float64)
    k = layout.per_kind_slots
    if k == 0:
        return vector

    origin = state_map.self_entity.position
    by_kind = {kind: [] for kind in EntityKind}
    for entity in state_map.entities.values():
        by_kind[entity.kind].append(entity)

    scale = layout.velocity_scale
    for kind_index, kind in enumerate(EntityKind):
        nearest = sorted(
            by_kind[kind], key=lambda e: (utils.distance(origin, e.position), e.id)
        )[:k]
        for slot, entity in enumerate(nearest):
            x, y = layout.bounds.normalize(entity.position)
            offset = (kind_index * k + slot) * FIELDS_PER_SLOT
            vector[offset : offset + FIELDS_PER_SLOT] = (
                1.0,
                x,
                y,
                max(-1.0, min(1.0, entity.velocity[0] / scale)),
                max(-1.0, min(1.0, entity.velocity[1] / scale)),
                entity.priority,
                1.0 if entity.neutralized else 0.0,
            )
    return vector
