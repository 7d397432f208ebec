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

"""Which sensor categories may justify which action."""

import types
from typing import FrozenSet, Iterable, Mapping

from autosim.controllers.actions import ActionKind
from autosim.sensorbus.records import SensorCategory

_H = SensorCategory.HEALTH
_P = SensorCategory.PERFORMANCE
_N = SensorCategory.NAVIGATION
_E = SensorCategory.ENVIRONMENTAL_MAPPING

PERMISSIONS: Mapping[ActionKind, FrozenSet[SensorCategory]] = types.MappingProxyType(
    {
        ActionKind.TERMINATE_MISSION: frozenset({_H, _P, _E}),
        ActionKind.UPDATE_MISSION_ACHIEVEMENT: frozenset({_E}),
        ActionKind.ADD_NEW_TARGET: frozenset({_E}),
        ActionKind.DEPRIORITIZE_TARGET: frozenset({_H, _E}),
        ActionKind.CHANGE_COURSE: frozenset({_H, _N, _E}),
        ActionKind.ADD_OBSTACLE: frozenset({_E}),
        ActionKind.ENGAGE_WEAPON_SYSTEM: frozenset({_E}),
        ActionKind.EVASIVE_MANEUVERS: frozenset({_E}),
        ActionKind.ENGAGE_COUNTERMEASURES: frozenset({_E}),
    }
)


def is_permitted(kind: ActionKind, category: SensorCategory) -> bool:
    return category in PERMISSIONS[kind]


def any_permitted(kind: ActionKind, categories: Iterable[SensorCategory]) -> bool:
    """At least one of the categories may justify the action."""
    return any(is_permitted(kind, c) for c in categories)
