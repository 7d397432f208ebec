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

"""The hard gate between the ensembler and the airframe.

The filter never aborts: it clamps the continuous command, drops discrete
actions that lack a permitted justification or break a constraint, and
records every verdict in the audit trail.
"""

import enum
import json
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict

from autosim.actionfilter.constraints import ConstraintSet
from autosim.actionfilter.permissions import PERMISSIONS, any_permitted
from autosim.controllers.actions import (
    ActionKind,
    ActionVector,
    ContinuousCommand,
    DiscreteAction,
    EmittedAction,
)
from autosim.sensorbus.bus import BusSnapshot
from autosim.sensorbus.records import SensorRecord
from autosim.statemap.entity import StateMap

LOG = logging.getLogger(__name__)

CONTINUOUS = "Continuous"


class Verdict(str, enum.Enum):
    PASSED = "passed"
    CLAMPED = "clamped"
    REJECTED = "rejected"


class AuditEntry(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tick: int
    asset: str = ""
    action_kind: str
    verdict: Verdict
    reason: str = ""
    justifications: List[int] = []


class ProvenanceCheck(BaseModel):
    """Outcome of a provenance check; falsy when violated."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def check_provenance(
    action: DiscreteAction, justifications: Sequence[SensorRecord]
) -> ProvenanceCheck:
    """An action is justified when any cited record's category may trigger it."""
    kind = action.action_kind
    categories = sorted({r.category.value for r in justifications})
    if any_permitted(kind, (r.category for r in justifications)):
        return ProvenanceCheck(ok=True)
    allowed = sorted(c.value for c in PERMISSIONS[kind])
    return ProvenanceCheck(
        ok=False,
        reason=(
            f"{kind.value} needs one of {allowed}, "
            f"justified by {categories or 'nothing'}"
        ),
    )


def clamp_continuous(action: ActionVector, constraints: ConstraintSet) -> ActionVector:
    """Limit heading_rate and speed_cmd; values inside the limits are kept."""
    command = action.continuous
    limit = constraints.max_heading_rate
    heading_rate = min(limit, max(-limit, command.heading_rate))
    speed_cmd = min(constraints.max_speed_cmd, command.speed_cmd)
    if heading_rate == command.heading_rate and speed_cmd == command.speed_cmd:
        return action
    return action.model_copy(
        update={
            "continuous": ContinuousCommand(
                heading_rate=heading_rate, speed_cmd=speed_cmd
            )
        }
    )


def _constraint_violation(
    emitted: EmittedAction,
    constraints: ConstraintSet,
    state_map: StateMap,
    weapons: Optional[int],
    countermeasures: Optional[int],
) -> str:
    """Reason tag of the first broken constraint, empty when none."""
    action = emitted.action
    kind = emitted.kind
    if kind == ActionKind.ENGAGE_WEAPON_SYSTEM:
        if not constraints.weapons_free:
            return "weapons-hold"
        if constraints.is_no_strike(action.target_id):
            return "no-strike"
        target = state_map.get(action.target_id)
        if target is None:
            return "unknown-target"
        if target.neutralized:
            return "target-neutralized"
        if weapons is not None and weapons <= 0:
            return "no-weapons"
    elif kind == ActionKind.ENGAGE_COUNTERMEASURES:
        if (
            countermeasures is not None
            and countermeasures <= constraints.min_countermeasures_reserve
        ):
            return "countermeasure-reserve"
    elif kind == ActionKind.CHANGE_COURSE:
        route = [state_map.self_entity.position] + list(action.new_path)
        if constraints.path_violates_geofence(route):
            return "geofence"
    elif kind == ActionKind.ADD_NEW_TARGET:
        if constraints.is_no_strike(action.entity.id):
            return "no-strike"
    elif kind in (
        ActionKind.DEPRIORITIZE_TARGET,
        ActionKind.UPDATE_MISSION_ACHIEVEMENT,
    ):
        if state_map.get(action.target_id) is None:
            return "unknown-target"
    return ""


def filter_action(
    action: ActionVector,
    snapshot: BusSnapshot,
    constraints: ConstraintSet,
    state_map: StateMap,
    weapons: Optional[int] = None,
    countermeasures: Optional[int] = None,
) -> Tuple[ActionVector, List[AuditEntry]]:
    """Gate one ActionVector.

    :param action: the ensembler's output for this tick
    :param snapshot: the tick's bus snapshot; justifications are resolved
                     against it
    :param constraints: the not-to-violate parameters
    :param state_map: the asset's map, for target and position checks
    :param weapons: remaining weapons, when known
    :param countermeasures: remaining countermeasures, when known
    :return: the degraded action and one audit entry for the continuous
             command plus one per discrete action
    """
    tick = snapshot.tick
    asset = snapshot.asset
    audit = []

    clamped = clamp_continuous(action, constraints)
    if clamped is action:
        audit.append(
            AuditEntry(
                tick=tick, asset=asset, action_kind=CONTINUOUS, verdict=Verdict.PASSED
            )
        )
    else:
        channels = []
        if clamped.continuous.heading_rate != action.continuous.heading_rate:
            channels.append("max-heading-rate")
        if clamped.continuous.speed_cmd != action.continuous.speed_cmd:
            channels.append("max-speed")
        audit.append(
            AuditEntry(
                tick=tick,
                asset=asset,
                action_kind=CONTINUOUS,
                verdict=Verdict.CLAMPED,
                reason=",".join(channels),
            )
        )

    kept = []
    for emitted in clamped.discrete:
        records = snapshot.records_for(emitted.justifications)
        provenance = check_provenance(emitted.action, records)
        reason = "provenance" if not provenance else ""
        if not reason:
            reason = _constraint_violation(
                emitted, constraints, state_map, weapons, countermeasures
            )
        if reason:
            LOG.debug(f"{asset} tick {tick}: rejected {emitted.kind.value} ({reason})")
            if not provenance:
                LOG.debug(provenance.reason)
            audit.append(
                AuditEntry(
                    tick=tick,
                    asset=asset,
                    action_kind=emitted.kind.value,
                    verdict=Verdict.REJECTED,
                    reason=reason,
                    justifications=emitted.justifications,
                )
            )
            continue
        kept.append(emitted)
        audit.append(
            AuditEntry(
                tick=tick,
                asset=asset,
                action_kind=emitted.kind.value,
                verdict=Verdict.PASSED,
                justifications=emitted.justifications,
            )
        )

    if len(kept) != len(clamped.discrete):
        clamped = clamped.model_copy(update={"discrete": kept})
    return clamped, audit


class AuditLog:
    """Append-only audit trail of one run."""

    def __init__(self):
        self.entries: List[AuditEntry] = []

    def extend(self, entries: Iterable[AuditEntry]) -> None:
        self.entries.extend(entries)

    def __len__(self) -> int:
        return len(self.entries)

    def rejections(self, asset: Optional[str] = None) -> int:
        return sum(
            1
            for e in self.entries
            if e.verdict == Verdict.REJECTED and (asset is None or e.asset == asset)
        )

    def count(self, verdict: Verdict, action_kind: Optional[str] = None) -> int:
        return sum(
            1
            for e in self.entries
            if e.verdict == verdict
            and (action_kind is None or e.action_kind == action_kind)
        )

    def write_jsonl(self, path: Union[Path, str]) -> None:
        with open(path, "w") as f:
            for entry in self.entries:
                f.write(json.dumps(entry.model_dump(mode="json"), sort_keys=True))
                f.write("\n")

    @classmethod
    def read_jsonl(cls, path: Union[Path, str]) -> "AuditLog":
        log = cls()
        with open(path) as f:
            for line in f:
                if line.strip():
                    log.entries.append(AuditEntry.model_validate_json(line))
        return log
