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

"""Replay logs and the metrics export derived from them.

A replay log is line-delimited JSON: one header line, then per tick one
"bus" line per active asset followed by one "tick" line, then a result
line. Every line is canonical JSON so identical runs give identical bytes.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict

from autosim import utils
from autosim.simworld.mission import UtilityComponents

LOG = logging.getLogger(__name__)

LINE_TYPES = ("header", "bus", "tick", "result")
COMPONENT_COLUMNS = list(UtilityComponents.model_fields)


class ReplayError(Exception):
    """Raised when a replay log does not parse."""

    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class Replay(BaseModel):
    model_config = ConfigDict(frozen=True)

    header: dict
    bus: List[dict]
    ticks: List[dict]
    result: Optional[dict] = None

    @property
    def controllers(self) -> List[str]:
        return list(self.header.get("controllers", []))

    @property
    def tick_range(self) -> Tuple[int, int]:
        if not self.ticks:
            return (0, -1)
        return (self.ticks[0]["tick"], self.ticks[-1]["tick"])


def write_replay(lines: Iterable[dict], path: Union[Path, str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(utils.canonical_json(line) + "\n")


def parse_replay(text: str) -> Replay:
    """Parse replay log text.

    :raises: ReplayError naming the first line that is not valid JSON, has
             an unknown type or is out of place
    """
    header = None
    bus, ticks = [], []
    result = None
    for number, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            line = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ReplayError(f"invalid JSON: {e.msg}", number) from e
        if not isinstance(line, dict) or line.get("type") not in LINE_TYPES:
            raise ReplayError("not a replay record", number)
        kind = line["type"]
        if kind == "header":
            if header is not None:
                raise ReplayError("second header", number)
            header = line
            continue
        if header is None:
            raise ReplayError(f"{kind} record before the header", number)
        if result is not None:
            raise ReplayError(f"{kind} record after the result", number)
        if kind == "bus":
            bus.append(line)
        elif kind == "tick":
            if not isinstance(line.get("tick"), int) or not isinstance(
                line.get("assets"), dict
            ):
                raise ReplayError("tick record lacks tick or assets", number)
            if ticks and line["tick"] <= ticks[-1]["tick"]:
                raise ReplayError(f"tick {line['tick']} out of order", number)
            ticks.append(line)
        else:
            result = line
    if header is None:
        raise ReplayError("replay log has no header")
    return Replay(header=header, bus=bus, ticks=ticks, result=result)


def read_replay(path: Union[Path, str]) -> Replay:
    return parse_replay(Path(path).read_text(encoding="utf-8"))


def select_ticks(
    replay: Replay, first: Optional[int] = None, last: Optional[int] = None
) -> List[dict]:
    """Tick records with first <= tick <= last, both bounds optional."""
    return [
        t
        for t in replay.ticks
        if (first is None or t["tick"] >= first) and (last is None or t["tick"] <= last)
    ]


def metrics_columns(controllers: List[str]) -> List[str]:
    return (
        ["tick", "asset"]
        + COMPONENT_COLUMNS
        + [f"gate_{controller}" for controller in controllers]
    )


def metrics_rows(
    replay: Replay, first: Optional[int] = None, last: Optional[int] = None
) -> List[dict]:
    """One row per (tick, asset that acted in the tick).

    The utility columns are the swarm-level components after the tick;
    the gate columns are the asset's gating weights in controller order.
    """
    controllers = replay.controllers
    rows = []
    for tick in select_ticks(replay, first, last):
        utility = tick.get("utility", {})
        for asset in sorted(tick["assets"]):
            gates = tick["assets"][asset].get("gates", [])
            if len(gates) != len(controllers):
                raise ReplayError(
                    f"tick {tick['tick']} asset {asset} has {len(gates)} gate "
                    f"weights for {len(controllers)} controllers"
                )
            row = {"tick": tick["tick"], "asset": asset}
            for column in COMPONENT_COLUMNS:
                row[column] = utility.get(column, 0.0)
            for controller, weight in zip(controllers, gates):
                row[f"gate_{controller}"] = weight
            rows.append(row)
    return rows


def write_metrics_csv(
    rows: List[dict], controllers: List[str], path: Union[Path, str]
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(
            f, fieldnames=metrics_columns(controllers), lineterminator="\n"
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    LOG.debug(f"Wrote {len(rows)} metrics rows to {path}")
