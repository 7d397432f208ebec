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

"""Grid path planning around zones and obstacles."""

import heapq
import logging
import math
from typing import Iterable, List, Optional, Tuple

import numpy as np

from autosim import utils
from autosim.statemap.entity import Bounds, Entity, EntityKind, StateMap

LOG = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)

Cell = Tuple[int, int]


class PlanningError(Exception):
    """Raised when a planning request is malformed."""

    pass


class NoPathError(PlanningError):
    """Raised when the goal is blocked or unreachable."""

    pass


class PlanGrid:
    """Occupancy grid over the world box.

    Cells are addressed (row, col); row grows with y and col with x. A cell
    is blocked when its center lies inside an inflated NoFlyZone or
    Obstacle circle.
    """

    def __init__(
        self,
        width: int,
        height: int,
        cell_size: float = 1.0,
        origin: utils.Point = (0.0, 0.0),
        blocked: Optional[np.ndarray] = None,
    ):
        if width <= 0 or height <= 0:
            raise PlanningError("grid must have at least one cell")
        if cell_size <= 0:
            raise PlanningError("cell size must be positive")
        self.width = width
        self.height = height
        self.cell_size = cell_size
        self.origin = origin
        if blocked is None:
            blocked = np.zeros((height, width), dtype=bool)
        if blocked.shape != (height, width):
            raise PlanningError(
                f"blocked mask shape {blocked.shape} does not match "
                f"{(height, width)}"
            )
        self.blocked = blocked

    @classmethod
    def from_bounds(cls, bounds: Bounds, cell_size: float) -> "PlanGrid":
        width = max(1, int(math.ceil((bounds.x_max - bounds.x_min) / cell_size)))
        height = max(1, int(math.ceil((bounds.y_max - bounds.y_min) / cell_size)))
        return cls(width, height, cell_size, origin=(bounds.x_min, bounds.y_min))

    @classmethod
    def from_state_map(
        cls,
        state_map: StateMap,
        bounds: Bounds,
        cell_size: float,
        margin: float = 0.0,
        extra: Iterable[Entity] = (),
    ) -> "PlanGrid":
        """Grid with every NoFlyZone and Obstacle of the map blocked."""
        grid = cls.from_bounds(bounds, cell_size)
        obstructions = state_map.of_kind(EntityKind.NO_FLY_ZONE) + state_map.of_kind(
            EntityKind.OBSTACLE
        )
        for entity in obstructions + list(extra):
            grid.block_circle(entity.position, entity.radius + margin)
        return grid

    def in_grid(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    def is_blocked(self, cell: Cell) -> bool:
        return bool(self.blocked[cell[0], cell[1]])

    def index(self, cell: Cell) -> int:
        """Row-major order of a cell."""
        return cell[0] * self.width + cell[1]

    def center_of(self, cell: Cell) -> utils.Point:
        return (
            self.origin[0] + (cell[1] + 0.5) * self.cell_size,
            self.origin[1] + (cell[0] + 0.5) * self.cell_size,
        )

    def cell_of(self, point: utils.Point) -> Cell:
        col = int(math.floor((point[0] - self.origin[0]) / self.cell_size))
        row = int(math.floor((point[1] - self.origin[1]) / self.cell_size))
        return (min(self.height - 1, max(0, row)), min(self.width - 1, max(0, col)))

    def block_circle(self, center: utils.Point, radius: float) -> None:
        rows, cols = np.mgrid[0 : self.height, 0 : self.width]
        xs = self.origin[0] + (cols + 0.5) * self.cell_size
        ys = self.origin[1] + (rows + 0.5) * self.cell_size
        inside = np.hypot(xs - center[0], ys - center[1]) < radius
        self.blocked |= inside

    def neighbors(self, cell: Cell) -> List[Tuple[Cell, float]]:
        """8-connected free neighbours with move costs.

        A diagonal move is allowed only when both orthogonal cells it
        passes between are free.
        """
        row, col = cell
        result = []
        for d_row in (-1, 0, 1):
            for d_col in (-1, 0, 1):
                if d_row == 0 and d_col == 0:
                    continue
                nb = (row + d_row, col + d_col)
                if not self.in_grid(nb) or self.is_blocked(nb):
                    continue
                if d_row and d_col:
                    if self.is_blocked((row + d_row, col)) or self.is_blocked(
                        (row, col + d_col)
                    ):
                        continue
                    result.append((nb, SQRT2))
                else:
                    result.append((nb, 1.0))
        return result


def octile(a: Cell, b: Cell) -> float:
    d_row = abs(a[0] - b[0])
    d_col = abs(a[1] - b[1])
    return (SQRT2 - 1.0) * min(d_row, d_col) + max(d_row, d_col)


def path_cost(path: List[Cell]) -> float:
    cost = 0.0
    for a, b in zip(path, path[1:]):
        cost += SQRT2 if a[0] != b[0] and a[1] != b[1] else 1.0
    return cost


def plan_path_astar(grid: PlanGrid, start: Cell, goal: Cell) -> List[Cell]:
    """Shortest 8-connected path from start to goal.

    Uses the octile heuristic; open-list ties are broken by lower f, then
    lower h, then row-major cell order, so the result is deterministic.

    :return: the cells from start to goal inclusive
    :raises: PlanningError if start or goal is outside the grid or the
             start cell is blocked; NoPathError if the goal is blocked or
             unreachable
    """
    for name, cell in (("start", start), ("goal", goal)):
        if not grid.in_grid(cell):
            raise PlanningError(f"{name} cell {cell} is outside the grid")
    if grid.is_blocked(start):
        raise PlanningError(f"start cell {start} is blocked")
    if grid.is_blocked(goal):
        raise NoPathError(f"goal cell {goal} is blocked")
    if start == goal:
        return [start]

    g_score = {start: 0.0}
    came_from = {}
    closed = set()
    h_start = octile(start, goal)
    open_heap = [(h_start, h_start, grid.index(start), start)]
    while open_heap:
        _, _, _, cell = heapq.heappop(open_heap)
        if cell in closed:
            continue
        if cell == goal:
            path = [cell]
            while cell in came_from:
                cell = came_from[cell]
                path.append(cell)
            path.reverse()
            return path
        closed.add(cell)
        for nb, step in grid.neighbors(cell):
            if nb in closed:
                continue
            tentative = g_score[cell] + step
            if tentative < g_score.get(nb, math.inf) - 1e-12:
                g_score[nb] = tentative
                came_from[nb] = cell
                h = octile(nb, goal)
                heapq.heappush(open_heap, (tentative + h, h, grid.index(nb), nb))

    raise NoPathError(f"no path from {start} to {goal}")
