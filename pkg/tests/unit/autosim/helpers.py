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

"""Builders shared by the unit tests."""

import copy
import heapq
import json
import math
import os
import unittest

from autosim.statemap.entity import Bounds, Entity, EntityKind, new_state_map

BOUNDS = Bounds(x_min=0.0, y_min=0.0, x_max=10000.0, y_max=10000.0)

ACCEPTANCE = os.environ.get("AUTOSIM_ACCEPTANCE") == "1"

acceptance = unittest.skipUnless(ACCEPTANCE, "set AUTOSIM_ACCEPTANCE=1 to run")


def entity(entity_id, kind=EntityKind.HOSTILE, position=(0.0, 0.0), **kwargs):
    return Entity(id=entity_id, kind=kind, position=position, **kwargs)


def own_map(own_id="a1", position=(5000.0, 5000.0), tick=0, heading=0.0):
    return new_state_map(
        Entity(
            id=own_id,
            kind=EntityKind.SELF_ASSET,
            position=position,
            heading=heading,
            last_update_tick=tick,
            author=own_id,
        ),
        tick=tick,
    )


SCENARIO = {
    "name": "unit",
    "world": {
        "bounds": {"x_min": 0, "y_min": 0, "x_max": 20000, "y_max": 20000},
    },
    "assets": [
        {"id": "a1", "position": [1000, 1000], "heading": 0.0, "weapons": 0},
    ],
    "mission": {
        "mission_type": "transit",
        "waypoints": [[4000, 1000], [8000, 3000]],
        "max_ticks": 60,
        "capture_radius": 200,
    },
    "controllers": {"enabled": ["avoidance", "waypoint"]},
    "ensembler": {"d_h": 4, "map_slots": 1, "contact_slots": 2},
    "training": {"iterations": 2, "episodes_per_iteration": 2, "seed": 3},
}

SWARM_SCENARIO = {
    "name": "unit-swarm",
    "world": {
        "bounds": {"x_min": 0, "y_min": 0, "x_max": 20000, "y_max": 20000},
        "targets": [{"id": "t1", "position": [6000, 2000]}],
        "obstacles": [{"id": "ob1", "center": [4000, 2500], "radius": 300}],
    },
    "assets": [
        {"id": "a1", "position": [1000, 2000]},
        {"id": "a2", "position": [1000, 2600]},
        {"id": "a3", "position": [1000, 1400]},
    ],
    "sam_sites": [
        {"id": "sam1", "position": [7000, 4000], "radar_range": 2000,
         "lock_ticks": 4, "missiles": 2},
    ],
    "mission": {
        "waypoints": [[8000, 2000]],
        "target_list": [{"id": "t1", "priority": 1.0}],
        "max_ticks": 40,
        "capture_radius": 300,
    },
    "controllers": {"cell_size": 250},
    "ensembler": {"d_h": 4, "map_slots": 1, "contact_slots": 2},
    "network": {
        "drop_prob": 0.2,
        "partitions": [{"start": 5, "end": 15, "groups": [["a1"], ["a2", "a3"]]}],
    },
}


def scenario_document(base=None, **sections):
    """A deep copy of a scenario document with sections replaced."""
    document = copy.deepcopy(base if base is not None else SCENARIO)
    document.update(copy.deepcopy(sections))
    return document


def write_json(path, document):
    with open(path, "w") as f:
        json.dump(document, f)
    return path


def asset(asset_id="a1", position=(5000.0, 5000.0), **kwargs):
    from autosim.simworld.state import AssetState

    kwargs.setdefault("max_speed", 250.0)
    kwargs.setdefault("max_turn", 0.2)
    return AssetState(id=asset_id, position=position, **kwargs)


def world(assets=None, **kwargs):
    from autosim.simworld.state import WorldState

    if assets is None:
        assets = [asset()]
    return WorldState(bounds=BOUNDS, assets=assets, **kwargs)


def dijkstra_cost(grid, start, goal):
    """Cheapest path cost over the grid's move set, None when unreachable."""
    dist = {start: 0.0}
    heap = [(0.0, start)]
    while heap:
        d, cell = heapq.heappop(heap)
        if cell == goal:
            return d
        if d > dist[cell]:
            continue
        for nb, step in grid.neighbors(cell):
            if d + step < dist.get(nb, math.inf):
                dist[nb] = d + step
                heapq.heappush(heap, (d + step, nb))
    return None


def noise_record(rng, params, steps, sigma, epsilon):
    """A decision sequence with random inputs and random draws."""
    from autosim.controllers.actions import N_ACTIONS
    from autosim.ensembler.network import StepInput, run_sequence
    from autosim.training.reinforce import NoiseRecord, StepNoise

    inputs = []
    for _ in range(steps):
        inputs.append(
            StepInput(
                x=rng.normal(size=params.d_in),
                commands=rng.uniform(-1.0, 1.0, size=(params.n_controllers, 2)),
                eligible=rng.random(N_ACTIONS) < 0.5,
            )
        )
    noise_steps = []
    for trace in run_sequence(params, inputs):
        noise = rng.normal(0.0, sigma, size=2)
        emitted = (rng.random(N_ACTIONS) < 0.5) & trace.inputs.eligible
        noise_steps.append(StepNoise(noise, trace.mean + noise, emitted))
    return NoiseRecord(
        sigma=sigma, epsilon=epsilon, steps={"a1": noise_steps}, inputs={"a1": inputs}
    )
