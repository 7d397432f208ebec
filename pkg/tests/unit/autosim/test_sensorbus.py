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

import math
import random
import unittest

import numpy as np

from autosim import utils
from autosim.sensorbus import bus
from autosim.sensorbus.records import (
    ContactReport,
    SensorBusError,
    SensorCategory,
    SensorRecord,
    WarningKind,
    WarningReport,
)
from autosim.sensorbus.sensors import SensorSuite, sense
from autosim.simworld.state import HostileState, Missile, SamSite
from tests.unit.autosim import helpers

QUIET = SensorSuite(radar_noise_std=0.0, health_noise_std=0.0, bearing_noise_std=0.0)


def _contact_record(record_id, position, tick=0):
    return SensorRecord(
        record_id=record_id,
        tick=tick,
        category=SensorCategory.ENVIRONMENTAL_MAPPING,
        source="radar",
        payload=ContactReport(
            entity_id=f"h{record_id}",
            position=position,
            speed=0.0,
            heading=0.0,
            object_type="Hostile",
        ),
    )


class SenseTestCase(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(0)

    def test_baseline_records(self):
        records = sense(helpers.world(), "a1", SensorSuite(), self.rng)
        self.assertEqual(
            [r.category for r in records],
            [
                SensorCategory.HEALTH,
                SensorCategory.PERFORMANCE,
                SensorCategory.NAVIGATION,
            ],
        )
        self.assertEqual([r.record_id for r in records], [0, 1, 2])

    def test_contact_at_edge_of_range(self):
        suite = SensorSuite(radar_range=5000.0, radar_noise_std=0.0)
        hostile = HostileState(
            id="h1",
            position=(
                5000.0 + 4999.0 * math.cos(0.3),
                5000.0 + 4999.0 * math.sin(0.3),
            ),
            max_speed=200.0,
            max_turn=0.1,
            classification="interceptor",
        )
        records = sense(helpers.world(hostiles=[hostile]), "a1", suite, self.rng)
        contacts = [
            r.payload
            for r in records
            if r.category == SensorCategory.ENVIRONMENTAL_MAPPING
        ]
        self.assertEqual(len(contacts), 1)
        self.assertEqual(contacts[0].classification, "interceptor")

    def test_contact_out_of_range(self):
        hostile = HostileState(
            id="h1", position=(9999.0, 9999.0), max_speed=200.0, max_turn=0.1
        )
        suite = SensorSuite(radar_range=1000.0)
        records = sense(helpers.world(hostiles=[hostile]), "a1", suite, self.rng)
        self.assertEqual(len(records), 3)

    def test_missile_warning_bearing(self):
        missile = Missile(
            id="m1",
            launcher="sam1",
            target="a1",
            position=(5000.0, 6000.0),
            speed=600.0,
            fuse_radius=50.0,
        )
        world = helpers.world(
            assets=[helpers.asset(heading=0.0)], missiles=[missile]
        )
        suite = SensorSuite(bearing_noise_std=0.01, radar_range=0.0)
        records = sense(world, "a1", suite, self.rng)
        maws = [
            r.payload
            for r in records
            if isinstance(r.payload, WarningReport)
            and r.payload.warning_kind == WarningKind.MAW
        ]
        self.assertEqual(len(maws), 1)
        true_bearing = utils.relative_bearing((5000.0, 5000.0), 0.0, missile.position)
        self.assertAlmostEqual(maws[0].bearing, true_bearing, delta=0.1)

    def test_rwr_when_illuminated(self):
        site = SamSite(
            id="sam1", position=(6000.0, 5000.0), radar_range=2000.0,
            missile_speed=600.0,
        )
        records = sense(helpers.world(sam_sites=[site]), "a1", QUIET, self.rng)
        rwr = [r for r in records if r.source == "rwr"]
        self.assertEqual(len(rwr), 1)
        self.assertAlmostEqual(rwr[0].payload.bearing, 0.0)

    def test_dead_asset(self):
        world = helpers.world(assets=[helpers.asset(alive=False)])
        with self.assertRaises(SensorBusError):
            sense(world, "a1", SensorSuite(), self.rng)

    def test_deterministic_per_stream(self):
        world = helpers.world()
        one = sense(world, "a1", SensorSuite(), utils.rng_stream(1, "sensors", "a1"))
        two = sense(world, "a1", SensorSuite(), utils.rng_stream(1, "sensors", "a1"))
        self.assertEqual(one, two)


class PublishTestCase(unittest.TestCase):
    def test_snapshot_size_and_order(self):
        records = sense(helpers.world(), "a1", QUIET, np.random.default_rng(0))
        snapshot = bus.publish(records, "a1")
        self.assertEqual(len(snapshot.records), 3)
        self.assertEqual([r.record_id for r in snapshot.records], [0, 1, 2])

    def test_shuffled_input_sorted(self):
        records = [_contact_record(i, (float(i), 0.0)) for i in range(8)]
        shuffled = list(records)
        random.Random(4).shuffle(shuffled)
        self.assertEqual(bus.publish(shuffled).records, tuple(records))

    def test_readers_see_identical_sequences(self):
        snapshot = bus.publish([_contact_record(i, (0.0, 0.0)) for i in range(3)])
        self.assertEqual(list(snapshot.records), list(snapshot.records))
        self.assertEqual(
            snapshot.records_for([2, 0]),
            [snapshot.records[0], snapshot.records[2]],
        )

    def test_mixed_ticks_rejected(self):
        with self.assertRaises(SensorBusError):
            bus.publish([_contact_record(0, (0, 0)), _contact_record(1, (0, 0), 1)])

    def test_duplicate_ids_rejected(self):
        with self.assertRaises(SensorBusError):
            bus.publish([_contact_record(0, (0, 0)), _contact_record(0, (1, 0))])


class EnvVectorTestCase(unittest.TestCase):
    def setUp(self):
        self.layout = bus.EnvLayout(contact_slots=4, bounds=helpers.BOUNDS)

    def test_baseline_length(self):
        records = sense(helpers.world(), "a1", QUIET, np.random.default_rng(0))
        vector = bus.build_env_vector(bus.publish(records), self.layout)
        self.assertEqual(vector.shape, (35,))
        self.assertEqual(np.count_nonzero(vector[11:]), 0)

    def test_rwr_flag(self):
        warning = SensorRecord(
            record_id=0,
            tick=0,
            category=SensorCategory.ENVIRONMENTAL_MAPPING,
            source="rwr",
            payload=WarningReport(warning_kind=WarningKind.RWR, bearing=0.5),
        )
        vector = bus.build_env_vector(bus.publish([warning]), self.layout)
        self.assertEqual(vector[9], 1.0)
        self.assertEqual(vector[10], 0.0)

    def test_nearest_contacts_fill_slots(self):
        positions = [(3000.0, 0.0), (100.0, 0.0), (0.0, 2000.0), (500.0, 500.0),
                     (0.0, -50.0), (4000.0, 4000.0)]
        snapshot = bus.publish(
            [_contact_record(i, p) for i, p in enumerate(positions)]
        )
        vector = bus.build_env_vector(snapshot, self.layout)
        expected = sorted(
            range(len(positions)),
            key=lambda i: (utils.distance((0.0, 0.0), positions[i]), i),
        )[:4]
        for slot, index in enumerate(expected):
            offset = 11 + slot * 6
            self.assertEqual(vector[offset], 1.0)
            self.assertAlmostEqual(vector[offset + 1], positions[index][0] / 5000.0)
            self.assertAlmostEqual(vector[offset + 2], positions[index][1] / 5000.0)
            self.assertEqual(vector[offset + 5], 1.0)


if __name__ == "__main__":
    unittest.main()
