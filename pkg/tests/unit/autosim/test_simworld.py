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

import json
import math
import tempfile
import unittest
from pathlib import Path

import ddt
import numpy as np

from autosim import utils
from autosim.controllers.actions import (
    ActionVector,
    AddObstacle,
    ContinuousCommand,
    DeprioritizeTarget,
    EmittedAction,
    EngageWeaponSystem,
    TerminateMission,
    UpdateMissionAchievement,
)
from autosim.ensembler.network import EnsemblerError, init_params, zero_params
from autosim.sensorbus.bus import BusSnapshot
from autosim.sensorbus.records import ContactReport, SensorCategory, SensorRecord
from autosim.simworld import dynamics, episode, replay
from autosim.simworld.mission import (
    EpisodeHistory,
    MissionPlan,
    MissionTarget,
    UtilityWeights,
    compute_utility,
)
from autosim.simworld.scenario import (
    ScenarioError,
    apply_overrides,
    load_scenario,
    parse_scenario,
)
from autosim.simworld.state import SamSite
from autosim.statemap.entity import Entity, EntityKind
from autosim.swarmledger.block import author_key
from autosim.swarmledger.chain import verify_chain
from tests.unit.autosim import helpers


def _action(*discrete, heading_rate=0.0, speed_cmd=0.0):
    return ActionVector(
        continuous=ContinuousCommand(heading_rate=heading_rate, speed_cmd=speed_cmd),
        discrete=[
            EmittedAction(action=a, controllers=["test"], justifications=[0])
            for a in discrete
        ],
    )


def _target(tid, position=(5500.0, 5000.0), neutralized=False):
    return Entity(
        id=tid, kind=EntityKind.TARGET, position=position, neutralized=neutralized
    )


class UtilityTestCase(unittest.TestCase):
    def test_nothing_achieved(self):
        plan = MissionPlan(
            waypoints=[(9000.0, 9000.0)],
            target_list=[MissionTarget(id="t1")],
            weights=UtilityWeights(w_time=1.0),
            max_ticks=50,
        )
        initial = helpers.world(targets=[_target("t1")])
        final = helpers.world(
            assets=[helpers.asset(alive=False)], targets=[_target("t1")], tick=50
        )
        report = compute_utility(
            EpisodeHistory(initial=initial, final=final, ticks_used=50), plan
        )
        self.assertEqual(report.components.constraint_score, 1.0)
        self.assertEqual(report.components.time_frac, 1.0)
        self.assertAlmostEqual(report.total, 0.0)

    def test_two_of_three_targets(self):
        plan = MissionPlan(
            waypoints=[(6000.0, 5000.0)],
            target_list=[MissionTarget(id=t) for t in ("t1", "t2", "t3")],
            weights=UtilityWeights(
                w_targets=1, w_waypoints=1, w_survival=1, w_constraints=1, w_time=0
            ),
        )
        targets = [_target("t1"), _target("t2"), _target("t3")]
        final_targets = [
            _target("t1", neutralized=True),
            _target("t2", neutralized=True),
            _target("t3"),
        ]
        report = compute_utility(
            EpisodeHistory(
                initial=helpers.world(targets=targets),
                final=helpers.world(
                    assets=[helpers.asset(next_waypoint=1)], targets=final_targets
                ),
                ticks_used=10,
            ),
            plan,
        )
        self.assertAlmostEqual(report.total, 2.0 / 3.0 + 3.0)
        self.assertAlmostEqual(round(report.total, 3), 3.667)

    def test_rejections_lower_constraint_score(self):
        plan = MissionPlan(rejection_normalizer=4.0)
        world = helpers.world()
        report = compute_utility(
            EpisodeHistory(
                initial=world, final=world, ticks_used=1, audit_rejections=2
            ),
            plan,
        )
        self.assertAlmostEqual(report.components.constraint_score, 0.5)


class DynamicsTestCase(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(0)

    def test_zero_action(self):
        world = helpers.world()
        stepped = dynamics.step(world, {"a1": _action()}, self.rng)
        self.assertEqual(stepped.tick, 1)
        self.assertEqual(stepped.assets[0].position, world.assets[0].position)
        self.assertEqual(stepped.assets[0].fuel, world.assets[0].fuel)

    def test_half_turn(self):
        for start, expected in ((0.0, math.pi), (1.5 * math.pi, 0.5 * math.pi)):
            world = helpers.world(
                assets=[helpers.asset(heading=start, max_turn=math.pi / 10)]
            )
            for _ in range(10):
                world = dynamics.step(
                    world, {"a1": _action(heading_rate=1.0)}, self.rng
                )
            self.assertAlmostEqual(world.assets[0].heading, expected)

    def test_full_speed_moves(self):
        world = helpers.world()
        stepped = dynamics.step(world, {"a1": _action(speed_cmd=1.0)}, self.rng)
        self.assertEqual(stepped.assets[0].position, (5250.0, 5000.0))
        self.assertEqual(stepped.assets[0].fuel, world.assets[0].fuel - 1.0)

    def test_sam_launches_once(self):
        site = SamSite(
            id="sam1",
            position=(6000.0, 5000.0),
            radar_range=2000.0,
            missile_speed=10.0,
            lock_ticks=3,
        )
        world = helpers.world(sam_sites=[site])
        for _ in range(3):
            world = dynamics.step(world, {"a1": _action()}, self.rng)
        self.assertEqual(len(world.missiles), 1)
        self.assertEqual(world.missiles[0].target, "a1")
        self.assertEqual(world.sam_sites[0].missiles_left, 3)
        world = dynamics.step(world, {"a1": _action()}, self.rng)
        self.assertEqual(len(world.missiles), 1)

    def test_engagement_neutralizes(self):
        config = dynamics.EngagementConfig(p_hit=1.0)
        world = helpers.world(
            assets=[helpers.asset(weapons=1)], targets=[_target("t1")]
        )
        stepped = dynamics.step(
            world,
            {"a1": _action(EngageWeaponSystem(target_id="t1"))},
            self.rng,
            config,
        )
        self.assertTrue(stepped.target("t1").neutralized)
        self.assertEqual(stepped.assets[0].weapons, 0)
        self.assertEqual(stepped.assets[0].engaged, ["t1"])

    def test_out_of_range_misses(self):
        config = dynamics.EngagementConfig(p_hit=1.0, weapon_range=100.0)
        world = helpers.world(
            assets=[helpers.asset(weapons=1)], targets=[_target("t1")]
        )
        stepped = dynamics.step(
            world, {"a1": _action(EngageWeaponSystem(target_id="t1"))}, self.rng, config
        )
        self.assertFalse(stepped.target("t1").neutralized)
        self.assertIn("weapon-miss", [e.kind for e in stepped.events])

    def test_terminate(self):
        stepped = dynamics.step(
            helpers.world(),
            {"a1": _action(TerminateMission(), speed_cmd=1.0)},
            self.rng,
        )
        self.assertTrue(stepped.assets[0].terminated)
        self.assertTrue(stepped.assets[0].alive)
        self.assertEqual(stepped.active_assets(), [])

    def test_waypoint_capture(self):
        mission = MissionPlan(waypoints=[(5200.0, 5000.0)], capture_radius=100.0)
        stepped = dynamics.step(
            helpers.world(),
            {"a1": _action(speed_cmd=1.0)},
            self.rng,
            mission=mission,
        )
        self.assertEqual(stepped.assets[0].next_waypoint, 1)


@ddt.ddt
class ScenarioTestCase(unittest.TestCase):
    def test_valid(self):
        scenario = parse_scenario(helpers.scenario_document())
        self.assertEqual(scenario.asset_ids, ["a1"])
        self.assertEqual(scenario.training.iterations, 2)
        world = scenario.initial_world()
        self.assertEqual(world.assets[0].roster, ["a1"])

    @ddt.data(
        ({"assets": [{"id": "a1", "position": [-5, 0]}]}, "outside"),
        ({"assets": []}, "assets"),
        ({"bogus": 1}, "bogus"),
        ({"mission": {"target_list": [{"id": "nope"}]}}, "nope"),
        ({"training": {"iterations": -1}}, "training.iterations"),
    )
    @ddt.unpack
    def test_invalid(self, sections, fragment):
        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(helpers.scenario_document(**sections))
        self.assertIn(fragment, str(ctx.exception))
        self.assertTrue(ctx.exception.problems)

    def test_duplicate_ids(self):
        document = helpers.scenario_document(
            sam_sites=[{"id": "a1", "position": [500, 500]}]
        )
        with self.assertRaises(ScenarioError):
            parse_scenario(document)

    def test_digest_stable(self):
        one = parse_scenario(helpers.scenario_document())
        two = parse_scenario(helpers.scenario_document())
        self.assertEqual(one.digest(), two.digest())

    def test_load_json_and_yaml(self):
        with tempfile.TemporaryDirectory() as tmp:
            json_path = helpers.write_json(
                Path(tmp) / "s.json", helpers.scenario_document()
            )
            yaml_path = Path(tmp) / "s.yaml"
            yaml_path.write_text(json.dumps(helpers.scenario_document()))
            self.assertEqual(
                load_scenario(json_path).digest(), load_scenario(yaml_path).digest()
            )

    def test_unparsable(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "s.json"
            path.write_text("{not json")
            with self.assertRaises(ScenarioError):
                load_scenario(path)
            path.write_text("[1, 2]")
            with self.assertRaises(ScenarioError):
                load_scenario(path)

    def test_overrides(self):
        document = apply_overrides(
            helpers.scenario_document(),
            ["iterations=5", "mission.max_ticks=200", "network.drop_prob=0.5"],
        )
        scenario = parse_scenario(document)
        self.assertEqual(scenario.training.iterations, 5)
        self.assertEqual(scenario.mission.max_ticks, 200)
        self.assertEqual(scenario.network.drop_prob, 0.5)
        self.assertEqual(helpers.SCENARIO["training"]["iterations"], 2)

    @ddt.data("iterations", "=3", "name.x=1")
    def test_bad_override(self, override):
        with self.assertRaises(ScenarioError):
            apply_overrides(helpers.scenario_document(), [override])


class ObserveTestCase(unittest.TestCase):
    def _snapshot(self, *contacts):
        return BusSnapshot(
            tick=3,
            asset="a1",
            records=tuple(
                SensorRecord(
                    record_id=i,
                    tick=3,
                    category=SensorCategory.ENVIRONMENTAL_MAPPING,
                    source="radar",
                    payload=c,
                )
                for i, c in enumerate(contacts)
            ),
        )

    def _contact(self, entity_id, object_type, **kwargs):
        return ContactReport(
            entity_id=entity_id,
            position=(5100.0, 5000.0),
            speed=10.0,
            heading=0.0,
            object_type=object_type,
            **kwargs,
        )

    def test_tracks_hostiles_keeps_priority(self):
        state_map = helpers.own_map()
        state_map = state_map.model_copy(
            update={
                "entities": {
                    **state_map.entities,
                    "h1": helpers.entity("h1", priority=0.7),
                }
            }
        )
        observed = episode.observe(
            state_map,
            self._snapshot(self._contact("h1", "Hostile")),
            helpers.asset(),
        )
        self.assertEqual(observed.get("h1").position, (5100.0, 5000.0))
        self.assertEqual(observed.get("h1").priority, 0.7)
        self.assertEqual(observed.get("h1").author, "a1")

    def test_static_kinds_not_inserted(self):
        observed = episode.observe(
            helpers.own_map(),
            self._snapshot(
                self._contact("t9", "Target"),
                self._contact("ob1", "Obstacle", radius=50.0),
            ),
            helpers.asset(),
        )
        self.assertIsNone(observed.get("t9"))
        self.assertIsNone(observed.get("ob1"))

    def test_own_entity_refreshed(self):
        observed = episode.observe(
            helpers.own_map(), self._snapshot(), helpers.asset(position=(10.0, 20.0))
        )
        self.assertEqual(observed.self_entity.position, (10.0, 20.0))
        self.assertEqual(observed.self_entity.last_update_tick, 3)


class BookkeepingTestCase(unittest.TestCase):
    def setUp(self):
        self.state_map = episode.apply_bookkeeping(
            helpers.own_map(),
            ActionVector(
                continuous=ContinuousCommand(),
                discrete=[
                    EmittedAction(
                        action=AddObstacle(
                            obstacle_id="ob1", center=(1.0, 2.0), radius=30.0
                        ),
                        controllers=["avoidance"],
                    )
                ],
            ),
            1,
            "a1",
        )

    def test_add_obstacle(self):
        obstacle = self.state_map.get("ob1")
        self.assertEqual(obstacle.kind, EntityKind.OBSTACLE)
        self.assertEqual(obstacle.radius, 30.0)
        self.assertEqual((obstacle.last_update_tick, obstacle.author), (1, "a1"))

    def test_target_updates(self):
        state_map = episode.apply_bookkeeping(
            self.state_map.model_copy(
                update={
                    "entities": {
                        **self.state_map.entities,
                        "t1": _target("t1").model_copy(update={"priority": 0.9}),
                    }
                }
            ),
            _action(DeprioritizeTarget(target_id="t1")),
            2,
            "a1",
        )
        self.assertEqual(state_map.get("t1").priority, 0.0)
        state_map = episode.apply_bookkeeping(
            state_map, _action(UpdateMissionAchievement(target_id="t1")), 3, "a1"
        )
        self.assertTrue(state_map.get("t1").neutralized)

    def test_unknown_target_ignored(self):
        state_map = episode.apply_bookkeeping(
            self.state_map, _action(DeprioritizeTarget(target_id="zz")), 2, "a1"
        )
        self.assertIs(state_map, self.state_map)


class EpisodeTestCase(unittest.TestCase):
    def setUp(self):
        self.scenario = parse_scenario(
            helpers.scenario_document(controllers={"enabled": ["waypoint"]})
        )

    def test_waypoint_mission_completes(self):
        result = episode.run_episode(self.scenario, seed=1)
        self.assertEqual(result.report.components.waypoints_frac, 1.0)
        self.assertLess(result.ticks_used, self.scenario.mission.max_ticks)

    def test_network_stale_ticks_drops_silent_ally(self):
        # a2 is out of radar range and every sync message is lost
        document = helpers.scenario_document(
            assets=[
                {"id": "a1", "position": [1000, 1000]},
                {"id": "a2", "position": [1000, 15000]},
            ],
            controllers={"enabled": ["swarm", "waypoint"]},
        )
        document["mission"]["max_ticks"] = 6

        def final_roster(stale_ticks):
            document["network"] = {"drop_prob": 1.0, "stale_ticks": stale_ticks}
            result = episode.run_episode(parse_scenario(document), seed=2)
            return result.final.asset("a1").roster

        self.assertEqual(final_roster(10), ["a1", "a2"])
        self.assertEqual(final_roster(3), ["a1"])

    def test_deterministic(self):
        one = episode.run_episode(self.scenario, seed=4)
        two = episode.run_episode(self.scenario, seed=4)
        self.assertEqual(
            [t.world_digest for t in one.trajectory],
            [t.world_digest for t in two.trajectory],
        )
        self.assertEqual(one.replay, two.replay)

    def test_seed_changes_trajectory(self):
        scenario = parse_scenario(helpers.scenario_document())
        params = init_params(
            np.random.default_rng(0),
            scenario.ensembler.d_h,
            2,
            episode.default_params(scenario).d_in,
            0.5,
        )
        one = episode.run_episode(scenario, params, seed=1)
        two = episode.run_episode(scenario, params, seed=2)
        self.assertNotEqual(
            [t.world_digest for t in one.trajectory],
            [t.world_digest for t in two.trajectory],
        )

    def test_params_must_fit(self):
        with self.assertRaises(EnsemblerError):
            episode.run_episode(self.scenario, zero_params(3, 4, 1))

    def test_replay_lines(self):
        result = episode.run_episode(self.scenario, seed=0)
        parsed = replay.parse_replay(
            "\n".join(utils.canonical_json(line) for line in result.replay)
        )
        self.assertEqual(parsed.header["controllers"], ["waypoint"])
        self.assertEqual(len(parsed.ticks), result.ticks_used)
        self.assertEqual(len(parsed.bus), result.ticks_used)
        self.assertEqual(parsed.result["ticks_used"], result.ticks_used)

    def test_corpus_records_result(self):
        result = episode.run_episode(self.scenario, seed=0)
        log = result.corpora["a1"].performance_log
        self.assertEqual(len(log), 1)
        self.assertEqual(log[0].report, result.report)

    def test_swarm_ledgers(self):
        scenario = parse_scenario(helpers.scenario_document(helpers.SWARM_SCENARIO))
        result = episode.run_episode(scenario, seed=3)
        secret = scenario.network.swarm_secret.encode("utf-8")
        for holder, chains in result.chains.items():
            for author in chains.authors():
                self.assertTrue(
                    verify_chain(chains.blocks(author), author_key(secret, author)),
                    f"{holder} holds a bad chain of {author}",
                )
        ledger = episode.published_ledger(result.chains)
        self.assertEqual(ledger.authors(), ["a1", "a2", "a3"])
        for aid, state_map in result.maps.items():
            allies = {e.id for e in state_map.of_kind(EntityKind.ALLIED)}
            self.assertEqual(allies, {"a1", "a2", "a3"} - {aid})


class ReplayTestCase(unittest.TestCase):
    header = {"type": "header", "controllers": ["evasion", "waypoint"]}

    def _text(self, *lines):
        return "\n".join(
            line if isinstance(line, str) else json.dumps(line) for line in lines
        )

    def _tick(self, tick, assets=("a1",), gates=(0.5, 0.5)):
        return {
            "type": "tick",
            "tick": tick,
            "utility": {"targets_frac": 0.5},
            "assets": {a: {"gates": list(gates)} for a in assets},
        }

    def test_invalid_json_line(self):
        with self.assertRaises(replay.ReplayError) as ctx:
            replay.parse_replay(self._text(self.header, "{oops"))
        self.assertEqual(ctx.exception.line, 2)

    def test_record_before_header(self):
        with self.assertRaises(replay.ReplayError) as ctx:
            replay.parse_replay(self._text(self._tick(0), self.header))
        self.assertEqual(ctx.exception.line, 1)

    def test_second_header(self):
        with self.assertRaises(replay.ReplayError):
            replay.parse_replay(self._text(self.header, self.header))

    def test_after_result(self):
        with self.assertRaises(replay.ReplayError) as ctx:
            replay.parse_replay(
                self._text(self.header, {"type": "result"}, self._tick(0))
            )
        self.assertEqual(ctx.exception.line, 3)

    def test_out_of_order(self):
        with self.assertRaises(replay.ReplayError):
            replay.parse_replay(self._text(self.header, self._tick(2), self._tick(1)))

    def test_unknown_type(self):
        with self.assertRaises(replay.ReplayError):
            replay.parse_replay(self._text(self.header, {"type": "frame"}))

    def test_metrics_rows(self):
        parsed = replay.parse_replay(
            self._text(
                self.header,
                self._tick(0, ("a1", "a2")),
                self._tick(1, ("a1",)),
                self._tick(2, ("a1", "a2")),
            )
        )
        self.assertEqual(len(replay.metrics_rows(parsed)), 5)
        rows = replay.metrics_rows(parsed, first=1, last=1)
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]["gate_waypoint"], 0.5)
        self.assertEqual(rows[0]["targets_frac"], 0.5)
        self.assertEqual(rows[0]["time_frac"], 0.0)

    def test_gate_mismatch(self):
        parsed = replay.parse_replay(self._text(self.header, self._tick(0, gates=[1])))
        with self.assertRaises(replay.ReplayError):
            replay.metrics_rows(parsed)

    def test_csv(self):
        parsed = replay.parse_replay(self._text(self.header, self._tick(0)))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "metrics.csv"
            replay.write_metrics_csv(
                replay.metrics_rows(parsed), parsed.controllers, path
            )
            lines = path.read_text().splitlines()
        self.assertEqual(
            lines[0].split(","), replay.metrics_columns(parsed.controllers)
        )
        self.assertEqual(len(lines), 2)


if __name__ == "__main__":
    unittest.main()
