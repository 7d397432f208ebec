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

import tempfile
import unittest
from pathlib import Path

import numpy as np

from autosim import utils
from autosim.controllers.actions import N_ACTIONS
from autosim.ensembler.network import (
    StepInput,
    init_params,
    param_count,
    run_sequence,
)
from autosim.simworld.episode import run_episode
from autosim.simworld.scenario import parse_scenario
from autosim.training.config import TrainConfig
from autosim.training.personality import (
    PREFIX,
    Personality,
    PersonalityError,
    PersonalityMeta,
    decode_personality,
    encode_personality,
    load_personality,
    save_personality,
)
from autosim.training.reinforce import (
    NoiseRecord,
    Rollout,
    StepNoise,
    TrainingError,
    grad_log_prob,
    log_prob,
    reinforce_update,
    rollout_stochastic,
)
from autosim.training.trainer import (
    CURVE_COLUMNS,
    evaluate_baseline,
    random_params,
    train,
    write_learning_curve,
)
from tests.unit.autosim import helpers


def _waypoint_scenario(max_ticks=20):
    document = helpers.scenario_document(controllers={"enabled": ["waypoint"]})
    document["mission"]["max_ticks"] = max_ticks
    return parse_scenario(document)


class ReinforceTestCase(unittest.TestCase):
    def setUp(self):
        self.params = init_params(np.random.default_rng(5), 4, 3, 5, 0.5)

    def test_zero_advantage_keeps_params(self):
        rng = np.random.default_rng(0)
        record = helpers.noise_record(rng, self.params, 3, 0.2, 0.1)
        batch = [Rollout(ret=0.7, noise=record), Rollout(ret=0.7, noise=record)]
        updated, baseline = reinforce_update(self.params, batch, 0.7, 0.1, 0.9)
        self.assertIs(updated, self.params)
        self.assertAlmostEqual(baseline, 0.7)

    def test_baseline_moving_average(self):
        rng = np.random.default_rng(0)
        record = helpers.noise_record(rng, self.params, 1, 0.2, 0.0)
        batch = [Rollout(ret=1.0, noise=record), Rollout(ret=3.0, noise=record)]
        _, baseline = reinforce_update(self.params, batch, None, 0.01, 0.5)
        self.assertAlmostEqual(baseline, 2.0)
        _, baseline = reinforce_update(self.params, batch, 0.0, 0.01, 0.5)
        self.assertAlmostEqual(baseline, 1.0)

    def test_empty_batch(self):
        with self.assertRaises(TrainingError):
            reinforce_update(self.params, [], None, 0.1, 0.9)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        record = helpers.noise_record(rng, self.params, 4, 0.4, 0.3)
        analytic = grad_log_prob(self.params, record)
        flat = self.params.flatten()
        h = 1e-6
        for i in range(param_count(self.params)):
            up, down = flat.copy(), flat.copy()
            up[i] += h
            down[i] -= h
            numeric = (
                log_prob(self.params.unflatten(up), record)
                - log_prob(self.params.unflatten(down), record)
            ) / (2 * h)
            self.assertLess(
                abs(numeric - analytic[i]),
                1e-4 * max(1.0, abs(analytic[i])),
                f"parameter {i}",
            )

    def test_delta_not_trained(self):
        rng = np.random.default_rng(2)
        record = helpers.noise_record(rng, self.params, 2, 0.3, 0.0)
        grad = grad_log_prob(self.params, record, include_delta=False)
        self.assertEqual(grad[-1], 0.0)
        other = helpers.noise_record(rng, self.params, 2, 0.3, 0.0)
        batch = [Rollout(ret=1.0, noise=record), Rollout(ret=0.0, noise=other)]
        updated, _ = reinforce_update(self.params, batch, None, 0.1, 0.9)
        self.assertEqual(updated.delta_max, self.params.delta_max)

    def test_rewarded_direction_gains_gate(self):
        # controller 0 turns left, controller 1 right; only gating moves the mean
        params = init_params(np.random.default_rng(3), 2, 2, 3, 0.5, delta_max=0.0)
        inputs = StepInput(
            x=np.array([1.0, 0.0, -1.0]),
            commands=np.array([[1.0, 0.5], [-1.0, 0.5]]),
            eligible=np.zeros(N_ACTIONS, dtype=bool),
        )
        (before,) = run_sequence(params, [inputs])

        def rollout(ret, turn):
            noise = np.array([turn, 0.0])
            step = StepNoise(noise, before.mean + noise, np.zeros(N_ACTIONS, bool))
            return Rollout(
                ret=ret,
                noise=NoiseRecord(
                    sigma=0.2,
                    epsilon=0.0,
                    steps={"a1": [step]},
                    inputs={"a1": [inputs]},
                ),
            )

        updated, _ = reinforce_update(
            params, [rollout(1.0, 0.3), rollout(0.0, -0.3)], None, 0.01, 0.9
        )
        (after,) = run_sequence(updated, [inputs])
        self.assertGreater(after.gates[0], before.gates[0])
        self.assertGreater(after.mean[0], before.mean[0])

    def test_gradient_clipped(self):
        rng = np.random.default_rng(4)
        batch = [
            Rollout(ret=10.0, noise=helpers.noise_record(rng, self.params, 3, 0.05, 0)),
            Rollout(ret=0.0, noise=helpers.noise_record(rng, self.params, 3, 0.05, 0)),
        ]
        updated, _ = reinforce_update(self.params, batch, None, 1.0, 0.9, 0.5)
        step = updated.flatten() - self.params.flatten()
        self.assertAlmostEqual(float(np.linalg.norm(step)), 0.5)


class RolloutTestCase(unittest.TestCase):
    def setUp(self):
        self.scenario = _waypoint_scenario()
        self.params = random_params(self.scenario, np.random.default_rng(0))

    def test_no_exploration_matches_greedy(self):
        rollout = rollout_stochastic(self.scenario, self.params, 0.0, 0.0, 11)
        greedy = run_episode(self.scenario, self.params, 11)
        self.assertEqual(
            [t.world_digest for t in rollout.result.trajectory],
            [t.world_digest for t in greedy.trajectory],
        )
        self.assertEqual(rollout.ret, greedy.report.total)

    def test_same_seed_same_draws(self):
        one = rollout_stochastic(self.scenario, self.params, 0.1, 0.2, 5)
        two = rollout_stochastic(self.scenario, self.params, 0.1, 0.2, 5)
        self.assertEqual(one.ret, two.ret)
        for a, b in zip(one.noise.steps["a1"], two.noise.steps["a1"]):
            np.testing.assert_array_equal(a.noise, b.noise)
            np.testing.assert_array_equal(a.emitted, b.emitted)

    def test_record_covers_every_decision(self):
        rollout = rollout_stochastic(self.scenario, self.params, 0.1, 0.0, 5)
        self.assertEqual(
            len(rollout.noise.steps["a1"]), len(rollout.noise.inputs["a1"])
        )
        self.assertEqual(len(rollout.noise.steps["a1"]), rollout.result.ticks_used)

    def test_shaping_adds_to_return(self):
        plain = rollout_stochastic(self.scenario, self.params, 0.0, 0.0, 5)
        shaped = rollout_stochastic(
            self.scenario, self.params, 0.0, 0.0, 5, shaping_weight=0.5
        )
        self.assertAlmostEqual(
            shaped.ret, plain.ret + 0.5 * shaped.result.shaping_total
        )


class PersonalityTestCase(unittest.TestCase):
    def setUp(self):
        params = init_params(np.random.default_rng(9), 4, 2, 6, 0.3)
        self.personality = Personality(
            meta=PersonalityMeta(
                id="p1",
                mission_type="strike",
                scenario_name="unit",
                final_mean_utility=2.5,
                config=TrainConfig(seed=4),
            ),
            params=params,
        )

    def test_round_trip(self):
        decoded = decode_personality(encode_personality(self.personality))
        self.assertEqual(decoded.meta, self.personality.meta)
        self.assertTrue(decoded.params.equals(self.personality.params))

    def test_truncated(self):
        data = encode_personality(self.personality)
        for cut in (0, 5, 20, len(data) - 1):
            with self.assertRaises(PersonalityError):
                decode_personality(data[:cut])

    def test_foreign_magic(self):
        data = encode_personality(self.personality)
        with self.assertRaises(PersonalityError):
            decode_personality(b"XXXX" + data[4:])

    def test_metadata_flip_detected(self):
        data = bytearray(encode_personality(self.personality))
        data[PREFIX.size + 3] ^= 0x01
        with self.assertRaisesRegex(PersonalityError, "checksum"):
            decode_personality(bytes(data))

    def test_incompatible_format_version(self):
        for version in ("2.0.0", "1.1.0", "not-a-version"):
            meta = self.personality.meta.model_copy(
                update={"format_version": version}
            )
            data = encode_personality(
                Personality(meta=meta, params=self.personality.params)
            )
            with self.assertRaisesRegex(PersonalityError, "format"):
                decode_personality(data)

    def test_short_format_version_accepted(self):
        meta = self.personality.meta.model_copy(update={"format_version": "1.0"})
        data = encode_personality(
            Personality(meta=meta, params=self.personality.params)
        )
        self.assertEqual(decode_personality(data).meta.format_version, "1.0")

    def test_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "p1.pers"
            save_personality(self.personality, path)
            loaded = load_personality(path)
            with self.assertRaises(PersonalityError):
                load_personality(Path(tmp) / "missing.pers")
        self.assertTrue(loaded.params.equals(self.personality.params))

    def test_record(self):
        record = self.personality.record("p1.pers")
        self.assertEqual(record.id, "p1")
        self.assertEqual(record.final_mean_utility, 2.5)
        self.assertEqual(record.path, "p1.pers")


class TrainerTestCase(unittest.TestCase):
    def setUp(self):
        self.scenario = _waypoint_scenario()

    def test_no_iterations(self):
        config = TrainConfig(iterations=0, seed=3)
        personality, curve = train(self.scenario, config)
        self.assertEqual(curve, [])
        expected = random_params(self.scenario, utils.rng_stream(3, "init"))
        self.assertTrue(personality.params.equals(expected))
        evaluation = run_episode(self.scenario, expected, 3, record=False)
        self.assertEqual(personality.meta.final_mean_utility, evaluation.report.total)
        self.assertEqual(personality.id, "unit-3")

    def test_deterministic_and_worker_independent(self):
        config = TrainConfig(iterations=2, episodes_per_iteration=2, seed=1)
        points = []
        one, curve = train(self.scenario, config, "p", progress=points.append)
        two, _ = train(self.scenario, config.model_copy(update={"workers": 2}), "p")
        self.assertTrue(one.params.equals(two.params))
        self.assertEqual([p.iteration for p in curve], [0, 1])
        self.assertEqual(points, curve)
        self.assertEqual(one.meta.iterations, 2)

    def test_best_return_monotone(self):
        config = TrainConfig(iterations=3, episodes_per_iteration=2, seed=2)
        _, curve = train(self.scenario, config)
        best = [p.best_return for p in curve]
        self.assertEqual(best, sorted(best))
        self.assertEqual(curve[0].baseline, curve[0].mean_return)

    def test_learning_curve_csv(self):
        config = TrainConfig(iterations=1, episodes_per_iteration=1)
        _, curve = train(self.scenario, config)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "curve.csv"
            write_learning_curve(curve, path)
            lines = path.read_text().splitlines()
        self.assertEqual(lines[0].split(","), CURVE_COLUMNS)
        self.assertEqual(len(lines), 2)

    def test_baseline_distribution(self):
        totals = evaluate_baseline(self.scenario, count=3, seed=1)
        self.assertEqual(len(totals), 3)
        self.assertEqual(totals, evaluate_baseline(self.scenario, count=3, seed=1))


if __name__ == "__main__":
    unittest.main()
