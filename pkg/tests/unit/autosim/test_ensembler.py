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
import struct
import unittest
import zlib

import numpy as np

from autosim.controllers.actions import (
    ActionKind,
    ContinuousCommand,
    ControllerProposal,
    EvasiveManeuvers,
    ProposedAction,
)
from autosim.ensembler import checkpoint
from autosim.ensembler import network as net


def _proposal(cid, heading_rate, speed_cmd=0.5, evasive=False, confidence=0.5):
    discrete = []
    if evasive:
        discrete = [ProposedAction(action=EvasiveManeuvers(), justifications=[0])]
    return ControllerProposal(
        controller_id=cid,
        continuous=ContinuousCommand(heading_rate=heading_rate, speed_cmd=speed_cmd),
        discrete=discrete,
        confidence=confidence,
    )


def _reference_step(params, h_prev, x, commands):
    """Loop-based restatement of the forward equations."""
    d_h = params.d_h
    h = np.zeros(d_h)
    for j in range(d_h):
        total = params.b[j]
        for i in range(len(x)):
            total += x[i] * params.w_in[i, j]
        for i in range(d_h):
            total += h_prev[i] * params.w_h[i, j]
        h[j] = math.tanh(total)
    scores = [
        sum(h[i] * params.w_gate[i, k] for i in range(d_h))
        for k in range(params.n_controllers)
    ]
    top = max(scores)
    exps = [math.exp(s - top) for s in scores]
    gates = np.array([e / sum(exps) for e in exps])
    mean = np.zeros(2)
    for c in range(2):
        residual = math.tanh(sum(h[i] * params.w_res[i, c] for i in range(d_h)))
        mean[c] = sum(gates[k] * commands[k][c] for k in range(len(gates)))
        mean[c] += params.delta_max * residual
    logits = np.array(
        [sum(h[i] * params.w_disc[i, a] for i in range(d_h)) for a in range(9)]
    )
    return h, gates, mean, logits


class ForwardTestCase(unittest.TestCase):
    def setUp(self):
        self.env = np.array([0.1, -0.2, 0.3])
        self.map_vec = np.array([0.5, 0.0])
        self.proposals = [_proposal("a", 0.4), _proposal("b", -0.4)]
        self.d_in = net.input_dim(3, 2, 2)

    def test_zero_params_symmetry(self):
        params = net.zero_params(self.d_in, 4, 2)
        action, gates, state = net.forward(
            params,
            net.EnsemblerState.initial(4),
            self.env,
            [_proposal("a", 0.4, evasive=True), _proposal("b", -0.4)],
            self.map_vec,
        )
        np.testing.assert_allclose(gates, [0.5, 0.5])
        self.assertAlmostEqual(action.continuous.heading_rate, 0.0)
        self.assertEqual(action.discrete, [])
        np.testing.assert_array_equal(state.hidden, np.zeros(4))

    def test_single_controller_passes_through(self):
        params = net.zero_params(net.input_dim(3, 1, 2), 4, 1, delta_max=0.0)
        proposal = _proposal("a", 0.3, speed_cmd=0.7)
        action, gates, _ = net.forward(
            params, net.EnsemblerState.initial(4), self.env, [proposal], self.map_vec
        )
        np.testing.assert_array_equal(gates, [1.0])
        self.assertEqual(action.continuous, proposal.continuous)

    def test_matches_reference(self):
        rng = np.random.default_rng(5)
        params = net.init_params(rng, 4, 2, self.d_in, 0.3)
        h_prev = rng.uniform(-0.5, 0.5, 4)
        inputs = net.assemble_input(self.env, self.proposals, self.map_vec)
        trace = net.forward_core(params, h_prev, inputs)
        h, gates, mean, logits = _reference_step(
            params, h_prev, inputs.x, inputs.commands
        )
        np.testing.assert_allclose(trace.h, h, atol=1e-10)
        np.testing.assert_allclose(trace.gates, gates, atol=1e-10)
        np.testing.assert_allclose(trace.mean, mean, atol=1e-10)
        np.testing.assert_allclose(trace.logits, logits, atol=1e-10)

    def test_emission_needs_a_proposer(self):
        params = net.zero_params(self.d_in, 4, 2)
        w_disc = np.zeros_like(params.w_disc)
        w_disc[:, :] = 1.0
        params = net.EnsemblerParams(
            w_in=params.w_in,
            b=np.ones(4),
            w_h=params.w_h,
            w_gate=params.w_gate,
            w_res=params.w_res,
            w_disc=w_disc,
        )
        action, _, _ = net.forward(
            params,
            net.EnsemblerState.initial(4),
            self.env,
            [_proposal("a", 0.4, evasive=True), _proposal("b", -0.4)],
            self.map_vec,
        )
        self.assertEqual(action.kinds(), [ActionKind.EVASIVE_MANEUVERS])
        self.assertEqual(action.discrete[0].controllers, ["a"])

    def test_unordered_proposals(self):
        with self.assertRaises(net.EnsemblerError):
            net.assemble_input(self.env, list(reversed(self.proposals)), self.map_vec)

    def test_dimension_mismatch(self):
        params = net.zero_params(self.d_in + 1, 4, 2)
        with self.assertRaises(net.EnsemblerError):
            net.forward(
                params,
                net.EnsemblerState.initial(4),
                self.env,
                self.proposals,
                self.map_vec,
            )

    def test_output_within_bounds(self):
        rng = np.random.default_rng(9)
        params = net.init_params(rng, 4, 2, self.d_in, 2.0, delta_max=3.0)
        action, _, _ = net.forward(
            params,
            net.EnsemblerState.initial(4),
            self.env,
            [_proposal("a", 1.0, 1.0), _proposal("b", 1.0, 1.0)],
            self.map_vec,
        )
        self.assertLessEqual(abs(action.continuous.heading_rate), 1.0)
        self.assertLessEqual(action.continuous.speed_cmd, 1.0)


class ParamsTestCase(unittest.TestCase):
    def test_init_deterministic(self):
        one = net.init_params(np.random.default_rng(7), 8, 5, 160, 0.1)
        two = net.init_params(np.random.default_rng(7), 8, 5, 160, 0.1)
        self.assertTrue(one.equals(two))

    def test_init_bound(self):
        params = net.init_params(np.random.default_rng(7), 8, 5, 160, 0.1)
        arrays = np.concatenate([a.ravel() for a in params.arrays()])
        self.assertLessEqual(np.max(np.abs(arrays)), 0.1)

    def test_init_seeds_differ(self):
        one = net.init_params(np.random.default_rng(1), 8, 5, 160, 0.1)
        two = net.init_params(np.random.default_rng(2), 8, 5, 160, 0.1)
        self.assertFalse(one.equals(two))

    def test_non_positive_scale(self):
        with self.assertRaises(net.EnsemblerError):
            net.init_params(np.random.default_rng(1), 8, 5, 160, 0.0)

    def test_param_count(self):
        params = net.zero_params(160, 8, 5)
        expected = 160 * 8 + 8 + 8 * 8 + 8 * 5 + 8 * 2 + 8 * 9 + 1
        self.assertEqual(net.param_count(params), expected)
        self.assertEqual(params.flatten().size, expected)
        self.assertEqual(net.describe(params)["param_count"], expected)

    def test_unflatten_round_trip(self):
        params = net.init_params(np.random.default_rng(3), 4, 2, 10, 0.5)
        self.assertTrue(params.unflatten(params.flatten()).equals(params))

    def test_unflatten_wrong_size(self):
        with self.assertRaises(net.EnsemblerError):
            net.zero_params(10, 4, 2).unflatten(np.zeros(3))

    def test_negative_delta(self):
        with self.assertRaises(net.EnsemblerError):
            net.zero_params(10, 4, 2, delta_max=-0.1)


class BackwardTestCase(unittest.TestCase):
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(21)
        d_in, d_h, n = 6, 4, 2
        params = net.init_params(rng, d_h, n, d_in, 0.5)
        steps = [
            net.StepInput(
                x=rng.uniform(-1, 1, d_in),
                commands=rng.uniform(0, 1, (n, 2)),
                eligible=np.ones(9, dtype=bool),
            )
            for _ in range(3)
        ]
        d_means = [rng.normal(size=2) for _ in steps]
        d_logits = [rng.normal(size=9) for _ in steps]

        def loss(p):
            return sum(
                dm @ t.mean + dl @ t.logits
                for t, dm, dl in zip(net.run_sequence(p, steps), d_means, d_logits)
            )

        grad = net.backward(params, net.run_sequence(params, steps), d_means, d_logits)
        flat = params.flatten()
        eps = 1e-6
        numeric = np.zeros_like(flat)
        for i in range(flat.size):
            up, down = flat.copy(), flat.copy()
            up[i] += eps
            down[i] -= eps
            numeric[i] = (loss(params.unflatten(up)) - loss(params.unflatten(down))) / (
                2 * eps
            )
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-7)

    def test_delta_excluded(self):
        rng = np.random.default_rng(2)
        params = net.init_params(rng, 3, 1, 4, 0.5)
        step = net.StepInput(
            x=np.ones(4), commands=np.ones((1, 2)), eligible=np.zeros(9, dtype=bool)
        )
        grad = net.backward(
            params,
            net.run_sequence(params, [step]),
            [np.ones(2)],
            [np.zeros(9)],
            include_delta=False,
        )
        self.assertEqual(grad[-1], 0.0)


class CheckpointTestCase(unittest.TestCase):
    def setUp(self):
        self.params = net.init_params(np.random.default_rng(4), 3, 2, 5, 0.2)

    def test_round_trip_bit_exact(self):
        loaded = checkpoint.deserialize(checkpoint.serialize(self.params, seed=42))
        self.assertEqual(loaded.seed, 42)
        self.assertEqual(loaded.version, checkpoint.FORMAT_VERSION)
        self.assertEqual(
            loaded.params.flatten().tobytes(), self.params.flatten().tobytes()
        )

    def test_any_flipped_byte_detected(self):
        data = checkpoint.serialize(self.params)
        for i in range(len(data)):
            corrupt = bytearray(data)
            corrupt[i] ^= 0x01
            with self.assertRaises(checkpoint.CheckpointError, msg=f"byte {i}"):
                checkpoint.deserialize(bytes(corrupt))

    def test_truncated(self):
        data = checkpoint.serialize(self.params)
        for size in (0, 10, len(data) - 1):
            with self.assertRaises(checkpoint.CheckpointError):
                checkpoint.deserialize(data[:size])

    def test_newer_major_version(self):
        data = checkpoint.serialize(self.params)
        body = bytearray(data[: -checkpoint.TRAILER.size])
        struct.pack_into("<H", body, 4, 2)
        forged = bytes(body) + checkpoint.TRAILER.pack(zlib.crc32(bytes(body)))
        with self.assertRaises(checkpoint.CheckpointError) as ctx:
            checkpoint.deserialize(forged)
        self.assertIn("not supported", str(ctx.exception))


if __name__ == "__main__":
    unittest.main()
