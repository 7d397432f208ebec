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

"""The recurrent action optimizer.

A single tanh recurrent layer reads the environment vector, the flattened
controller proposals and the encoded state map. A softmax gate over the
controllers makes the continuous command a convex combination of their
proposals, a bounded residual lets the network leave that hull by at most
δ_max, and one logit per discrete kind decides which proposed actions are
emitted. Vectors are rows: pre = x·W_in + h·W_h + b.
"""

import dataclasses
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from autosim.controllers.actions import (
    ACTION_KINDS,
    N_ACTIONS,
    ActionVector,
    ContinuousCommand,
    ControllerProposal,
    EmittedAction,
)

LOG = logging.getLogger(__name__)

# heading_rate, speed_cmd, confidence, 9-bit mask
PROPOSAL_FIELDS = 3 + N_ACTIONS
N_CONTINUOUS = 2
LOW = np.array([-1.0, 0.0])
HIGH = np.array([1.0, 1.0])


class EnsemblerError(Exception):
    """Raised for inconsistent parameters or inputs."""

    pass


@dataclasses.dataclass(frozen=True, eq=False)
class EnsemblerParams:
    w_in: np.ndarray
    b: np.ndarray
    w_h: np.ndarray
    w_gate: np.ndarray
    w_res: np.ndarray
    w_disc: np.ndarray
    delta_max: float = 0.25

    ARRAYS = ("w_in", "b", "w_h", "w_gate", "w_res", "w_disc")

    def __post_init__(self):
        if self.w_in.ndim != 2 or self.w_gate.ndim != 2:
            raise EnsemblerError("w_in and w_gate must be matrices")
        d_h = self.w_in.shape[1]
        expected = {
            "b": (d_h,),
            "w_h": (d_h, d_h),
            "w_gate": (d_h, self.w_gate.shape[1]),
            "w_res": (d_h, N_CONTINUOUS),
            "w_disc": (d_h, N_ACTIONS),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise EnsemblerError(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape}"
                )
        if self.w_gate.shape[1] < 1:
            raise EnsemblerError("the ensembler needs at least one controller")
        if not self.delta_max >= 0.0:
            raise EnsemblerError(f"delta_max must be >= 0, got {self.delta_max}")
        if not np.all(np.isfinite(self.flatten())):
            raise EnsemblerError("parameters must be finite")

    @property
    def d_in(self) -> int:
        return self.w_in.shape[0]

    @property
    def d_h(self) -> int:
        return self.w_in.shape[1]

    @property
    def n_controllers(self) -> int:
        return self.w_gate.shape[1]

    def arrays(self) -> List[np.ndarray]:
        return [getattr(self, name) for name in self.ARRAYS]

    def flatten(self) -> np.ndarray:
        """All parameters as one vector, delta_max last."""
        parts = [a.ravel() for a in self.arrays()]
        return np.concatenate(parts + [np.array([self.delta_max], dtype=np.float64)])

    def unflatten(self, flat: np.ndarray) -> "EnsemblerParams":
        """Parameters of the same dimensions taken from a flat vector."""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (param_count(self),):
            raise EnsemblerError(
                f"expected {param_count(self)} parameters, got {flat.shape}"
            )
        values = {}
        offset = 0
        for name, array in zip(self.ARRAYS, self.arrays()):
            values[name] = flat[offset : offset + array.size].reshape(array.shape)
            offset += array.size
        return EnsemblerParams(delta_max=float(flat[offset]), **values)

    def equals(self, other: "EnsemblerParams") -> bool:
        return np.array_equal(self.flatten(), other.flatten()) and (
            self.w_in.shape == other.w_in.shape
            and self.w_gate.shape == other.w_gate.shape
        )


def param_count(params: EnsemblerParams) -> int:
    """d_in·d_h + d_h + d_h² + d_h·n + 2·d_h + 9·d_h + 1."""
    d_in, d_h, n = params.d_in, params.d_h, params.n_controllers
    return d_in * d_h + d_h + d_h * d_h + d_h * n + 2 * d_h + N_ACTIONS * d_h + 1


def input_dim(env_len: int, n_controllers: int, map_len: int) -> int:
    return env_len + n_controllers * PROPOSAL_FIELDS + map_len


def zero_params(
    d_in: int, d_h: int, n_controllers: int, delta_max: float = 0.25
) -> EnsemblerParams:
    return EnsemblerParams(
        w_in=np.zeros((d_in, d_h)),
        b=np.zeros(d_h),
        w_h=np.zeros((d_h, d_h)),
        w_gate=np.zeros((d_h, n_controllers)),
        w_res=np.zeros((d_h, N_CONTINUOUS)),
        w_disc=np.zeros((d_h, N_ACTIONS)),
        delta_max=delta_max,
    )


def init_params(
    rng: np.random.Generator,
    d_h: int,
    n_controllers: int,
    d_in: int,
    scale: float,
    delta_max: float = 0.25,
) -> EnsemblerParams:
    """Weights drawn i.i.d. uniform in [-scale, scale].

    :raises: EnsemblerError when scale is not positive
    """
    if not scale > 0.0:
        raise EnsemblerError(f"init scale must be positive, got {scale}")
    template = zero_params(d_in, d_h, n_controllers, delta_max)
    values = {
        name: rng.uniform(-scale, scale, size=array.shape)
        for name, array in zip(template.ARRAYS, template.arrays())
    }
    return EnsemblerParams(delta_max=delta_max, **values)


@dataclasses.dataclass(frozen=True, eq=False)
class EnsemblerState:
    """Hidden state carried between ticks; all zero at episode start."""

    hidden: np.ndarray

    @classmethod
    def initial(cls, d_h: int) -> "EnsemblerState":
        return cls(hidden=np.zeros(d_h))


@dataclasses.dataclass(frozen=True, eq=False)
class StepInput:
    """The parameter-independent inputs of one forward step."""

    x: np.ndarray
    # n × 2 continuous proposals
    commands: np.ndarray
    # kinds proposed by at least one controller
    eligible: np.ndarray


@dataclasses.dataclass(frozen=True, eq=False)
class StepTrace:
    """Intermediate values of one forward step, kept for backprop."""

    inputs: StepInput
    h_prev: np.ndarray
    h: np.ndarray
    gates: np.ndarray
    residual: np.ndarray
    # unclipped continuous mean
    mean: np.ndarray
    logits: np.ndarray


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - np.max(z)
    e = np.exp(shifted)
    return e / np.sum(e)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def assemble_input(
    env_vec: np.ndarray,
    proposals: Sequence[ControllerProposal],
    map_vec: np.ndarray,
) -> StepInput:
    """Flatten the tick's inputs in the fixed controller order."""
    ids = [p.controller_id for p in proposals]
    if ids != sorted(ids) or len(set(ids)) != len(ids):
        raise EnsemblerError(f"proposals must be in controller-id order, got {ids}")
    blocks = []
    commands = np.zeros((len(proposals), N_CONTINUOUS))
    eligible = np.zeros(N_ACTIONS, dtype=bool)
    for k, proposal in enumerate(proposals):
        mask = np.array(proposal.mask())
        commands[k] = (proposal.continuous.heading_rate, proposal.continuous.speed_cmd)
        eligible |= mask > 0.0
        blocks.append(np.concatenate([commands[k], [proposal.confidence], mask]))
    x = np.concatenate(
        [np.asarray(env_vec, dtype=np.float64)]
        + blocks
        + [np.asarray(map_vec, dtype=np.float64)]
    )
    return StepInput(x=x, commands=commands, eligible=eligible)


def forward_core(
    params: EnsemblerParams, h_prev: np.ndarray, inputs: StepInput
) -> StepTrace:
    """The forward equations for one tick."""
    if inputs.x.shape != (params.d_in,):
        raise EnsemblerError(
            f"input has {inputs.x.shape[0]} entries, parameters expect {params.d_in}"
        )
    if inputs.commands.shape[0] != params.n_controllers:
        raise EnsemblerError(
            f"{inputs.commands.shape[0]} proposals for "
            f"{params.n_controllers} gated controllers"
        )
    h = np.tanh(inputs.x @ params.w_in + h_prev @ params.w_h + params.b)
    gates = softmax(h @ params.w_gate)
    residual = np.tanh(h @ params.w_res)
    mean = gates @ inputs.commands + params.delta_max * residual
    logits = h @ params.w_disc
    return StepTrace(
        inputs=inputs,
        h_prev=h_prev,
        h=h,
        gates=gates,
        residual=residual,
        mean=mean,
        logits=logits,
    )


def clip_command(values: np.ndarray) -> np.ndarray:
    return np.clip(values, LOW, HIGH)


def emitted_kinds(trace: StepTrace) -> np.ndarray:
    """Deterministic emission: logit > 0 and proposed by a controller."""
    return (trace.logits > 0.0) & trace.inputs.eligible


def decode_action(
    command: np.ndarray,
    emitted: np.ndarray,
    proposals: Sequence[ControllerProposal],
    gates: np.ndarray,
) -> ActionVector:
    """Build the ActionVector for a continuous command and emitted kinds.

    The parameters of an emitted kind come from the proposer with the
    highest gate weight, ties going to the lower controller id; every
    proposer of the kind is listed in the provenance.
    """
    continuous = ContinuousCommand.clipped(command[0], command[1])
    discrete = []
    for kind in ACTION_KINDS:
        if not emitted[kind.index]:
            continue
        proposers = [(k, p) for k, p in enumerate(proposals) if p.of_kind(kind)]
        if not proposers:
            continue
        _, chosen = min(
            proposers, key=lambda kp: (-gates[kp[0]], kp[1].controller_id)
        )
        names = [p.controller_id for _, p in proposers]
        for proposed in chosen.of_kind(kind):
            discrete.append(
                EmittedAction(
                    action=proposed.action,
                    controllers=names,
                    justifications=proposed.justifications,
                )
            )
    return ActionVector(continuous=continuous, discrete=discrete)


def forward(
    params: EnsemblerParams,
    state: EnsemblerState,
    env_vec: np.ndarray,
    proposals: Sequence[ControllerProposal],
    map_vec: np.ndarray,
) -> Tuple[ActionVector, np.ndarray, EnsemblerState]:
    """One deterministic step of the ensembler.

    :return: the action, the gate weights and the next hidden state
    :raises: EnsemblerError on dimension mismatch or unordered proposals
    """
    inputs = assemble_input(env_vec, proposals, map_vec)
    trace = forward_core(params, state.hidden, inputs)
    action = decode_action(
        clip_command(trace.mean), emitted_kinds(trace), proposals, trace.gates
    )
    return action, trace.gates, EnsemblerState(hidden=trace.h)


def backward(
    params: EnsemblerParams,
    traces: Sequence[StepTrace],
    d_means: Sequence[np.ndarray],
    d_logits: Sequence[np.ndarray],
    include_delta: bool = True,
) -> np.ndarray:
    """Backpropagation through time of a loss linear in means and logits.

    For L = Σₜ d_meansₜ·meanₜ + d_logitsₜ·logitsₜ over one sequence of
    steps, returns ∂L/∂params as a flat vector in flatten() order.
    """
    g_w_in = np.zeros_like(params.w_in)
    g_b = np.zeros_like(params.b)
    g_w_h = np.zeros_like(params.w_h)
    g_w_gate = np.zeros_like(params.w_gate)
    g_w_res = np.zeros_like(params.w_res)
    g_w_disc = np.zeros_like(params.w_disc)
    g_delta = 0.0

    carry = np.zeros(params.d_h)
    for t in range(len(traces) - 1, -1, -1):
        trace = traces[t]
        d_mean = np.asarray(d_means[t], dtype=np.float64)
        d_logit = np.asarray(d_logits[t], dtype=np.float64)
        dh = carry.copy()

        d_gates = trace.inputs.commands @ d_mean
        d_gate_pre = trace.gates * (d_gates - trace.gates @ d_gates)
        g_w_gate += np.outer(trace.h, d_gate_pre)
        dh += params.w_gate @ d_gate_pre

        g_delta += float(d_mean @ trace.residual)
        d_res_pre = params.delta_max * d_mean * (1.0 - trace.residual**2)
        g_w_res += np.outer(trace.h, d_res_pre)
        dh += params.w_res @ d_res_pre

        g_w_disc += np.outer(trace.h, d_logit)
        dh += params.w_disc @ d_logit

        d_pre = dh * (1.0 - trace.h**2)
        g_w_in += np.outer(trace.inputs.x, d_pre)
        g_w_h += np.outer(trace.h_prev, d_pre)
        g_b += d_pre
        carry = params.w_h @ d_pre

    parts = [g_w_in, g_b, g_w_h, g_w_gate, g_w_res, g_w_disc]
    tail = np.array([g_delta if include_delta else 0.0])
    return np.concatenate([p.ravel() for p in parts] + [tail])


def run_sequence(
    params: EnsemblerParams,
    inputs: Sequence[StepInput],
    h0: Optional[np.ndarray] = None,
) -> List[StepTrace]:
    """Replay a sequence of recorded inputs through the network."""
    h = np.zeros(params.d_h) if h0 is None else h0
    traces = []
    for step in inputs:
        trace = forward_core(params, h, step)
        traces.append(trace)
        h = trace.h
    return traces


def describe(params: EnsemblerParams) -> Dict[str, int]:
    return {
        "d_in": params.d_in,
        "d_h": params.d_h,
        "n_controllers": params.n_controllers,
        "param_count": param_count(params),
    }
