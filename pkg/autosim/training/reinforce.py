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

"""Stochastic rollouts and the score-function (REINFORCE) update.

Exploration perturbs the continuous mean with Gaussian noise of std σ
before clamping, and re-draws each eligible discrete decision from
Bernoulli(sigmoid(logit)) with probability ε instead of the threshold
rule, so P(emit) = (1 − ε)·[logit > 0] + ε·sigmoid(logit).
"""

import dataclasses
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from autosim import utils
from autosim.ensembler.network import (
    EnsemblerParams,
    StepInput,
    StepTrace,
    backward,
    clip_command,
    run_sequence,
    sigmoid,
)
from autosim.simworld.episode import EpisodeResult, run_episode
from autosim.simworld.mission import neutralized_ids
from autosim.simworld.scenario import Scenario
from autosim.simworld.state import WorldState

LOG = logging.getLogger(__name__)


class TrainingError(Exception):
    """Raised when an update cannot be applied, e.g. a non-finite gradient."""

    pass


@dataclasses.dataclass(frozen=True, eq=False)
class StepNoise:
    noise: np.ndarray
    # pre-clamp sampled command, mean + noise
    action: np.ndarray
    emitted: np.ndarray


@dataclasses.dataclass(eq=False)
class NoiseRecord:
    """Everything needed to recompute log π of one rollout's decisions."""

    sigma: float
    epsilon: float
    steps: Dict[str, List[StepNoise]]
    inputs: Dict[str, List[StepInput]]

    def assets(self) -> List[str]:
        return sorted(self.steps)


class ExplorationPolicy:
    """Samples actions around the ensembler outputs and records the draws."""

    def __init__(self, rng: np.random.Generator, sigma: float, epsilon: float):
        self.rng = rng
        self.sigma = sigma
        self.epsilon = epsilon
        self.steps: Dict[str, List[StepNoise]] = {}

    def decide(self, asset_id: str, trace: StepTrace) -> Tuple[np.ndarray, np.ndarray]:
        n_kinds = trace.logits.shape[0]
        if self.sigma > 0.0:
            noise = self.rng.normal(0.0, self.sigma, size=trace.mean.shape)
        else:
            noise = np.zeros_like(trace.mean)
        emitted = trace.logits > 0.0
        if self.epsilon > 0.0:
            flip = self.rng.random(n_kinds) < self.epsilon
            draw = self.rng.random(n_kinds) < sigmoid(trace.logits)
            emitted = np.where(flip, draw, emitted)
        action = trace.mean + noise
        emitted = emitted & trace.inputs.eligible
        self.steps.setdefault(asset_id, []).append(StepNoise(noise, action, emitted))
        return clip_command(action), emitted


@dataclasses.dataclass(eq=False)
class Rollout:
    ret: float
    noise: NoiseRecord
    result: Optional[EpisodeResult] = None


def progress_shaping(before: WorldState, after: WorldState) -> float:
    """Per-tick progress: waypoints captured plus kills minus losses."""
    captured = sum(a.next_waypoint for a in after.assets) - sum(
        a.next_waypoint for a in before.assets
    )
    killed = len(neutralized_ids(after)) - len(neutralized_ids(before))
    lost = sum(1 for a in before.assets if a.alive) - sum(
        1 for a in after.assets if a.alive
    )
    return float(captured + killed - lost)


def rollout_stochastic(
    scenario: Scenario,
    params: EnsemblerParams,
    sigma: float,
    epsilon: float,
    seed: int,
    shaping_weight: float = 0.0,
    shaping: Callable[[WorldState, WorldState], float] = progress_shaping,
    record: bool = False,
) -> Rollout:
    """One exploratory episode.

    With σ = 0 and ε = 0 the episode is identical to run_episode.

    :return: the rollout, whose return is the final utility total plus
             the weighted shaping sum
    """
    policy = ExplorationPolicy(utils.rng_stream(seed, "exploration"), sigma, epsilon)
    result = run_episode(
        scenario,
        params,
        seed,
        policy=policy,
        record=record,
        shaping=shaping if shaping_weight > 0.0 else None,
    )
    ret = result.report.total + shaping_weight * result.shaping_total
    noise = NoiseRecord(
        sigma=sigma, epsilon=epsilon, steps=policy.steps, inputs=result.inputs
    )
    return Rollout(ret=ret, noise=noise, result=result)


def _emit_probability(logits: np.ndarray, epsilon: float) -> np.ndarray:
    return (1.0 - epsilon) * (logits > 0.0) + epsilon * sigmoid(logits)


def log_prob(params: EnsemblerParams, record: NoiseRecord) -> float:
    """log π of the recorded decisions, up to a parameter-free constant."""
    total = 0.0
    for asset in record.assets():
        traces = run_sequence(params, record.inputs[asset])
        for trace, step in zip(traces, record.steps[asset]):
            if record.sigma > 0.0:
                drawn = step.action - trace.mean
                total -= float(drawn @ drawn) / (2.0 * record.sigma**2)
            if record.epsilon > 0.0:
                p = _emit_probability(trace.logits, record.epsilon)
                eligible = trace.inputs.eligible
                chosen = np.where(step.emitted, p, 1.0 - p)[eligible]
                total += float(np.sum(np.log(chosen)))
    return total


def _discrete_score(
    logits: np.ndarray, emitted: np.ndarray, eligible: np.ndarray, epsilon: float
) -> np.ndarray:
    """d log P / d logit for every kind, zero where the kind was not eligible."""
    if epsilon <= 0.0:
        return np.zeros_like(logits)
    s = sigmoid(logits)
    slope = epsilon * s * (1.0 - s)
    p = _emit_probability(logits, epsilon)
    score = np.zeros_like(logits)
    for k in range(logits.shape[0]):
        if not eligible[k]:
            continue
        if emitted[k] and p[k] > 0.0:
            score[k] = slope[k] / p[k]
        elif not emitted[k] and p[k] < 1.0:
            score[k] = -slope[k] / (1.0 - p[k])
    return score


def grad_log_prob(
    params: EnsemblerParams, record: NoiseRecord, include_delta: bool = True
) -> np.ndarray:
    """Analytic ∇ log π over every asset's decision sequence."""
    grad = np.zeros(params.flatten().shape)
    for asset in record.assets():
        traces = run_sequence(params, record.inputs[asset])
        steps = record.steps[asset]
        if record.sigma > 0.0:
            d_means = [
                (step.action - trace.mean) / record.sigma**2
                for trace, step in zip(traces, steps)
            ]
        else:
            d_means = [np.zeros_like(trace.mean) for trace in traces]
        d_logits = [
            _discrete_score(
                trace.logits, step.emitted, trace.inputs.eligible, record.epsilon
            )
            for trace, step in zip(traces, steps)
        ]
        grad += backward(params, traces, d_means, d_logits, include_delta)
    return grad


def reinforce_update(
    params: EnsemblerParams,
    batch: Sequence[Rollout],
    baseline: Optional[float],
    learning_rate: float,
    baseline_decay: float,
    max_grad_norm: Optional[float] = None,
) -> Tuple[EnsemblerParams, float]:
    """One REINFORCE step with a moving-average baseline.

    g = mean over the batch of (R − b)·∇ log π; params' = params + lr·g and
    b' = β·b + (1 − β)·mean(R). δ_max is not trained. A missing baseline
    starts at the batch mean.

    :param batch: rollouts in episode index order
    :raises: TrainingError for an empty batch or a non-finite gradient
    """
    if not batch:
        raise TrainingError("reinforce_update needs at least one rollout")
    returns = np.array([r.ret for r in batch], dtype=np.float64)
    mean_return = float(np.mean(returns))
    b = mean_return if baseline is None else baseline
    new_baseline = baseline_decay * b + (1.0 - baseline_decay) * mean_return
    advantages = returns - b
    if not np.any(advantages):
        return params, new_baseline

    grad = np.zeros(params.flatten().shape)
    for advantage, rollout in zip(advantages, batch):
        if advantage:
            grad += advantage * grad_log_prob(
                params, rollout.noise, include_delta=False
            )
    grad /= len(batch)

    bad = int(np.count_nonzero(~np.isfinite(grad)))
    if bad:
        raise TrainingError(
            f"non-finite gradient in {bad} of {grad.size} entries; returns "
            f"{returns.tolist()}, baseline {b}"
        )
    norm = float(np.linalg.norm(grad))
    if max_grad_norm is not None and norm > max_grad_norm:
        LOG.debug(f"Clipping gradient norm {norm:.4g} to {max_grad_norm}")
        grad *= max_grad_norm / norm
    if not math.isfinite(new_baseline):
        raise TrainingError(f"baseline became non-finite from returns {returns}")

    updated = params.unflatten(params.flatten() + learning_rate * grad)
    return updated, new_baseline
