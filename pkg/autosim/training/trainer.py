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

import concurrent.futures
import csv
import logging
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from autosim import utils
from autosim.controllers.bank import ControllerBank
from autosim.ensembler.network import EnsemblerParams, init_params, input_dim
from autosim.simworld.episode import run_episode
from autosim.simworld.scenario import Scenario
from autosim.training.config import TrainConfig
from autosim.training.personality import Personality, PersonalityMeta
from autosim.training.reinforce import Rollout, reinforce_update, rollout_stochastic

LOG = logging.getLogger(__name__)

CURVE_COLUMNS = ["iteration", "mean_return", "baseline", "best_return"]


class CurvePoint(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    iteration: int
    mean_return: float
    # the baseline the iteration's advantages were measured against
    baseline: float
    best_return: float


def random_params(scenario: Scenario, rng: np.random.Generator) -> EnsemblerParams:
    """Freshly initialised ensembler parameters sized for the scenario."""
    n = len(ControllerBank(scenario.controllers))
    d_in = input_dim(scenario.env_layout().length, n, scenario.map_layout().length)
    ens = scenario.ensembler
    return init_params(rng, ens.d_h, n, d_in, ens.init_scale, ens.delta_max)


def _rollouts(
    scenario: Scenario,
    params: EnsemblerParams,
    config: TrainConfig,
    seeds: List[int],
) -> List[Rollout]:
    def one(seed: int) -> Rollout:
        return rollout_stochastic(
            scenario,
            params,
            config.exploration_std,
            config.flip_prob,
            seed,
            shaping_weight=config.shaping_weight,
        )

    if config.workers == 1:
        return [one(seed) for seed in seeds]
    with concurrent.futures.ThreadPoolExecutor(max_workers=config.workers) as pool:
        # map keeps episode index order whatever the completion order
        return list(pool.map(one, seeds))


def train(
    scenario: Scenario,
    config: Optional[TrainConfig] = None,
    personality_id: Optional[str] = None,
    progress: Optional[Callable[[CurvePoint], None]] = None,
) -> Tuple[Personality, List[CurvePoint]]:
    """Evolve ensembler parameters for a scenario with REINFORCE.

    Each iteration flies config.episodes_per_iteration exploratory
    episodes, each on a seed derived from the master seed, then applies
    one update. The personality keeps the parameters of the iteration with
    the best mean return; its recorded utility is the deterministic
    episode on the master seed.

    :param scenario: the training scenario
    :param config: training settings, the scenario's own when omitted
    :param personality_id: id stored in the personality
    :param progress: called with every learning curve point
    :raises: TrainingError when an update fails
    """
    config = config if config is not None else scenario.training
    params = random_params(scenario, utils.rng_stream(config.seed, "init"))
    best_params = params
    best_return = None
    baseline = None
    curve: List[CurvePoint] = []

    LOG.info(
        f"Training on {scenario.name}: {config.iterations} iterations of "
        f"{config.episodes_per_iteration} episodes"
    )
    for iteration in range(config.iterations):
        seeds = [
            utils.derive_seed(config.seed, "episode", iteration, k)
            for k in range(config.episodes_per_iteration)
        ]
        batch = _rollouts(scenario, params, config, seeds)
        mean_return = float(np.mean([r.ret for r in batch]))
        if best_return is None or mean_return > best_return:
            best_return = mean_return
            best_params = params

        used_baseline = mean_return if baseline is None else baseline
        params, baseline = reinforce_update(
            params,
            batch,
            baseline,
            config.learning_rate,
            config.baseline_decay,
            config.max_grad_norm,
        )
        point = CurvePoint(
            iteration=iteration,
            mean_return=mean_return,
            baseline=used_baseline,
            best_return=best_return,
        )
        curve.append(point)
        LOG.info(
            f"Iteration {iteration}: mean return {mean_return:.4f}, "
            f"baseline {used_baseline:.4f}, best {best_return:.4f}"
        )
        if progress is not None:
            progress(point)

    evaluation = run_episode(scenario, best_params, config.seed, record=False)
    meta = PersonalityMeta(
        id=personality_id or f"{scenario.name}-{config.seed}",
        mission_type=scenario.mission.mission_type,
        scenario_name=scenario.name,
        scenario_digest=scenario.digest(),
        eval_seed=config.seed,
        final_mean_utility=evaluation.report.total,
        iterations=config.iterations,
        config=config,
    )
    return Personality(meta=meta, params=best_params), curve


def evaluate_baseline(
    scenario: Scenario, count: int = 50, seed: int = 0
) -> List[float]:
    """Utility of `count` randomly initialised personalities.

    The reference distribution trained personalities are compared against.
    """
    totals = []
    for k in range(count):
        params = random_params(scenario, utils.rng_stream(seed, "baseline", k))
        episode_seed = utils.derive_seed(seed, "baseline-episode", k)
        result = run_episode(scenario, params, episode_seed, record=False)
        totals.append(result.report.total)
    mean = float(np.mean(totals)) if totals else 0.0
    LOG.info(
        f"Random baseline on {scenario.name}: mean {mean:.4f} "
        f"over {count} personalities"
    )
    return totals


def write_learning_curve(curve: List[CurvePoint], path: Union[Path, str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CURVE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for point in curve:
            writer.writerow(point.model_dump())
