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

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class TrainConfig(BaseModel):
    """The `training` section of a scenario, overridable from the CLI."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    iterations: int = Field(default=300, ge=0)
    episodes_per_iteration: int = Field(default=8, ge=1)
    learning_rate: float = Field(default=0.05, gt=0.0)
    exploration_std: float = Field(default=0.1, ge=0.0)
    flip_prob: float = Field(default=0.1, ge=0.0, le=1.0)
    baseline_decay: float = Field(default=0.9, ge=0.0, lt=1.0)
    seed: int = 0
    max_grad_norm: Optional[float] = Field(default=10.0, gt=0.0)
    shaping_weight: float = Field(default=0.0, ge=0.0)
    workers: int = Field(default=1, ge=1)
