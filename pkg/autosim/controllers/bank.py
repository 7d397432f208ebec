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

import logging
from typing import List

from autosim.controllers.actions import ControllerProposal
from autosim.controllers.avoidance import AvoidanceController
from autosim.controllers.base import (
    BaseController,
    ControllerContext,
    ControllersConfig,
)
from autosim.controllers.evasion import EvasionController
from autosim.controllers.swarm import SwarmController
from autosim.controllers.targeting import TargetingController
from autosim.controllers.waypoint import WaypointController

LOG = logging.getLogger(__name__)

CONTROLLER_TYPES = {
    cls.controller_id: cls
    for cls in (
        AvoidanceController,
        EvasionController,
        SwarmController,
        TargetingController,
        WaypointController,
    )
}


class ControllerBank:
    """The enabled controllers, always evaluated in controller-id order."""

    def __init__(self, config: ControllersConfig):
        self.config = config
        self.controllers: List[BaseController] = [
            CONTROLLER_TYPES[cid](config) for cid in sorted(set(config.enabled))
        ]

    @property
    def ids(self) -> List[str]:
        return [c.controller_id for c in self.controllers]

    def __len__(self) -> int:
        return len(self.controllers)

    def propose(self, ctx: ControllerContext) -> List[ControllerProposal]:
        proposals = [controller.propose(ctx) for controller in self.controllers]
        if not LOG.isEnabledFor(logging.DEBUG):
            return proposals
        LOG.debug(
            f"{ctx.own.id} tick {ctx.snapshot.tick}: "
            + ", ".join(
                f"{p.controller_id}[{','.join(k.value for k in p.kinds())}]"
                for p in proposals
            )
        )
        return proposals
