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
from pathlib import Path
from typing import Optional

import click
from rich.console import Console

from autosim.jobs.checks import InputFileCheck, run_preflight_checks
from autosim.jobs.common import AutosimException, LedgerInvalid
from autosim.simworld.scenario import ScenarioError, load_scenario
from autosim.swarmledger.block import LedgerError, author_key
from autosim.swarmledger.chain import (
    UnsupportedDumpVersion,
    load_dump,
    verify_encoded_chain,
)
from autosim.swarmledger.network import NetworkConfig

LOG = logging.getLogger(__name__)
console = Console()


@click.command("verify-ledger")
@click.option(
    "--ledger",
    "ledger_path",
    required=True,
    type=click.Path(path_type=Path, dir_okay=False),
    help="Ledger dump written by `autosim run`.",
)
@click.option(
    "--scenario",
    "scenario_path",
    type=click.Path(path_type=Path, dir_okay=False),
    help="Take the swarm secret from this scenario.",
)
@click.option("--secret", help="Swarm secret the authors' keys derive from.")
def verify_ledger(
    ledger_path: Path, scenario_path: Optional[Path], secret: Optional[str]
) -> None:
    """Verify every author's chain in a ledger dump.

    Exits 3 and lists (author, seq, reason) for each chain that fails.
    """
    run_preflight_checks([InputFileCheck(ledger_path, "ledger")], console)
    if secret is None:
        secret = NetworkConfig().swarm_secret
        if scenario_path is not None:
            try:
                secret = load_scenario(scenario_path).network.swarm_secret
            except (OSError, ScenarioError) as e:
                raise AutosimException(f"{scenario_path}: {e}")
    try:
        chains = load_dump(ledger_path)
    except UnsupportedDumpVersion as e:
        raise LedgerInvalid(str(e))
    except (OSError, LedgerError) as e:
        raise AutosimException(f"Cannot read ledger dump {ledger_path}: {e}")

    failures = []
    for author in sorted(chains):
        key = author_key(secret.encode("utf-8"), author)
        result = verify_encoded_chain(chains[author], key)
        if result:
            console.print(f"{author}: {len(chains[author])} blocks [green]ok[/green]")
            continue
        LOG.warning(f"Chain {author} fails at seq {result.seq}: {result.reason.value}")
        console.print(f"{author}: [red]seq {result.seq} {result.reason.value}[/red]")
        failures.append(f"{author} {result.seq} {result.reason.value}")

    if failures:
        raise LedgerInvalid("ledger verification failed: " + "; ".join(failures))
