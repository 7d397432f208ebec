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
import sys

import click

from autosim import log
from autosim.commands import export_metrics as export_metrics_cmds
from autosim.commands import replay as replay_cmds
from autosim.commands import run as run_cmds
from autosim.commands import train as train_cmds
from autosim.commands import verify_ledger as verify_ledger_cmds

LOG = logging.getLogger()

# Update the help options to allow -h in addition to --help for
# triggering the help for various commands
CONTEXT_SETTINGS = dict(help_option_names=["-h", "--help"])


@click.group("autosim", context_settings=CONTEXT_SETTINGS)
@click.option("--quiet", "-q", default=False, is_flag=True)
@click.option("--verbose", "-v", default=False, is_flag=True)
@click.pass_context
def cli(ctx, quiet, verbose):
    """Simulate autonomous air swarms flying missions.

    Each asset blends a bank of classical controllers through a learned
    recurrent ensembler, filters its actions against the mission rules of
    engagement and shares its world picture over a tamper-evident ledger.
    Fly a mission with `run`, evolve a personality with `train`, then
    inspect the outputs with `replay`, `export-metrics` and `verify-ledger`.
    """


def main():
    try:
        log.setup_root_logging()
    except click.ClickException as e:
        e.show()
        sys.exit(e.exit_code)
    cli.add_command(run_cmds.run)
    cli.add_command(train_cmds.train)
    cli.add_command(replay_cmds.replay)
    cli.add_command(export_metrics_cmds.export_metrics)
    cli.add_command(verify_ledger_cmds.verify_ledger)
    cli()


if __name__ == "__main__":
    main()
