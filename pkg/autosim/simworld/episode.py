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

"""Closed-loop mission episodes.

Per tick, each active asset in id order senses, publishes its bus
snapshot, updates its own map, collects controller proposals, runs the
ensembler, filters the action, applies the bookkeeping actions to its map
and appends a ledger block. The swarm then gossips, every map merges the
new blocks and the world steps.
"""

import dataclasses
import logging
import math
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from autosim import utils
from autosim.actionfilter.gate import AuditLog, filter_action
from autosim.controllers.actions import ActionKind, ActionVector
from autosim.controllers.bank import ControllerBank
from autosim.controllers.base import ControllerContext, SelfState
from autosim.controllers.swarm import survivors
from autosim.ensembler.network import (
    EnsemblerError,
    EnsemblerParams,
    StepInput,
    StepTrace,
    assemble_input,
    clip_command,
    decode_action,
    emitted_kinds,
    forward_core,
    input_dim,
    zero_params,
)
from autosim.sensorbus.bus import BusSnapshot, build_env_vector, publish
from autosim.sensorbus.records import ContactReport
from autosim.sensorbus.sensors import sense
from autosim.simworld.dynamics import active_path, step
from autosim.simworld.mission import (
    EpisodeHistory,
    UtilityReport,
    compute_utility,
    neutralized_ids,
    utility_components,
)
from autosim.simworld.scenario import Scenario
from autosim.simworld.state import AssetState, WorldState
from autosim.statemap.corpus import (
    CognitiveCorpus,
    PersonalityRecord,
    corpus_record_performance,
    new_corpus,
    register_personality,
)
from autosim.statemap.encoding import encode_state_map
from autosim.statemap.entity import (
    Entity,
    EntityKind,
    StateMap,
    new_state_map,
    replace_entity,
    upsert_entity,
)
from autosim.swarmledger.block import author_key
from autosim.swarmledger.chain import ChainSet, append_block
from autosim.swarmledger.network import NetSim
from autosim.swarmledger.sync import applied_lengths, gossip_round, merge_into_statemap

LOG = logging.getLogger(__name__)

BRIEF_AUTHOR = ""
CONTACT_KINDS = {k.value: k for k in EntityKind if k != EntityKind.SELF_ASSET}
# enter a map only through AddNewTarget, AddObstacle or the brief
REPORTED_KINDS = (EntityKind.TARGET, EntityKind.OBSTACLE, EntityKind.NO_FLY_ZONE)


class GreedyPolicy:
    """Deterministic decisions: clipped mean, emit where the logit is positive."""

    def decide(self, asset_id: str, trace: StepTrace) -> Tuple[np.ndarray, np.ndarray]:
        return clip_command(trace.mean), emitted_kinds(trace)


@dataclasses.dataclass(eq=False)
class TickRecord:
    tick: int
    world_digest: str
    actions: Dict[str, ActionVector]
    gates: Dict[str, List[float]]


@dataclasses.dataclass(eq=False)
class EpisodeResult:
    trajectory: List[TickRecord]
    report: UtilityReport
    audit: AuditLog
    chains: Dict[str, ChainSet]
    initial: WorldState
    final: WorldState
    maps: Dict[str, StateMap]
    corpora: Dict[str, CognitiveCorpus]
    replay: List[dict]
    inputs: Dict[str, List[StepInput]]
    shaping_total: float = 0.0

    @property
    def ticks_used(self) -> int:
        return self.final.tick


def initial_map(scenario: Scenario, world: WorldState, asset: AssetState) -> StateMap:
    """The mission brief as seen by one asset at tick 0.

    Briefed targets, zones, waypoints and swarm members are known;
    obstacles and unbriefed targets are not.
    """
    state_map = new_state_map(
        Entity(
            id=asset.id,
            kind=EntityKind.SELF_ASSET,
            position=asset.position,
            heading=asset.heading,
            author=asset.id,
        )
    )
    briefed = []
    for other in world.assets:
        if other.id != asset.id:
            briefed.append(
                Entity(
                    id=other.id,
                    kind=EntityKind.ALLIED,
                    position=other.position,
                    heading=other.heading,
                    classification="ally",
                    author=BRIEF_AUTHOR,
                )
            )
    targets = {t.id: t for t in world.targets}
    sites = {s.id: s for s in world.sam_sites}
    for briefed_target in scenario.mission.target_list:
        truth = targets.get(briefed_target.id)
        position = truth.position if truth else sites[briefed_target.id].position
        briefed.append(
            Entity(
                id=briefed_target.id,
                kind=EntityKind.TARGET,
                position=position,
                classification=truth.classification if truth else "SAM",
                priority=briefed_target.priority,
                author=BRIEF_AUTHOR,
            )
        )
    for zone in world.zones:
        briefed.append(zone.model_copy(update={"author": BRIEF_AUTHOR}))
    for index, point in enumerate(scenario.mission.waypoints):
        briefed.append(
            Entity(
                id=f"wp{index}",
                kind=EntityKind.WAYPOINT,
                position=point,
                author=BRIEF_AUTHOR,
            )
        )
    for entity in briefed:
        state_map = upsert_entity(state_map, entity)
    return state_map


def _contact_entity(
    contact: ContactReport, existing: Optional[Entity], tick: int, author: str
) -> Entity:
    kind = CONTACT_KINDS.get(contact.object_type, EntityKind.HOSTILE)
    values = dict(
        id=contact.entity_id,
        kind=kind,
        position=contact.position,
        velocity=(
            contact.speed * math.cos(contact.heading),
            contact.speed * math.sin(contact.heading),
        ),
        heading=contact.heading,
        classification=contact.classification,
        neutralized=contact.neutralized,
        radius=contact.radius,
        last_update_tick=tick,
        author=author,
    )
    if existing is not None:
        values["priority"] = existing.priority
    return Entity(**values)


def observe(state_map: StateMap, snapshot: BusSnapshot, asset: AssetState) -> StateMap:
    """Fold one tick of own sensing into the asset's map.

    Allied and hostile tracks are updated. Targets, zones and obstacles
    are static; they enter and change only through the brief, the
    bookkeeping actions and the ledger.
    """
    tick = snapshot.tick
    position = asset.position
    nav = snapshot.nav
    if nav is not None:
        position = nav.payload.position_estimate
    own = state_map.self_entity.model_copy(
        update={
            "position": position,
            "heading": asset.heading,
            "velocity": (
                asset.speed * math.cos(asset.heading),
                asset.speed * math.sin(asset.heading),
            ),
            "last_update_tick": tick,
            "author": asset.id,
        }
    )
    state_map = replace_entity(state_map, own)
    for record in snapshot.contacts():
        contact = record.payload
        if contact.entity_id == state_map.own_id:
            continue
        existing = state_map.get(contact.entity_id)
        kind = CONTACT_KINDS.get(contact.object_type, EntityKind.HOSTILE)
        if kind in REPORTED_KINDS or (
            existing is not None and existing.kind in REPORTED_KINDS
        ):
            continue
        entity = _contact_entity(contact, existing, tick, asset.id)
        state_map = upsert_entity(state_map, entity)
    return state_map


def apply_bookkeeping(
    state_map: StateMap, action: ActionVector, tick: int, author: str
) -> StateMap:
    """Apply the filtered intelligence actions to the asset's own map."""
    stamp = {"last_update_tick": tick, "author": author}
    for emitted in action.discrete:
        act = emitted.action
        kind = emitted.kind
        if kind == ActionKind.ADD_NEW_TARGET:
            entity = act.entity.model_copy(update=stamp)
            state_map = replace_entity(state_map, entity)
        elif kind == ActionKind.ADD_OBSTACLE:
            state_map = replace_entity(
                state_map,
                Entity(
                    id=act.obstacle_id,
                    kind=EntityKind.OBSTACLE,
                    position=act.center,
                    radius=act.radius,
                    classification=EntityKind.OBSTACLE.value,
                    **stamp,
                ),
            )
        elif kind in (
            ActionKind.DEPRIORITIZE_TARGET,
            ActionKind.UPDATE_MISSION_ACHIEVEMENT,
        ):
            existing = state_map.get(act.target_id)
            if existing is None:
                continue
            change = dict(stamp)
            if kind == ActionKind.DEPRIORITIZE_TARGET:
                change["priority"] = 0.0
            else:
                change["neutralized"] = True
            state_map = replace_entity(state_map, existing.model_copy(update=change))
    return state_map


def objectives_met(world: WorldState, scenario: Scenario) -> bool:
    mission = scenario.mission
    if not mission.target_list and not mission.waypoints:
        return False
    down = set(neutralized_ids(world))
    if any(t not in down for t in mission.target_ids):
        return False
    n_waypoints = len(mission.waypoints)
    return all(a.next_waypoint >= n_waypoints for a in world.active_assets())


def check_params(scenario: Scenario, params: EnsemblerParams, n_controllers: int):
    expected = input_dim(
        scenario.env_layout().length, n_controllers, scenario.map_layout().length
    )
    if params.d_in != expected or params.n_controllers != n_controllers:
        raise EnsemblerError(
            f"personality expects d_in={params.d_in}, n={params.n_controllers}; "
            f"scenario needs d_in={expected}, n={n_controllers}"
        )


def default_params(scenario: Scenario) -> EnsemblerParams:
    """All-zero parameters: uniform gating, no residual, no discrete emission."""
    n = len(ControllerBank(scenario.controllers))
    d_in = input_dim(scenario.env_layout().length, n, scenario.map_layout().length)
    return zero_params(d_in, scenario.ensembler.d_h, n, scenario.ensembler.delta_max)


def _tick_line(
    tick: int,
    world_digest: str,
    actions: Dict[str, ActionVector],
    gates: Dict[str, List[float]],
    audit_refs: Dict[str, List[int]],
    utility: dict,
) -> dict:
    return {
        "type": "tick",
        "tick": tick,
        "world_digest": world_digest,
        "utility": utility,
        "assets": {
            aid: {
                "action": actions[aid].model_dump(mode="json"),
                "gates": gates[aid],
                "audit": audit_refs[aid],
            }
            for aid in sorted(actions)
        },
    }


def run_episode(
    scenario: Scenario,
    params: Optional[EnsemblerParams] = None,
    seed: int = 0,
    policy=None,
    record: bool = True,
    shaping: Optional[Callable[[WorldState, WorldState], float]] = None,
    personality: Optional[PersonalityRecord] = None,
) -> EpisodeResult:
    """Fly one mission to completion.

    Stops when no asset is still flying, every objective is met or the
    mission's max_ticks is reached. The run is fully determined by
    (scenario, params, seed).

    :param scenario: a validated scenario
    :param params: ensembler parameters, all-zero when omitted
    :param seed: the master seed of every random stream
    :param policy: decision rule over the ensembler outputs, GreedyPolicy
                   when omitted
    :param record: whether to build replay lines
    :param shaping: optional per-tick reward term summed into shaping_total
    :param personality: registry entry stored in each asset's corpus
    :raises: EnsemblerError when params do not fit the scenario
    """
    bank = ControllerBank(scenario.controllers)
    params = params if params is not None else default_params(scenario)
    check_params(scenario, params, len(bank))
    policy = policy if policy is not None else GreedyPolicy()
    mission = scenario.mission
    env_layout = scenario.env_layout()
    map_layout = scenario.map_layout()
    engagement = scenario.world.engagement

    world = scenario.initial_world()
    initial = world
    ids = [a.id for a in world.assets]
    secret = scenario.network.swarm_secret.encode("utf-8")
    keys = {aid: author_key(secret, aid) for aid in ids}
    sensor_rngs = {aid: utils.rng_stream(seed, "sensors", aid) for aid in ids}
    world_rng = utils.rng_stream(seed, "world")
    net = NetSim.from_config(scenario.network, utils.rng_stream(seed, "network"))

    maps = {a.id: initial_map(scenario, world, a) for a in world.assets}
    chains = {aid: ChainSet() for aid in ids}
    applied = {aid: {} for aid in ids}
    hidden = {aid: np.zeros(params.d_h) for aid in ids}
    inputs: Dict[str, List[StepInput]] = {aid: [] for aid in ids}
    audit = AuditLog()
    trajectory: List[TickRecord] = []
    replay: List[dict] = []
    shaping_total = 0.0

    if record:
        replay.append(
            {
                "type": "header",
                "scenario": scenario.name,
                "digest": scenario.digest(),
                "seed": seed,
                "assets": ids,
                "controllers": bank.ids,
                "max_ticks": mission.max_ticks,
            }
        )
    LOG.info(
        f"Episode {scenario.name} seed {seed}: {len(ids)} assets, "
        f"controllers {', '.join(bank.ids)}"
    )

    while world.tick < mission.max_ticks:
        tick = world.tick
        flying = world.active_assets()
        if not flying or objectives_met(world, scenario):
            break

        actions: Dict[str, ActionVector] = {}
        gates: Dict[str, List[float]] = {}
        audit_refs: Dict[str, List[int]] = {}
        rosters: Dict[str, List[str]] = {}
        for asset in flying:
            aid = asset.id
            snapshot = publish(
                sense(world, aid, scenario.suite(aid), sensor_rngs[aid]), aid
            )
            state_map = observe(maps[aid], snapshot, asset)
            ctx = ControllerContext(
                own=SelfState.from_asset(asset, snapshot),
                snapshot=snapshot,
                state_map=state_map,
                mission=mission,
                bounds=world.bounds,
                active_path=active_path(asset, mission),
                stale_ticks=scenario.network.stale_ticks,
            )
            proposals = bank.propose(ctx)
            step_input = assemble_input(
                build_env_vector(snapshot, env_layout),
                proposals,
                encode_state_map(state_map, map_layout),
            )
            trace = forward_core(params, hidden[aid], step_input)
            hidden[aid] = trace.h
            inputs[aid].append(step_input)
            command, emitted = policy.decide(aid, trace)
            action = decode_action(command, emitted, proposals, trace.gates)

            filtered, entries = filter_action(
                action,
                snapshot,
                mission.constraints,
                state_map,
                weapons=asset.weapons,
                countermeasures=asset.countermeasures,
            )
            first = len(audit)
            audit.extend(entries)
            audit_refs[aid] = list(range(first, len(audit)))
            state_map = apply_bookkeeping(state_map, filtered, tick, aid)

            payload = sorted(
                (
                    e
                    for e in state_map.entities.values()
                    if e.author == aid and e.last_update_tick == tick
                ),
                key=lambda e: e.id,
            )
            append_block(chains[aid], aid, payload, tick, keys[aid])

            maps[aid] = state_map
            actions[aid] = filtered
            gates[aid] = [float(g) for g in trace.gates]
            rosters[aid] = survivors(state_map, scenario.network.stale_ticks)
            if record:
                replay.append(snapshot.replay_record())

        if tick % scenario.network.sync_every == 0:
            nodes = {a.id: chains[a.id] for a in flying}
            stats = gossip_round(nodes, net, tick, keys)
            LOG.debug(f"Tick {tick} gossip: {stats.model_dump()}")
        for asset in flying:
            aid = asset.id
            maps[aid] = merge_into_statemap(chains[aid], maps[aid], since=applied[aid])
            applied[aid] = applied_lengths(chains[aid])

        stepped = step(world, actions, world_rng, engagement, mission)
        stepped = stepped.model_copy(
            update={
                "assets": [
                    a.model_copy(update={"roster": rosters[a.id]})
                    if a.id in rosters
                    else a
                    for a in stepped.assets
                ]
            }
        )
        if shaping is not None:
            shaping_total += shaping(world, stepped)
        for event in stepped.events:
            LOG.debug(f"Tick {event.tick}: {event.kind} {event.subject} {event.detail}")
        world = stepped

        world_digest = utils.digest(world.model_dump(mode="json"))
        trajectory.append(TickRecord(tick, world_digest, actions, gates))
        if record:
            running = utility_components(
                EpisodeHistory(
                    initial=initial,
                    final=world,
                    ticks_used=world.tick,
                    audit_rejections=audit.rejections(),
                ),
                mission,
            )
            replay.append(
                _tick_line(
                    tick,
                    world_digest,
                    actions,
                    gates,
                    audit_refs,
                    running.model_dump(),
                )
            )

    history = EpisodeHistory(
        initial=initial,
        final=world,
        ticks_used=world.tick,
        audit_rejections=audit.rejections(),
    )
    report = compute_utility(history, mission)
    LOG.info(
        f"Episode {scenario.name} seed {seed} ended at tick {world.tick}: "
        f"U={report.total:.4f}"
    )

    corpora = {}
    for aid in ids:
        corpus = new_corpus(mission, maps[aid])
        corpus = corpus_record_performance(corpus, world.tick, report)
        if personality is not None:
            corpus = register_personality(corpus, personality)
        corpora[aid] = corpus

    if record:
        replay.append(
            {
                "type": "result",
                "ticks_used": world.tick,
                "utility": report.model_dump(mode="json"),
            }
        )

    return EpisodeResult(
        trajectory=trajectory,
        report=report,
        audit=audit,
        chains=chains,
        initial=initial,
        final=world,
        maps=maps,
        corpora=corpora,
        replay=replay,
        inputs=inputs,
        shaping_total=shaping_total,
    )


def published_ledger(chains: Dict[str, ChainSet]) -> ChainSet:
    """Every asset's own chain as its owner holds it."""
    ledger = ChainSet()
    for aid in sorted(chains):
        ledger.extend(aid, chains[aid].blocks(aid))
    return ledger
