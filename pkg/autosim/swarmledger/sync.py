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

"""Anti-entropy replication of chains and merging into a state map."""

import hashlib
import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict

from autosim.statemap.entity import (
    EntityKind,
    MalformedObservation,
    StateMap,
    upsert_entity,
)
from autosim.swarmledger.block import (
    Block,
    DecodeError,
    decode_block,
    encode_block,
    mac_valid,
)
from autosim.swarmledger.chain import ChainSet, FailureReason, verify_chain
from autosim.swarmledger.network import (
    HeadInfo,
    Message,
    MessageType,
    NetSim,
    RangeRequest,
    decode_message,
    encode_message,
)

LOG = logging.getLogger(__name__)


class SyncStats(BaseModel):
    model_config = ConfigDict(extra="forbid")

    messages: int = 0
    requests: int = 0
    blocks_accepted: int = 0
    quarantined: int = 0


def heads(chains: ChainSet) -> Dict[str, HeadInfo]:
    return {
        author: HeadInfo(
            author=author,
            length=chains.length(author),
            head_hash=chains.head_hash(author),
        )
        for author in chains.authors()
    }


def plan_requests(
    local: ChainSet, remote_heads: Mapping[str, HeadInfo]
) -> List[RangeRequest]:
    """Ranges of blocks the remote holds and the local chain set lacks."""
    requests = []
    for author in sorted(remote_heads):
        remote = remote_heads[author]
        have = local.length(author)
        if remote.length > have and not local.is_frozen(author):
            requests.append(
                RangeRequest(author=author, first=have, last=remote.length - 1)
            )
    return requests


def serve(chains: ChainSet, requests: Sequence[RangeRequest]) -> List[bytes]:
    blocks = []
    for request in requests:
        held = chains.blocks(request.author)
        for block in held[request.first : request.last + 1]:
            blocks.append(encode_block(block))
    return blocks


def accept(
    local: ChainSet, sender: str, encoded: Sequence[bytes], keys: Mapping[str, bytes]
) -> Tuple[int, bool]:
    """Verify a transfer and append it atomically.

    Nothing of a transfer is kept when any block in it fails to decode or
    verify; the sender's transfer is quarantined for the round. A block
    that links badly but carries a valid MAC is a second version of a
    sequence number its author already signed, and freezes the author.

    :return: (blocks appended, quarantined)
    """
    by_author: Dict[str, List[Block]] = {}
    try:
        for data in encoded:
            block = decode_block(data)
            by_author.setdefault(block.author, []).append(block)
    except DecodeError as e:
        LOG.warning(f"Quarantined transfer from {sender}: {e}")
        return 0, True

    staged = {}
    for author in sorted(by_author):
        blocks = by_author[author]
        key = keys.get(author)
        if key is None:
            LOG.warning(f"Quarantined transfer from {sender}: unknown author {author}")
            return 0, True
        if local.is_frozen(author):
            continue
        result = verify_chain(
            blocks,
            key,
            start_seq=local.length(author),
            prev_hash=local.head_hash(author),
        )
        if not result:
            bad = [b for b in blocks if b.seq == result.seq]
            relinked = result.reason == FailureReason.BAD_LINK
            if bad and relinked and mac_valid(bad[0], key):
                local.freeze(author, result.seq)
                continue
            LOG.warning(
                f"Quarantined transfer from {sender}: {author} block "
                f"{result.seq} failed with {result.reason.value}"
            )
            return 0, True
        staged[author] = blocks

    appended = 0
    for author, blocks in staged.items():
        local.extend(author, blocks)
        appended += len(blocks)
    return appended, False


def _send(net: NetSim, message: Message, receiver: str, stats: SyncStats):
    stats.messages += 1
    if not net.deliver(message.sender, receiver, message.tick):
        return None
    return decode_message(encode_message(message))


def sync(
    local_id: str,
    local: ChainSet,
    remote_id: str,
    remote: ChainSet,
    net: NetSim,
    tick: int,
    keys: Mapping[str, bytes],
    stats: Optional[SyncStats] = None,
) -> SyncStats:
    """One pull exchange: local learns remote's heads and fetches what it lacks.

    HEADS travels remote → local, REQUEST local → remote and BLOCKS back;
    every leg is subject to the network's partitions and drops.
    """
    stats = stats if stats is not None else SyncStats()
    announced = _send(
        net,
        Message(
            type=MessageType.HEADS,
            sender=remote_id,
            tick=tick,
            body=list(heads(remote).values()),
        ),
        local_id,
        stats,
    )
    if announced is None:
        return stats
    requests = plan_requests(local, {h.author: h for h in announced.body})
    if not requests:
        return stats
    stats.requests += len(requests)
    asked = _send(
        net,
        Message(type=MessageType.REQUEST, sender=local_id, tick=tick, body=requests),
        remote_id,
        stats,
    )
    if asked is None:
        return stats
    reply = _send(
        net,
        Message(
            type=MessageType.BLOCKS,
            sender=remote_id,
            tick=tick,
            body=serve(remote, asked.body),
        ),
        local_id,
        stats,
    )
    if reply is None:
        return stats
    appended, quarantined = accept(local, remote_id, reply.body, keys)
    stats.blocks_accepted += appended
    stats.quarantined += 1 if quarantined else 0
    return stats


def gossip_round(
    nodes: Mapping[str, ChainSet], net: NetSim, tick: int, keys: Mapping[str, bytes]
) -> SyncStats:
    """Every node pulls from every other node, in id order."""
    stats = SyncStats()
    ids = sorted(nodes)
    for receiver in ids:
        for sender in ids:
            if sender != receiver:
                sync(
                    receiver,
                    nodes[receiver],
                    sender,
                    nodes[sender],
                    net,
                    tick,
                    keys,
                    stats,
                )
    return stats


def observations(
    chains: ChainSet, since: Optional[Mapping[str, int]] = None
) -> List[Tuple[int, str, int, int, Block]]:
    """Payload entries in (tick, author, seq) order, optionally only new ones."""
    entries = []
    for author in chains.authors():
        start = since.get(author, 0) if since else 0
        for block in chains.blocks(author)[start:]:
            for index in range(len(block.payload)):
                entries.append((block.tick, author, block.seq, index, block))
    entries.sort(key=lambda e: e[:4])
    return entries


def merge_into_statemap(
    chains: ChainSet, base: StateMap, since: Optional[Mapping[str, int]] = None
) -> StateMap:
    """Apply ledger observations to a map with last-writer-wins.

    Another asset's report of itself becomes an Allied entity; reports
    about the map's own asset are skipped. Passing `since` (blocks already
    applied per author) applies only newer blocks, which gives the same
    map because upsert_entity is order-insensitive.
    """
    state_map = base
    for _, author, seq, index, block in observations(chains, since):
        entity = block.payload[index]
        if entity.id == state_map.own_id:
            continue
        if entity.kind == EntityKind.SELF_ASSET:
            entity = entity.model_copy(update={"kind": EntityKind.ALLIED})
        try:
            state_map = upsert_entity(state_map, entity)
        except MalformedObservation as e:
            LOG.warning(f"Skipped observation from {author} block {seq}: {e}")
    return state_map


def applied_lengths(chains: ChainSet) -> Dict[str, int]:
    return {author: chains.length(author) for author in chains.authors()}


def chain_digest(chains: ChainSet) -> str:
    """Hex digest over every head, for quick convergence checks."""
    h = hashlib.sha256()
    for author in chains.authors():
        h.update(author.encode("utf-8"))
        h.update(chains.head_hash(author))
    return h.hexdigest()
