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

import hashlib
import json
import random
import struct
import tempfile
import unittest
from pathlib import Path

import numpy as np

from autosim.statemap.entity import EntityKind, upsert_entity
from autosim.swarmledger import block as blk
from autosim.swarmledger import chain, sync
from autosim.swarmledger.network import (
    HeadInfo,
    Message,
    MessageType,
    NetSim,
    PartitionWindow,
    RangeRequest,
    decode_message,
    encode_message,
)
from tests.unit.autosim import helpers

SECRET = b"autosim-swarm"
AUTHORS = ("a1", "a2", "a3", "a4")
KEYS = {a: blk.author_key(SECRET, a) for a in AUTHORS}


def _observation(author, tick, entity_id="h1", x=0.0):
    return helpers.entity(
        entity_id, position=(x, 0.0), last_update_tick=tick, author=author
    )


def _chain(author="a1", length=10):
    chains = chain.ChainSet()
    for tick in range(length):
        chain.append_block(
            chains, author, [_observation(author, tick, x=tick)], tick, KEYS[author]
        )
    return chains


def _independent_hash(author, seq, tick, prev_hash, mac):
    """SHA-256 of an empty-payload block, encoded without the ledger code."""
    name = author.encode("utf-8")
    data = (
        struct.pack("<I", len(name))
        + name
        + struct.pack("<QQ", seq, tick)
        + prev_hash
        + struct.pack("<I", 0)
        + mac
    )
    return hashlib.sha256(data).digest()


class BlockTestCase(unittest.TestCase):
    def test_round_trip(self):
        block = _chain(length=1).blocks("a1")[0]
        data = blk.encode_block(block)
        self.assertEqual(blk.decode_block(data), block)

    def test_trailing_bytes(self):
        data = blk.encode_block(_chain(length=1).blocks("a1")[0])
        with self.assertRaises(blk.DecodeError):
            blk.decode_block(data + b"\x00")

    def test_keys_per_author(self):
        self.assertNotEqual(KEYS["a1"], KEYS["a2"])
        self.assertEqual(blk.author_key(SECRET, "a1"), KEYS["a1"])


class AppendBlockTestCase(unittest.TestCase):
    def test_genesis(self):
        chains = chain.ChainSet()
        block = chain.append_block(chains, "a1", [], 0, KEYS["a1"])
        self.assertEqual(block.seq, 0)
        self.assertEqual(block.prev_hash, bytes(32))

    def test_link_matches_independent_hash(self):
        chains = chain.ChainSet()
        first = chain.append_block(chains, "a1", [], 3, KEYS["a1"])
        second = chain.append_block(chains, "a1", [], 4, KEYS["a1"])
        self.assertEqual(
            second.prev_hash,
            _independent_hash("a1", 0, 3, bytes(32), first.mac),
        )
        self.assertEqual(second.seq, 1)

    def test_older_tick_rejected(self):
        chains = chain.ChainSet()
        chain.append_block(chains, "a1", [], 5, KEYS["a1"])
        with self.assertRaises(blk.LedgerError):
            chain.append_block(chains, "a1", [], 4, KEYS["a1"])


class VerifyChainTestCase(unittest.TestCase):
    def setUp(self):
        self.chains = _chain()
        self.encoded = self.chains.encoded()["a1"]

    def test_untampered(self):
        self.assertTrue(chain.verify_chain(self.chains.blocks("a1"), KEYS["a1"]))
        self.assertTrue(chain.verify_encoded_chain(self.encoded, KEYS["a1"]))

    def test_payload_byte_flip(self):
        block = self.chains.blocks("a1")[4]
        payload_start = len(blk.signing_bytes(block.model_copy(update={"payload": []})))
        corrupt = bytearray(self.encoded[4])
        corrupt[payload_start + 12] ^= 0x10
        encoded = list(self.encoded)
        encoded[4] = bytes(corrupt)
        result = chain.verify_encoded_chain(encoded, KEYS["a1"])
        self.assertEqual(
            (result.ok, result.seq, result.reason),
            (False, 4, chain.FailureReason.BAD_MAC),
        )

    def test_any_single_byte_mutation_detected(self):
        for position in (0, 4, 9):
            for i in range(len(self.encoded[position])):
                corrupt = bytearray(self.encoded[position])
                corrupt[i] ^= 0xFF
                encoded = list(self.encoded)
                encoded[position] = bytes(corrupt)
                result = chain.verify_encoded_chain(encoded, KEYS["a1"])
                self.assertFalse(result.ok, f"block {position} byte {i}")
                self.assertEqual(result.seq, position, f"block {position} byte {i}")

    def test_forged_link(self):
        blocks = list(self.chains.blocks("a1"))
        forged = blk.sign(
            blocks[5].model_copy(update={"prev_hash": b"\x11" * 32}), KEYS["a1"]
        )
        blocks[5] = forged
        result = chain.verify_chain(blocks, KEYS["a1"])
        self.assertEqual(
            (result.seq, result.reason), (5, chain.FailureReason.BAD_LINK)
        )

    def test_gap(self):
        blocks = list(self.chains.blocks("a1"))
        del blocks[3]
        result = chain.verify_chain(blocks, KEYS["a1"])
        self.assertEqual((result.seq, result.reason), (3, chain.FailureReason.GAP))

    def test_wrong_key(self):
        result = chain.verify_chain(self.chains.blocks("a1"), KEYS["a2"])
        self.assertEqual((result.seq, result.reason), (0, chain.FailureReason.BAD_MAC))

    def test_dump_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "ledger.json"
            chain.dump_chainset(self.chains, path)
            self.assertEqual(chain.load_dump(path), self.chains.encoded())

    def test_dump_not_a_ledger(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "ledger.json"
            path.write_text('{"format": "other"}')
            with self.assertRaises(blk.LedgerError):
                chain.load_dump(path)

    def test_dump_version_checked(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "ledger.json"
            chain.dump_chainset(self.chains, path)
            document = json.loads(path.read_text())
            self.assertEqual(document["version"], "1.0.0")
            for version in ("2.0.0", "1.4.0", "banana", None):
                document["version"] = version
                path.write_text(json.dumps(document))
                with self.assertRaises(chain.UnsupportedDumpVersion):
                    chain.load_dump(path)
            document["version"] = "1.0"
            path.write_text(json.dumps(document))
            self.assertEqual(chain.load_dump(path), self.chains.encoded())


class SyncTestCase(unittest.TestCase):
    def test_identical_heads(self):
        local = _chain("a2", 5)
        self.assertEqual(sync.plan_requests(local, sync.heads(local.copy())), [])

    def test_missing_range(self):
        local = _chain("a2", 3)
        remote = _chain("a2", 8)
        self.assertEqual(
            sync.plan_requests(local, sync.heads(remote)),
            [RangeRequest(author="a2", first=3, last=7)],
        )

    def test_pull_appends(self):
        local = _chain("a2", 3)
        remote = _chain("a2", 8)
        stats = sync.sync("a1", local, "a2", remote, NetSim(), 0, KEYS)
        self.assertEqual(stats.blocks_accepted, 5)
        self.assertEqual(local, remote)

    def test_tampered_transfer_quarantined(self):
        local = _chain("a2", 3)
        remote = _chain("a2", 5)
        served = sync.serve(remote, [RangeRequest(author="a2", first=3, last=4)])
        corrupt = bytearray(served[1])
        corrupt[-1] ^= 0x01
        appended, quarantined = sync.accept(
            local, "a2", [served[0], bytes(corrupt)], KEYS
        )
        self.assertEqual((appended, quarantined), (0, True))
        self.assertEqual(local.length("a2"), 3)

    def test_equivocation_freezes_author(self):
        local = _chain("a2", 3)
        fork = _chain("a2", 2)
        chain.append_block(
            fork, "a2", [_observation("a2", 2, x=99.0)], 2, KEYS["a2"]
        )
        chain.append_block(fork, "a2", [], 3, KEYS["a2"])
        served = sync.serve(fork, [RangeRequest(author="a2", first=3, last=3)])
        appended, quarantined = sync.accept(local, "a3", served, KEYS)
        self.assertEqual((appended, quarantined), (0, False))
        self.assertTrue(local.is_frozen("a2"))
        self.assertEqual(sync.plan_requests(local, sync.heads(fork)), [])

    def test_partition_then_heal_converges(self):
        nodes = {aid: chain.ChainSet() for aid in ("a1", "a2", "a3")}
        window = PartitionWindow(start=0, end=50, groups=[["a1"], ["a2", "a3"]])
        net = NetSim(0.2, [window], np.random.default_rng(17))
        for tick in range(50):
            for aid, chains in nodes.items():
                chain.append_block(
                    chains, aid, [_observation(aid, tick, f"x{aid}")], tick, KEYS[aid]
                )
            sync.gossip_round(nodes, net, tick, KEYS)
        self.assertNotEqual(nodes["a1"], nodes["a2"])
        for tick in range(50, 150):
            sync.gossip_round(nodes, net, tick, KEYS)
            if nodes["a1"] == nodes["a2"] == nodes["a3"]:
                break
        self.assertEqual(nodes["a1"].encoded(), nodes["a2"].encoded())
        self.assertEqual(nodes["a2"].encoded(), nodes["a3"].encoded())
        self.assertEqual(
            sync.chain_digest(nodes["a1"]), sync.chain_digest(nodes["a3"])
        )

    def test_message_codec(self):
        message = Message(
            type=MessageType.HEADS,
            sender="a1",
            tick=7,
            body=[HeadInfo(author="a1", length=2, head_hash=b"\x01" * 32)],
        )
        self.assertEqual(decode_message(encode_message(message)), message)

    def test_partition_never_delivers(self):
        window = PartitionWindow(start=0, end=10, groups=[["a1"], ["a2"]])
        net = NetSim(0.0, [window])
        self.assertFalse(net.deliver("a1", "a2", 5))
        self.assertTrue(net.deliver("a1", "a2", 10))


class MergeTestCase(unittest.TestCase):
    def test_empty_chains(self):
        base = helpers.own_map()
        self.assertIs(sync.merge_into_statemap(chain.ChainSet(), base), base)

    def test_same_tick_author_order(self):
        chains = chain.ChainSet()
        chain.append_block(chains, "a3", [_observation("a3", 5, x=3.0)], 5, KEYS["a3"])
        chain.append_block(chains, "a2", [_observation("a2", 5, x=2.0)], 5, KEYS["a2"])
        base = helpers.own_map(tick=0)
        merged = sync.merge_into_statemap(chains, base)
        self.assertEqual(merged.get("h1").author, "a3")

        reverse = base
        for author in ("a3", "a2"):
            reverse = upsert_entity(reverse, chains.blocks(author)[0].payload[0])
        self.assertEqual(merged, reverse)

    def test_self_reports_become_allies(self):
        chains = chain.ChainSet()
        report = helpers.entity(
            "a2", kind=EntityKind.SELF_ASSET, last_update_tick=1, author="a2"
        )
        own = helpers.entity(
            "a1", kind=EntityKind.ALLIED, last_update_tick=1, author="a2"
        )
        chain.append_block(chains, "a2", [report, own], 1, KEYS["a2"])
        merged = sync.merge_into_statemap(chains, helpers.own_map())
        self.assertEqual(merged.get("a2").kind, EntityKind.ALLIED)
        self.assertEqual(merged.get("a1").kind, EntityKind.SELF_ASSET)

    def test_order_insensitive_fuzz(self):
        rng = random.Random(8)
        chains = chain.ChainSet()
        entities = []
        ticks = {a: 0 for a in AUTHORS}
        for _ in range(200):
            author = rng.choice(AUTHORS)
            ticks[author] += rng.choice((0, 1))
            entity = _observation(
                author, ticks[author], f"h{rng.randrange(6)}", rng.uniform(-9, 9)
            )
            entities.append(entity)
            chain.append_block(chains, author, [entity], ticks[author], KEYS[author])

        merged = sync.merge_into_statemap(chains, helpers.own_map())
        for _ in range(5):
            rng.shuffle(entities)
            state_map = helpers.own_map()
            for entity in entities:
                state_map = upsert_entity(state_map, entity)
            self.assertEqual(state_map, merged)

    def test_incremental_merge(self):
        chains = _chain("a2", 4)
        base = helpers.own_map()
        partial = sync.merge_into_statemap(chains, base)
        applied = sync.applied_lengths(chains)
        chain.append_block(chains, "a2", [_observation("a2", 9, x=9.0)], 9, KEYS["a2"])
        self.assertEqual(
            sync.merge_into_statemap(chains, partial, applied),
            sync.merge_into_statemap(chains, base),
        )


if __name__ == "__main__":
    unittest.main()
