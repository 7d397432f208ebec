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

"""Ledger blocks and their canonical byte encoding.

All integers are little-endian and fixed width; strings are a u32 byte
length followed by UTF-8. A block encodes as

    author      str
    seq         u64
    tick        u64
    prev_hash   32 bytes
    payload     u32 count, then per entity a u32 length and the entity
    mac         32 bytes

and an entity as

    id str, kind u8, position 2×f64, velocity 2×f64, heading f64,
    classification str, priority f64, neutralized u8,
    last_update_tick u64, author str, radius f64

The MAC is HMAC-SHA-256 over every byte before it; the block hash is
SHA-256 over the whole encoding, MAC included.
"""

import hashlib
import hmac
import struct
from typing import List

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from autosim.statemap.entity import Entity, EntityKind

HASH_SIZE = 32
ZERO_HASH = bytes(HASH_SIZE)
KINDS = tuple(EntityKind)

_U8 = struct.Struct("<B")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_F64 = struct.Struct("<d")


class LedgerError(Exception):
    """Base exception for the swarm ledger."""

    pass


class DecodeError(LedgerError):
    """Raised when bytes are not a canonically encoded block."""

    pass


class Block(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    author: str = Field(min_length=1)
    seq: int = Field(ge=0)
    tick: int = Field(ge=0)
    prev_hash: bytes = Field(min_length=HASH_SIZE, max_length=HASH_SIZE)
    payload: List[Entity] = []
    mac: bytes = Field(default=ZERO_HASH, min_length=HASH_SIZE, max_length=HASH_SIZE)


def _str(value: str) -> bytes:
    data = value.encode("utf-8")
    return _U32.pack(len(data)) + data


def encode_entity(entity: Entity) -> bytes:
    return b"".join(
        [
            _str(entity.id),
            _U8.pack(KINDS.index(entity.kind)),
            _F64.pack(entity.position[0]),
            _F64.pack(entity.position[1]),
            _F64.pack(entity.velocity[0]),
            _F64.pack(entity.velocity[1]),
            _F64.pack(entity.heading),
            _str(entity.classification),
            _F64.pack(entity.priority),
            _U8.pack(1 if entity.neutralized else 0),
            _U64.pack(entity.last_update_tick),
            _str(entity.author),
            _F64.pack(entity.radius),
        ]
    )


def signing_bytes(block: Block) -> bytes:
    """Canonical encoding of everything the MAC covers."""
    parts = [
        _str(block.author),
        _U64.pack(block.seq),
        _U64.pack(block.tick),
        block.prev_hash,
        _U32.pack(len(block.payload)),
    ]
    for entity in block.payload:
        encoded = encode_entity(entity)
        parts.append(_U32.pack(len(encoded)))
        parts.append(encoded)
    return b"".join(parts)


def encode_block(block: Block) -> bytes:
    return signing_bytes(block) + block.mac


def block_hash(block: Block) -> bytes:
    return hashlib.sha256(encode_block(block)).digest()


def author_key(swarm_secret: bytes, author: str) -> bytes:
    """Pre-shared per-author key derived from the swarm secret."""
    return hmac.new(swarm_secret, author.encode("utf-8"), hashlib.sha256).digest()


def compute_mac(block: Block, key: bytes) -> bytes:
    return hmac.new(key, signing_bytes(block), hashlib.sha256).digest()


def mac_valid(block: Block, key: bytes) -> bool:
    return hmac.compare_digest(compute_mac(block, key), block.mac)


def sign(block: Block, key: bytes) -> Block:
    return block.model_copy(update={"mac": compute_mac(block, key)})


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise DecodeError(f"truncated at byte {self.offset}, wanted {size} more")
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: struct.Struct):
        return fmt.unpack(self.take(fmt.size))[0]

    def string(self) -> str:
        size = self.unpack(_U32)
        try:
            return self.take(size).decode("utf-8")
        except UnicodeDecodeError as e:
            raise DecodeError(f"invalid UTF-8 string: {e}") from e

    def flag(self) -> bool:
        value = self.unpack(_U8)
        if value not in (0, 1):
            raise DecodeError(f"invalid boolean byte {value}")
        return value == 1

    def done(self) -> bool:
        return self.offset == len(self.data)


def decode_entity(data: bytes) -> Entity:
    reader = _Reader(data)
    entity_id = reader.string()
    kind_index = reader.unpack(_U8)
    if kind_index >= len(KINDS):
        raise DecodeError(f"invalid entity kind {kind_index}")
    values = dict(
        id=entity_id,
        kind=KINDS[kind_index],
        position=(reader.unpack(_F64), reader.unpack(_F64)),
        velocity=(reader.unpack(_F64), reader.unpack(_F64)),
        heading=reader.unpack(_F64),
        classification=reader.string(),
        priority=reader.unpack(_F64),
        neutralized=reader.flag(),
        last_update_tick=reader.unpack(_U64),
        author=reader.string(),
        radius=reader.unpack(_F64),
    )
    if not reader.done():
        raise DecodeError("trailing bytes after entity")
    try:
        return Entity(**values)
    except ValidationError as e:
        raise DecodeError(f"invalid entity {entity_id!r}: {e}") from e


def decode_block(data: bytes) -> Block:
    """Strictly decode a block.

    Anything but the exact canonical encoding of a valid block is refused,
    so decode_block(b) re-encodes to b.

    :raises: DecodeError
    """
    reader = _Reader(data)
    author = reader.string()
    seq = reader.unpack(_U64)
    tick = reader.unpack(_U64)
    prev_hash = reader.take(HASH_SIZE)
    payload = []
    for _ in range(reader.unpack(_U32)):
        payload.append(decode_entity(reader.take(reader.unpack(_U32))))
    mac = reader.take(HASH_SIZE)
    if not reader.done():
        raise DecodeError("trailing bytes after block")
    try:
        block = Block(
            author=author,
            seq=seq,
            tick=tick,
            prev_hash=prev_hash,
            payload=payload,
            mac=mac,
        )
    except ValidationError as e:
        raise DecodeError(f"invalid block: {e}") from e
    if encode_block(block) != data:
        raise DecodeError("block is not canonically encoded")
    return block
