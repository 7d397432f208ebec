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

"""Simulated lossy swarm network and the sync wire format.

A message encodes as

    type    u8   0 HEADS, 1 REQUEST, 2 BLOCKS
    sender  str  (u32 length + UTF-8)
    tick    u64
    body    u32 count, then per item:
              HEADS    author str, length u64, head hash 32 bytes
              REQUEST  author str, first seq u64, last seq u64
              BLOCKS   u32 length + canonical block encoding
"""

import enum
import logging
import struct
from typing import List, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from autosim.swarmledger.block import HASH_SIZE, DecodeError

LOG = logging.getLogger(__name__)

_U8 = struct.Struct("<B")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


class PartitionWindow(BaseModel):
    """Ticks [start, end) during which only assets in one group talk."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    start: int = Field(ge=0)
    end: int = Field(ge=0)
    groups: List[List[str]]

    @model_validator(mode="after")
    def _ordered(self):
        if self.end < self.start:
            raise ValueError(f"partition ends at {self.end} before it starts")
        return self

    def active(self, tick: int) -> bool:
        return self.start <= tick < self.end

    def separates(self, a: str, b: str) -> bool:
        for group in self.groups:
            if a in group:
                return b not in group
        # assets outside every group are isolated
        return True


class NetworkConfig(BaseModel):
    """The `network` section of a scenario."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    drop_prob: float = Field(default=0.0, ge=0.0, le=1.0)
    partitions: List[PartitionWindow] = []
    stale_ticks: int = Field(default=10, ge=1)
    swarm_secret: str = "autosim-swarm"
    sync_every: int = Field(default=1, ge=1)


class NetSim:
    """Decides, deterministically per seed, which messages arrive."""

    def __init__(
        self,
        drop_prob: float = 0.0,
        partitions: Sequence[PartitionWindow] = (),
        rng: np.random.Generator = None,
    ):
        if not 0.0 <= drop_prob <= 1.0:
            raise ValueError(f"drop_prob must be in [0, 1], got {drop_prob}")
        self.drop_prob = drop_prob
        self.partitions = list(partitions)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.sent = 0
        self.dropped = 0

    @classmethod
    def from_config(cls, config: NetworkConfig, rng: np.random.Generator) -> "NetSim":
        return cls(config.drop_prob, config.partitions, rng)

    def connected(self, a: str, b: str, tick: int) -> bool:
        return not any(
            w.active(tick) and w.separates(a, b) for w in self.partitions
        )

    def deliver(self, sender: str, receiver: str, tick: int) -> bool:
        """Whether one message from sender reaches receiver this tick.

        Partitioned links never deliver and draw nothing from the stream.
        """
        self.sent += 1
        if not self.connected(sender, receiver, tick):
            self.dropped += 1
            return False
        if self.drop_prob > 0.0 and self.rng.random() < self.drop_prob:
            self.dropped += 1
            return False
        return True


class MessageType(enum.IntEnum):
    HEADS = 0
    REQUEST = 1
    BLOCKS = 2


class HeadInfo(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    author: str
    length: int = Field(ge=0)
    head_hash: bytes


class RangeRequest(BaseModel):
    """Blocks first..last inclusive of one author."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    author: str
    first: int = Field(ge=0)
    last: int = Field(ge=0)


class Message(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    type: MessageType
    sender: str
    tick: int = Field(ge=0)
    body: Union[List[HeadInfo], List[RangeRequest], List[bytes]] = []


def _str(value: str) -> bytes:
    data = value.encode("utf-8")
    return _U32.pack(len(data)) + data


def encode_message(message: Message) -> bytes:
    parts = [
        _U8.pack(int(message.type)),
        _str(message.sender),
        _U64.pack(message.tick),
        _U32.pack(len(message.body)),
    ]
    for item in message.body:
        if message.type == MessageType.HEADS:
            parts += [_str(item.author), _U64.pack(item.length), item.head_hash]
        elif message.type == MessageType.REQUEST:
            parts += [_str(item.author), _U64.pack(item.first), _U64.pack(item.last)]
        else:
            parts += [_U32.pack(len(item)), item]
    return b"".join(parts)


def _take(data: bytes, offset: int, size: int) -> Tuple[bytes, int]:
    if offset + size > len(data):
        raise DecodeError(f"message truncated at byte {offset}")
    return data[offset : offset + size], offset + size


def _read_str(data: bytes, offset: int) -> Tuple[str, int]:
    raw, offset = _take(data, offset, _U32.size)
    raw, offset = _take(data, offset, _U32.unpack(raw)[0])
    try:
        return raw.decode("utf-8"), offset
    except UnicodeDecodeError as e:
        raise DecodeError(f"invalid UTF-8 in message: {e}") from e


def _read(data: bytes, offset: int, fmt: struct.Struct) -> Tuple[int, int]:
    raw, offset = _take(data, offset, fmt.size)
    return fmt.unpack(raw)[0], offset


def decode_message(data: bytes) -> Message:
    """:raises: DecodeError on malformed input"""
    kind, offset = _read(data, 0, _U8)
    try:
        message_type = MessageType(kind)
    except ValueError as e:
        raise DecodeError(f"unknown message type {kind}") from e
    sender, offset = _read_str(data, offset)
    tick, offset = _read(data, offset, _U64)
    count, offset = _read(data, offset, _U32)
    body = []
    for _ in range(count):
        if message_type == MessageType.HEADS:
            author, offset = _read_str(data, offset)
            length, offset = _read(data, offset, _U64)
            head_hash, offset = _take(data, offset, HASH_SIZE)
            body.append(HeadInfo(author=author, length=length, head_hash=head_hash))
        elif message_type == MessageType.REQUEST:
            author, offset = _read_str(data, offset)
            first, offset = _read(data, offset, _U64)
            last, offset = _read(data, offset, _U64)
            body.append(RangeRequest(author=author, first=first, last=last))
        else:
            size, offset = _read(data, offset, _U32)
            raw, offset = _take(data, offset, size)
            body.append(raw)
    if offset != len(data):
        raise DecodeError("trailing bytes after message")
    return Message(type=message_type, sender=sender, tick=tick, body=body)
