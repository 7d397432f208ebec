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

"""Trained ensembler parameters packaged for upload.

A personality file is a small header, the metadata as canonical JSON and
the ensembler checkpoint:

    magic     4 bytes  b"ASPN"
    meta_len  u32      length of the metadata JSON
    metadata  meta_len bytes, UTF-8 canonical JSON
    meta_crc  u32      zlib.crc32 of magic, meta_len and metadata
    checkpoint         see autosim.ensembler.checkpoint

The metadata records the checkpoint format version it was written with;
the reader rejects versions it cannot read before touching the weights.
"""

import dataclasses
import json
import logging
import struct
import zlib
from pathlib import Path
from typing import Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from autosim import utils
from autosim.ensembler.checkpoint import (
    FORMAT_VERSION,
    CheckpointError,
    deserialize,
    serialize,
)
from autosim.ensembler.network import EnsemblerParams
from autosim.statemap.corpus import PersonalityRecord
from autosim.training.config import TrainConfig

LOG = logging.getLogger(__name__)

MAGIC = b"ASPN"
PREFIX = struct.Struct("<4sI")
META_CRC = struct.Struct("<I")


class PersonalityError(Exception):
    """Raised when a personality file cannot be read or does not fit."""

    pass


class PersonalityMeta(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str = Field(min_length=1)
    mission_type: str
    scenario_name: str = ""
    scenario_digest: str = ""
    eval_seed: int = 0
    final_mean_utility: float = 0.0
    iterations: int = Field(default=0, ge=0)
    config: Optional[TrainConfig] = None
    format_version: str = str(FORMAT_VERSION)


@dataclasses.dataclass(frozen=True, eq=False)
class Personality:
    meta: PersonalityMeta
    params: EnsemblerParams

    @property
    def id(self) -> str:
        return self.meta.id

    @property
    def mission_type(self) -> str:
        return self.meta.mission_type

    def record(self, path: str = "") -> PersonalityRecord:
        return PersonalityRecord(
            id=self.meta.id,
            mission_type=self.meta.mission_type,
            scenario_digest=self.meta.scenario_digest,
            final_mean_utility=self.meta.final_mean_utility,
            path=path,
        )


def encode_personality(personality: Personality) -> bytes:
    meta = utils.canonical_json(personality.meta.model_dump(mode="json"))
    meta_bytes = meta.encode("utf-8")
    seed = personality.meta.config.seed if personality.meta.config else 0
    head = PREFIX.pack(MAGIC, len(meta_bytes)) + meta_bytes
    return (
        head
        + META_CRC.pack(zlib.crc32(head))
        + serialize(personality.params, seed=seed)
    )


def check_format_version(format_version: str) -> None:
    """:raises: CheckpointError when this reader cannot load the format"""
    try:
        version = utils.parse_version(format_version)
    except ValueError as e:
        raise CheckpointError(
            f"unparsable format version {format_version!r}"
        ) from e
    if not utils.is_compatible_version(version, FORMAT_VERSION):
        raise CheckpointError(
            f"format {version} is not supported (reader {FORMAT_VERSION})"
        )


def decode_personality(data: bytes) -> Personality:
    """:raises: PersonalityError for truncated, corrupt or foreign data"""
    if len(data) < PREFIX.size:
        raise PersonalityError(f"personality truncated: {len(data)} bytes")
    magic, meta_len = PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise PersonalityError(f"not a personality file (magic {magic!r})")
    end = PREFIX.size + meta_len
    if len(data) < end + META_CRC.size:
        raise PersonalityError(
            f"personality truncated inside its metadata "
            f"({len(data)} < {end + META_CRC.size} bytes)"
        )
    (expected_crc,) = META_CRC.unpack_from(data, end)
    if zlib.crc32(data[:end]) != expected_crc:
        raise PersonalityError("personality metadata checksum mismatch")
    try:
        meta = PersonalityMeta.model_validate(json.loads(data[PREFIX.size : end]))
    except (ValueError, ValidationError) as e:
        raise PersonalityError(f"personality metadata is invalid: {e}") from e
    try:
        check_format_version(meta.format_version)
        checkpoint = deserialize(data[end + META_CRC.size :])
    except CheckpointError as e:
        raise PersonalityError(f"personality {meta.id}: {e}") from e
    return Personality(meta=meta, params=checkpoint.params)


def save_personality(personality: Personality, path: Union[Path, str]) -> None:
    Path(path).write_bytes(encode_personality(personality))
    LOG.debug(f"Saved personality {personality.id} to {path}")


def load_personality(path: Union[Path, str]) -> Personality:
    """Read a personality file.

    :raises: PersonalityError when the file is missing, truncated, fails
             its checksum or carries an unsupported format version
    """
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise PersonalityError(f"cannot read personality {path}: {e}") from e
    return decode_personality(data)
