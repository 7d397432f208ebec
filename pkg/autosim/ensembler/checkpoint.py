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

"""Binary checkpoint container for ensembler parameters.

Layout, all integers little-endian:

    magic        4 bytes  b"ASCK"
    version      3 × u16  major, minor, patch
    d_in, d_h, n 3 × u32
    seed         u64
    count        u32      number of float64 values that follow
    weights      count × f64, in EnsemblerParams.flatten() order
    crc32        u32      zlib.crc32 of every preceding byte
"""

import dataclasses
import struct
import zlib

import numpy as np
from semver import VersionInfo

from autosim import utils
from autosim.ensembler.network import (
    EnsemblerError,
    EnsemblerParams,
    param_count,
    zero_params,
)

MAGIC = b"ASCK"
FORMAT_VERSION = VersionInfo(1, 0, 0)
HEADER = struct.Struct("<4s3H3IQI")
TRAILER = struct.Struct("<I")


class CheckpointError(EnsemblerError):
    """Raised when a checkpoint is corrupt, truncated or unsupported."""

    pass


@dataclasses.dataclass(frozen=True, eq=False)
class Checkpoint:
    params: EnsemblerParams
    seed: int
    version: VersionInfo


def serialize(params: EnsemblerParams, seed: int = 0) -> bytes:
    flat = params.flatten()
    header = HEADER.pack(
        MAGIC,
        FORMAT_VERSION.major,
        FORMAT_VERSION.minor,
        FORMAT_VERSION.patch,
        params.d_in,
        params.d_h,
        params.n_controllers,
        seed & 0xFFFFFFFFFFFFFFFF,
        flat.size,
    )
    body = header + flat.astype("<f8").tobytes()
    return body + TRAILER.pack(zlib.crc32(body))


def deserialize(data: bytes) -> Checkpoint:
    """Decode a checkpoint, reproducing every weight bit for bit.

    :raises: CheckpointError on truncation, checksum mismatch, bad magic,
             an unsupported format version or inconsistent dimensions
    """
    if len(data) < HEADER.size + TRAILER.size:
        raise CheckpointError(
            f"checkpoint truncated: {len(data)} bytes is shorter than the header"
        )
    body, trailer = data[: -TRAILER.size], data[-TRAILER.size :]
    (expected_crc,) = TRAILER.unpack(trailer)
    if zlib.crc32(body) != expected_crc:
        raise CheckpointError("checkpoint checksum mismatch")

    magic, major, minor, patch, d_in, d_h, n, seed, count = HEADER.unpack_from(body)
    if magic != MAGIC:
        raise CheckpointError(f"not a checkpoint (magic {magic!r})")
    version = VersionInfo(major, minor, patch)
    if not utils.is_compatible_version(version, FORMAT_VERSION):
        raise CheckpointError(
            f"checkpoint format {version} is not supported (reader {FORMAT_VERSION})"
        )
    payload = body[HEADER.size :]
    if len(payload) != count * 8:
        raise CheckpointError(
            f"checkpoint declares {count} weights but carries {len(payload)} bytes"
        )

    template = zero_params(d_in, d_h, n)
    if param_count(template) != count:
        raise CheckpointError(
            f"{count} weights do not match dimensions d_in={d_in} d_h={d_h} n={n}"
        )
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    try:
        params = template.unflatten(flat)
    except EnsemblerError as e:
        raise CheckpointError(str(e)) from e
    return Checkpoint(params=params, seed=seed, version=version)
