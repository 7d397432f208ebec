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

"""Per-author hash chains."""

import binascii
import enum
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict
from semver import VersionInfo

from autosim import utils
from autosim.statemap.entity import Entity
from autosim.swarmledger.block import (
    ZERO_HASH,
    Block,
    DecodeError,
    LedgerError,
    block_hash,
    decode_block,
    encode_block,
    mac_valid,
    sign,
)

LOG = logging.getLogger(__name__)

DUMP_FORMAT = "autosim-ledger"
DUMP_VERSION = VersionInfo(1, 0, 0)


class UnsupportedDumpVersion(LedgerError):
    """Raised for a ledger dump written in a format this reader cannot load."""

    pass


class FailureReason(str, enum.Enum):
    GAP = "gap"
    BAD_LINK = "bad_link"
    BAD_MAC = "bad_mac"


class VerifyResult(BaseModel):
    """ok, or the earliest invalid block and why."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    ok: bool
    seq: Optional[int] = None
    reason: Optional[FailureReason] = None

    def __bool__(self) -> bool:
        return self.ok


OK = VerifyResult(ok=True)


class ChainSet:
    """The blocks an asset holds, one append-only chain per author."""

    def __init__(self):
        self.chains: Dict[str, List[Block]] = {}
        self.hashes: Dict[str, List[bytes]] = {}
        self.frozen: Dict[str, int] = {}

    def authors(self) -> List[str]:
        return sorted(self.chains)

    def blocks(self, author: str) -> List[Block]:
        return self.chains.get(author, [])

    def length(self, author: str) -> int:
        return len(self.chains.get(author, []))

    def head_hash(self, author: str) -> bytes:
        hashes = self.hashes.get(author)
        return hashes[-1] if hashes else ZERO_HASH

    def head(self, author: str) -> Optional[Block]:
        blocks = self.chains.get(author)
        return blocks[-1] if blocks else None

    def extend(self, author: str, blocks: Sequence[Block]) -> None:
        """Append already verified blocks."""
        chain = self.chains.setdefault(author, [])
        hashes = self.hashes.setdefault(author, [])
        for block in blocks:
            chain.append(block)
            hashes.append(block_hash(block))

    def freeze(self, author: str, seq: int) -> None:
        if author not in self.frozen:
            LOG.warning(
                f"Author {author} equivocated at seq {seq}; ignoring its updates"
            )
            self.frozen[author] = seq

    def is_frozen(self, author: str) -> bool:
        return author in self.frozen

    def encoded(self) -> Dict[str, List[bytes]]:
        return {a: [encode_block(b) for b in self.chains[a]] for a in self.authors()}

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChainSet):
            return NotImplemented
        return self.encoded() == other.encoded()

    def copy(self) -> "ChainSet":
        clone = ChainSet()
        clone.chains = {a: list(b) for a, b in self.chains.items()}
        clone.hashes = {a: list(h) for a, h in self.hashes.items()}
        clone.frozen = dict(self.frozen)
        return clone


def append_block(
    chains: ChainSet, author: str, payload: Iterable[Entity], tick: int, key: bytes
) -> Block:
    """Sign and append the author's next block.

    :raises: LedgerError if tick is older than the author's head block
    """
    head = chains.head(author)
    if head is not None and tick < head.tick:
        raise LedgerError(
            f"block tick {tick} for {author} precedes head tick {head.tick}"
        )
    block = sign(
        Block(
            author=author,
            seq=chains.length(author),
            tick=tick,
            prev_hash=chains.head_hash(author),
            payload=list(payload),
        ),
        key,
    )
    chains.extend(author, [block])
    return block


def verify_chain(
    blocks: Sequence[Block],
    key: bytes,
    start_seq: int = 0,
    prev_hash: bytes = ZERO_HASH,
) -> VerifyResult:
    """Check seq contiguity, hash linkage and the MAC of every block.

    A chain may be verified as a continuation by passing the seq and the
    hash of the block it follows.

    :return: OK or the earliest failure, checked per block in the order
             gap, bad_link, bad_mac
    """
    expected_seq = start_seq
    expected_link = prev_hash
    author = blocks[0].author if blocks else None
    for block in blocks:
        if block.seq != expected_seq:
            return VerifyResult(ok=False, seq=expected_seq, reason=FailureReason.GAP)
        if block.prev_hash != expected_link:
            return VerifyResult(ok=False, seq=block.seq, reason=FailureReason.BAD_LINK)
        if block.author != author or not mac_valid(block, key):
            return VerifyResult(ok=False, seq=block.seq, reason=FailureReason.BAD_MAC)
        expected_seq += 1
        expected_link = block_hash(block)
    return OK


def verify_encoded_chain(encoded: Sequence[bytes], key: bytes) -> VerifyResult:
    """verify_chain over raw encodings.

    A block that does not decode is reported as bad_mac at its position.
    """
    blocks = []
    for position, data in enumerate(encoded):
        try:
            blocks.append(decode_block(data))
        except DecodeError as e:
            LOG.debug(f"Block {position} does not decode: {e}")
            result = verify_chain(blocks, key)
            if not result:
                return result
            return VerifyResult(ok=False, seq=position, reason=FailureReason.BAD_MAC)
    return verify_chain(blocks, key)


def dump_chainset(chains: ChainSet, path: Union[Path, str]) -> None:
    """Write a ledger dump: JSON with each block hex encoded."""
    document = {
        "format": DUMP_FORMAT,
        "version": str(DUMP_VERSION),
        "chains": {
            author: [binascii.hexlify(b).decode("ascii") for b in blocks]
            for author, blocks in chains.encoded().items()
        },
    }
    with open(path, "w") as f:
        json.dump(document, f, indent=1, sort_keys=True)
        f.write("\n")


def check_dump_version(version, path: Union[Path, str] = "") -> None:
    try:
        found = utils.parse_version(str(version))
    except (TypeError, ValueError) as e:
        raise UnsupportedDumpVersion(
            f"{path} has unknown dump version {version!r}"
        ) from e
    if not utils.is_compatible_version(found, DUMP_VERSION):
        raise UnsupportedDumpVersion(
            f"{path} has dump version {found}; this reader supports {DUMP_VERSION}"
        )


def load_dump(path: Union[Path, str]) -> Dict[str, List[bytes]]:
    """Read a ledger dump as raw block encodings per author.

    Blocks whose hex text is damaged come back as empty bytes, which never
    decode.

    :raises: LedgerError when the file is not a ledger dump,
             UnsupportedDumpVersion when its version is unknown
    """
    try:
        with open(path) as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise LedgerError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(document, dict) or document.get("format") != DUMP_FORMAT:
        raise LedgerError(f"{path} is not an {DUMP_FORMAT} dump")
    check_dump_version(document.get("version"), path)
    chains = document.get("chains", {})
    if not isinstance(chains, dict):
        raise LedgerError(f"{path} has no chains mapping")
    result = {}
    for author, blocks in chains.items():
        if not isinstance(blocks, list):
            raise LedgerError(f"chain for {author} is not a list")
        raw = []
        for text in blocks:
            try:
                raw.append(binascii.unhexlify(str(text)))
            except (binascii.Error, ValueError):
                raw.append(b"")
        result[author] = raw
    return result
