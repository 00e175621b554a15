"""Hash-chained block store and versioned world state, one instance per peer.

Digests are truncated blake2b over a canonical byte encoding: stable across
processes and platforms, collision-safe at simulation scale. Cryptographic
strength is irrelevant here (no adversaries), only determinism matters.

State values are signed 64-bit integers keyed by short strings such as
"cust/17/checking". A version is the (block height, txn index) pair that last
wrote the key; comparison is lexicographic.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterator

Version = tuple[int, int]

GENESIS_PREV_HASH = "0" * 32


class ChainIntegrityError(RuntimeError):
    """Height gap or prev-hash mismatch: a simulation bug, fail fast."""


def _entry_hash(key: str, entry: tuple[int, Version]) -> int:
    value, (bh, ti) = entry
    h = hashlib.blake2b(digest_size=16)
    h.update(key.encode())
    h.update(b"=")
    h.update(value.to_bytes(8, "big", signed=True))
    h.update(bh.to_bytes(8, "big"))
    h.update(ti.to_bytes(8, "big"))
    return int.from_bytes(h.digest(), "big")


class CutReason(enum.Enum):
    COUNT_THRESHOLD = "CountThreshold"
    TIMEOUT = "Timeout"
    SIZE_THRESHOLD = "SizeThreshold"


@dataclass(slots=True)
class ReadSet:
    """Keys read with the version observed; None marks an absent key."""

    reads: list[tuple[str, Version | None]] = field(default_factory=list)

    def key(self):
        return tuple(self.reads)


@dataclass(slots=True)
class WriteSet:
    writes: list[tuple[str, int]] = field(default_factory=list)

    def key(self):
        return tuple(self.writes)


@dataclass(slots=True)
class Block:
    height: int
    prev_hash: str
    txns: list  # ordered Envelopes
    cut_reason: CutReason
    created_at: int

    def txn_ids(self) -> list[str]:
        return [t.txn_id for t in self.txns]


def hash_block(block: Block) -> str:
    """Deterministic digest over (height, prev_hash, txn ids, cut_reason)."""
    h = hashlib.blake2b(digest_size=16)
    h.update(block.height.to_bytes(8, "big"))
    h.update(block.prev_hash.encode())
    for txn_id in block.txn_ids():
        h.update(b"\x00")
        h.update(txn_id.encode())
    h.update(block.cut_reason.value.encode())
    return h.hexdigest()


class Ledger:
    """Per-peer chain plus committed world state. Never shared between peers."""

    def __init__(self):
        self.blocks: list[Block] = []
        self.flags: list[list] = []  # validity flags per block, same order
        self.tip_hash = GENESIS_PREV_HASH
        self._state: dict[str, tuple[int, Version]] = {}
        self._digest_acc = 0  # XOR fold of per-entry hashes, updated in place

    @property
    def height(self) -> int:
        return len(self.blocks) - 1

    def append_block(self, block: Block, flags: list | None = None) -> int:
        if block.height != self.height + 1:
            raise ChainIntegrityError(
                f"append height {block.height}, expected {self.height + 1}")
        if block.prev_hash != self.tip_hash:
            raise ChainIntegrityError(
                f"prev_hash mismatch at height {block.height}")
        if not block.txns:
            raise ChainIntegrityError("blocks must carry at least one txn")
        self.blocks.append(block)
        self.flags.append(list(flags) if flags is not None else [])
        self.tip_hash = hash_block(block)
        return block.height

    def read_state(self, key: str) -> tuple[int, Version] | None:
        """Committed (value, version), or None; absence is a normal outcome."""
        return self._state.get(key)

    def fork(self) -> "Ledger":
        """Independent copy; blocks are shared (peers never mutate them)."""
        other = Ledger()
        other.blocks = list(self.blocks)
        other.flags = [list(f) for f in self.flags]
        other.tip_hash = self.tip_hash
        other._state = dict(self._state)
        other._digest_acc = self._digest_acc
        return other

    def apply_write_set(self, ws: WriteSet, at: Version) -> str:
        for key, value in ws.writes:
            old = self._state.get(key)
            if old is not None:
                self._digest_acc ^= _entry_hash(key, old)
            entry = (value, at)
            self._state[key] = entry
            self._digest_acc ^= _entry_hash(key, entry)
        return self.state_digest()

    def state_digest(self) -> str:
        """Order-independent fold over entries; equal maps give equal digests."""
        return f"{self._digest_acc:032x}"

    def state_items(self) -> Iterator[tuple[str, tuple[int, Version]]]:
        return iter(self._state.items())

    def trace_lines(self) -> Iterator[str]:
        """One JSON line per block: height, cut reason, txn ids, validity flags."""
        for block, flags in zip(self.blocks, self.flags):
            yield json.dumps({
                "height": block.height,
                "cut_reason": block.cut_reason.value,
                "created_at_us": block.created_at,
                "txn_ids": block.txn_ids(),
                "valid": [f.value if hasattr(f, "value") else f for f in flags],
            }, sort_keys=True)
