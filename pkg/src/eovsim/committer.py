"""Validation phase on every peer: policy check, version conflict check,
commit with rollback of invalid transactions, and block gossip.

Transactions in a block are processed in order; the conflict check for txn i
sees the writes of valid txns 0..i-1 of the same block (first writer wins).
Only valid write sets are applied, versioned (height, txn index). Endorsing
peers receive blocks from the ordering service; each non-endorsing peer is
assigned one endorsing anchor peer that pushes committed blocks to it, and
out-of-order arrivals are buffered until the gap fills.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .endorser import EndorsementPolicy, endorse, policy_satisfied
from .engine import Message, MessageKind, Node, NodeClass, Timer, timer
from .ledger import Block, Ledger, Version
from .ordering import BlockMsg, block_bytes
from .smallbank import Proposal


class ValidationFlag(enum.Enum):
    VALID = "Valid"
    POLICY_VIOLATION = "PolicyViolation"
    MVCC_CONFLICT = "MVCCConflict"


@dataclass(slots=True)
class ValidationResult:
    txn_id: str
    flag: ValidationFlag
    checked_versions: list[tuple[str, Version | None, Version | None]] = field(
        default_factory=list)


def validate_block(block: Block, policy: EndorsementPolicy,
                   ledger: Ledger) -> list[ValidationResult]:
    """Flag every transaction in the block, in order.

    A txn is Valid iff its endorsement set satisfies the policy and every
    read version matches the running state (committed state plus writes of
    earlier valid txns in this block).
    """
    results = []
    overlay: dict[str, Version] = {}
    for idx, env in enumerate(block.txns):
        ok = getattr(env, "policy_memo", None)
        if ok is None:
            ok, _witness = policy_satisfied(policy, env.endorsements)
            if hasattr(env, "policy_memo"):
                env.policy_memo = ok
        if not ok:
            results.append(ValidationResult(env.txn_id,
                                            ValidationFlag.POLICY_VIOLATION))
            continue
        checked = []
        conflict = False
        for key, expected in env.read_set.reads:
            if key in overlay:
                found = overlay[key]
            else:
                entry = ledger.read_state(key)
                found = entry[1] if entry is not None else None
            checked.append((key, expected, found))
            if found != expected:
                conflict = True
        if conflict:
            results.append(ValidationResult(env.txn_id,
                                            ValidationFlag.MVCC_CONFLICT, checked))
            continue
        for key, _value in env.write_set.writes:
            overlay[key] = (block.height, idx)
        results.append(ValidationResult(env.txn_id, ValidationFlag.VALID, checked))
    return results


def commit_block(ledger: Ledger, block: Block,
                 results: list[ValidationResult]) -> tuple[int, str, dict]:
    """Append the block and apply only the valid write sets, in block order."""
    flags = [r.flag for r in results]
    height = ledger.append_block(block, flags)
    for idx, (env, result) in enumerate(zip(block.txns, results)):
        if result.flag is ValidationFlag.VALID:
            ledger.apply_write_set(env.write_set, (block.height, idx))
    counts = {flag: 0 for flag in ValidationFlag}
    for flag in flags:
        counts[flag] += 1
    return height, ledger.state_digest(), counts


class PeerBase(Node):
    """Shared peer behavior: in-order block validation and commit.

    Blocks may arrive out of height order (designated orderers rotate, and
    gossip copies jitter); a block for a future height is buffered with zero
    service cost and re-enters the work queue once its predecessor commits,
    paying its validation service then. Duplicate heights are dropped.
    """

    def __init__(self, node_id: str, ledger: Ledger, policy: EndorsementPolicy,
                 service_cfg, sizes):
        super().__init__(node_id, NodeClass.PEER)
        self.ledger = ledger
        self.policy = policy
        self.svc = service_cfg
        self.sizes = sizes
        self.flag_counts = {flag: 0 for flag in ValidationFlag}
        self._buffered: dict[int, Block] = {}

    def _validate_cost(self, block: Block) -> int:
        return len(block.txns) * self.svc.validate_per_txn

    def service_us(self, msg: Message) -> int:
        if msg.kind in (MessageKind.BLOCK_DELIVER, MessageKind.GOSSIP_BLOCK):
            block = msg.body.block
            if block.height == self.ledger.height + 1:
                return self._validate_cost(block)
            return 0
        if msg.kind is MessageKind.TIMER_FIRE and isinstance(msg.body, Timer) \
                and msg.body.tag == "block_ready":
            block = self._buffered.get(self.ledger.height + 1)
            return self._validate_cost(block) if block is not None else 0
        return 0

    def handle(self, msg: Message) -> None:
        if msg.kind in (MessageKind.BLOCK_DELIVER, MessageKind.GOSSIP_BLOCK):
            self._receive_block(msg.body.block)
        elif msg.kind is MessageKind.TIMER_FIRE and msg.body.tag == "block_ready":
            block = self._buffered.pop(self.ledger.height + 1, None)
            if block is not None:
                self._commit(block)

    def _receive_block(self, block: Block) -> None:
        if block.height <= self.ledger.height or block.height in self._buffered:
            return  # duplicate
        if block.height == self.ledger.height + 1:
            self._commit(block)
        else:
            self._buffered[block.height] = block

    def _commit(self, block: Block) -> None:
        results = validate_block(block, self.policy, self.ledger)
        commit_block(self.ledger, block, results)
        for result in results:
            self.flag_counts[result.flag] += 1
        self.on_committed(block, results)
        if self.ledger.height + 1 in self._buffered:
            self.engine.schedule(self.id, timer("block_ready"), 0)

    def on_committed(self, block: Block, results: list[ValidationResult]) -> None:
        pass


@dataclass(slots=True)
class BlockCommitted:
    """Peer -> client commit notice: which txns landed, and whether valid."""

    height: int
    committed_at: int
    txn_flags: tuple  # (txn_id, valid: bool) pairs


class EndorsingPeer(PeerBase):
    """Endorsing peer: authorizes and endorses proposals, then validates and
    commits blocks like any peer; pushes committed blocks to its assigned
    non-endorsing peers and commit notices to its home clients."""

    def __init__(self, node_id, ledger, policy, service_cfg, sizes,
                 authorized: set[str] | None = None):
        super().__init__(node_id, ledger, policy, service_cfg, sizes)
        self.authorized = authorized
        self.home_clients: list[str] = []
        self.gossip_targets: list[str] = []
        self.endorse_refusals = 0

    def service_us(self, msg: Message) -> int:
        if msg.kind is MessageKind.PROPOSAL:
            return self.svc.endorse
        return super().service_us(msg)

    def handle(self, msg: Message) -> None:
        if msg.kind is MessageKind.PROPOSAL:
            proposal: Proposal = msg.body
            result = endorse(proposal, self.ledger, self.id, self.engine.now,
                             self.authorized)
            if result is None:
                self.endorse_refusals += 1
                return
            reply = Message(MessageKind.ENDORSEMENT, self.sizes.endorsement,
                            result)
            self.engine.send(self.id, proposal.client, reply)
        else:
            super().handle(msg)

    def on_committed(self, block: Block, results) -> None:
        if self.home_clients:
            flags = tuple((r.txn_id, r.flag is ValidationFlag.VALID)
                          for r in results)
            size = self.sizes.notice + self.sizes.block_txn_summary * len(flags)
            body = BlockCommitted(block.height, self.engine.now, flags)
            for client in self.home_clients:
                self.engine.send(self.id, client,
                                 Message(MessageKind.COMMIT_NOTICE, size, body))
        if self.gossip_targets:
            size = block_bytes(block, self.sizes)
            for target in self.gossip_targets:
                self.engine.send(self.id, target,
                                 Message(MessageKind.GOSSIP_BLOCK, size,
                                         BlockMsg(block)))


class NonEndorsingPeer(PeerBase):
    """Validates and commits gossiped blocks; plays no part in endorsement."""
