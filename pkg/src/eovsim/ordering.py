"""Ordering service: orderer front-ends, a replicated log, and the block cutter.

Orderers are proxies: they forward client envelopes to the log leader and
ack the client once the record has committed (held by at least min_insync
brokers, the leader counting as one copy). A single static leader assigns
gap-free offsets; remaining replica copies continue in the background
without blocking commit. The block cutter runs on the leader so every
orderer and peer observes one authoritative block sequence; a deterministic
designated orderer per block (round-robin by height) performs the peer
fan-out.
"""

from __future__ import annotations

from dataclasses import dataclass

from .engine import Message, MessageKind, Node, NodeClass, Timer, timer
from .ledger import Block, CutReason, ReadSet, WriteSet, hash_block


@dataclass(slots=True)
class Envelope:
    """Endorsed transaction: proposal plus a policy-satisfying endorsement set."""

    txn_id: str
    proposal: object
    endorsements: tuple
    read_set: ReadSet
    write_set: WriteSet
    client: str
    broadcast_at: int
    size_bytes: int
    # Policy evaluation is a pure function of the endorsement set, so peers
    # share one memoized verdict instead of re-deriving it N times.
    policy_memo: bool | None = None


@dataclass(slots=True)
class GenesisLoad:
    """Synthetic height-0 envelope carrying the initial account balances."""

    txn_id: str
    write_set: WriteSet
    read_set: ReadSet
    endorsements: tuple
    size_bytes: int


# message bodies -----------------------------------------------------------

@dataclass(slots=True)
class LogRecord:
    envelope: Envelope
    orderer: str


@dataclass(slots=True)
class ReplicaCopy:
    offset: int
    envelope: Envelope


@dataclass(slots=True)
class LogAck:
    offset: int
    broker: str


@dataclass(slots=True)
class RecordCommitted:
    offset: int
    txn_id: str
    orderer: str


@dataclass(slots=True)
class BroadcastAck:
    txn_id: str


@dataclass(slots=True)
class BlockMsg:
    block: Block


@dataclass
class BlockCutterConfig:
    max_txn_count: int = 100
    timeout_us: int = 2_000_000
    max_block_bytes: int = 10 * 1024 * 1024

    def __post_init__(self):
        if self.max_txn_count <= 0 or self.timeout_us <= 0 or self.max_block_bytes <= 0:
            raise ValueError("block cutter thresholds must be positive")


class BlockCutter:
    """Batches committed envelopes into blocks.

    A block is cut when the pending count reaches max_txn_count, when the
    cumulative pending bytes reach max_block_bytes, or when the oldest
    pending envelope has aged timeout_us; the count condition is checked
    before size, and size before timeout. Timer epochs make stale timeout
    fires harmless.
    """

    def __init__(self, cfg: BlockCutterConfig, next_height: int, prev_hash: str):
        self.cfg = cfg
        self.next_height = next_height
        self.prev_hash = prev_hash
        self.epoch = 0
        self._pending: list = []
        self._pending_bytes = 0

    @property
    def pending_count(self) -> int:
        return len(self._pending)

    def add(self, env, now: int) -> tuple[Block | None, bool]:
        """Append a committed envelope; returns (block or None, arm_timer).

        arm_timer is True when this envelope started a fresh batch: the
        caller must schedule a timeout for exactly now + timeout_us.
        """
        arm = not self._pending
        self._pending.append(env)
        self._pending_bytes += env.size_bytes
        if len(self._pending) >= self.cfg.max_txn_count:
            return self._cut(CutReason.COUNT_THRESHOLD, now), False
        if self._pending_bytes >= self.cfg.max_block_bytes:
            return self._cut(CutReason.SIZE_THRESHOLD, now), False
        return None, arm

    def on_timeout(self, epoch: int, now: int) -> Block | None:
        if epoch != self.epoch or not self._pending:
            return None
        return self._cut(CutReason.TIMEOUT, now)

    def _cut(self, reason: CutReason, now: int) -> Block:
        block = Block(height=self.next_height, prev_hash=self.prev_hash,
                      txns=self._pending, cut_reason=reason, created_at=now)
        self.prev_hash = hash_block(block)
        self.next_height += 1
        self.epoch += 1
        self._pending = []
        self._pending_bytes = 0
        return block


class OrdererNode(Node):
    """Front-end proxy between clients and the replicated log.

    Counts every received envelope as an enqueue attempt and the commit of
    one of its own forwarded envelopes as an enqueue success, so the
    attempt/success ratio can be read off directly. A bounded input buffer
    (envelopes forwarded but not yet committed) refuses further envelopes
    when full; the client only ever observes that as a broadcast timeout.
    """

    def __init__(self, node_id, leader: str, endorsing_peers: list[str],
                 capacity: int, service_cfg, sizes):
        super().__init__(node_id, NodeClass.ORDERER)
        self.leader = leader
        self.endorsing_peers = endorsing_peers
        self.capacity = capacity
        self.svc = service_cfg
        self.sizes = sizes
        self.enqueue_attempts = 0
        self.enqueue_successes = 0
        self.refusals = 0
        self.in_flight = 0
        self._awaiting_ack: dict[str, str] = {}  # txn -> client

    def service_us(self, msg: Message) -> int:
        if msg.kind is MessageKind.ENVELOPE:
            return self.svc.orderer_forward
        if msg.kind is MessageKind.COMMIT_NOTICE:
            return self.svc.orderer_notice
        # Block fan-out rides the dedicated delivery stream and does not
        # occupy the broadcast lane; its pacing is the per-peer stagger.
        return 0

    def handle(self, msg: Message) -> None:
        if msg.kind is MessageKind.ENVELOPE:
            env: Envelope = msg.body
            self.enqueue_attempts += 1
            if self.in_flight >= self.capacity:
                self.refusals += 1
                return
            self.in_flight += 1
            self._awaiting_ack[env.txn_id] = env.client
            record = Message(MessageKind.LOG_APPEND,
                             env.size_bytes + self.sizes.log_overhead,
                             LogRecord(env, self.id))
            self.engine.send(self.id, self.leader, record)
        elif msg.kind is MessageKind.COMMIT_NOTICE:
            body: RecordCommitted = msg.body
            if body.orderer == self.id:
                client = self._awaiting_ack.pop(body.txn_id, None)
                if client is not None:
                    self.enqueue_successes += 1
                    self.in_flight -= 1
                    ack = Message(MessageKind.COMMIT_NOTICE, self.sizes.notice,
                                  BroadcastAck(body.txn_id))
                    self.engine.send(self.id, client, ack)
        elif msg.kind is MessageKind.BLOCK_DELIVER:
            block = msg.body.block
            size = block_bytes(block, self.sizes)
            for i, peer in enumerate(self.endorsing_peers):
                out = Message(MessageKind.BLOCK_DELIVER, size, BlockMsg(block))
                self.engine.send(self.id, peer, out,
                                 extra_delay_us=i * self.svc.orderer_deliver_stagger)


def block_bytes(block: Block, sizes) -> int:
    return sizes.block_header + sum(t.size_bytes for t in block.txns)


class BrokerNode(Node):
    """Replicated-log broker; exactly one instance acts as the static leader.

    The leader assigns offsets, fans copies out to replication_factor - 1
    followers, and commits a record once min_insync copies exist, always in
    gap-free offset order (a later offset reaching quorum first waits for
    its predecessors). On commit it notifies every orderer and feeds the
    block cutter; cut blocks go to the designated orderer for that height.
    """

    def __init__(self, node_id, is_leader: bool, leader: str,
                 followers: list[str], min_insync: int,
                 orderers: list[str], cutter: BlockCutter | None,
                 service_cfg, sizes):
        super().__init__(node_id, NodeClass.BROKER)
        self.is_leader = is_leader
        self.leader = leader
        self.followers = followers
        self.min_insync = min_insync
        self.orderers = orderers
        self.cutter = cutter
        self.svc = service_cfg
        self.sizes = sizes
        # leader log state
        self.next_offset = 0
        self.records: list[LogRecord] = []
        self.copies_held: list[int] = []
        self.committed_count = 0
        self.commit_times: list[int] = []
        # follower store
        self.replica: dict[int, Envelope] = {}

    def service_us(self, msg: Message) -> int:
        if msg.kind is MessageKind.LOG_APPEND:
            if not self.is_leader:
                return self.svc.broker_append
            # The per-record commit notices are pre-charged here: every
            # accepted record commits exactly once, and folding the cost in
            # keeps the produce lane's capacity accounting exact while acks
            # stay out of band.
            env = msg.body.envelope
            return (self.svc.leader_order + self.svc.broker_append
                    + len(self.followers) * self.svc.leader_copy_send
                    + len(self.orderers) * self.svc.leader_notice_send
                    + (env.size_bytes * self.svc.leader_order_per_byte_ns) // 1000)
        return 0

    def is_control(self, msg: Message) -> bool:
        # Replication acks and cut timers are handled like the replication
        # and timer threads of a real broker: they never wait behind queued
        # produce work.
        if msg.kind is MessageKind.LOG_ACK:
            return True
        return (msg.kind is MessageKind.TIMER_FIRE
                and isinstance(msg.body, Timer) and msg.body.tag == "cut")

    def handle(self, msg: Message) -> None:
        if msg.kind is MessageKind.LOG_APPEND:
            if self.is_leader:
                self._leader_append(msg.body)
            else:
                self._follower_append(msg.body)
        elif msg.kind is MessageKind.LOG_ACK:
            self._on_ack(msg.body)
        elif msg.kind is MessageKind.TIMER_FIRE:
            body: Timer = msg.body
            if body.tag == "cut":
                block = self.cutter.on_timeout(body.data[0], self.engine.now)
                if block is not None:
                    self._emit_block(block)

    # -- leader ------------------------------------------------------------

    def _leader_append(self, record: LogRecord) -> None:
        offset = self.next_offset
        self.next_offset += 1
        self.records.append(record)
        self.copies_held.append(1)
        copy_size = record.envelope.size_bytes + self.sizes.log_overhead
        for follower in self.followers:
            copy = Message(MessageKind.LOG_APPEND, copy_size,
                           ReplicaCopy(offset, record.envelope))
            self.engine.send(self.id, follower, copy)
        self._advance_commit()

    def _on_ack(self, ack: LogAck) -> None:
        self.copies_held[ack.offset] += 1
        self._advance_commit()

    def _advance_commit(self) -> None:
        while (self.committed_count < self.next_offset
               and self.copies_held[self.committed_count] >= self.min_insync):
            offset = self.committed_count
            self.committed_count += 1
            self._commit(offset)

    def _commit(self, offset: int) -> None:
        record = self.records[offset]
        now = self.engine.now
        self.commit_times.append(now)
        notice = RecordCommitted(offset, record.envelope.txn_id, record.orderer)
        for orderer in self.orderers:
            self.engine.send(self.id, orderer,
                             Message(MessageKind.COMMIT_NOTICE,
                                     self.sizes.notice, notice))
        block, arm = self.cutter.add(record.envelope, now)
        if block is not None:
            self._emit_block(block)
        elif arm:
            self.engine.schedule(self.id, timer("cut", self.cutter.epoch),
                                 self.cutter.cfg.timeout_us)

    def _emit_block(self, block: Block) -> None:
        designated = self.orderers[block.height % len(self.orderers)]
        out = Message(MessageKind.BLOCK_DELIVER, block_bytes(block, self.sizes),
                      BlockMsg(block))
        self.engine.send(self.id, designated, out)

    # -- follower ----------------------------------------------------------

    def _follower_append(self, copy: ReplicaCopy) -> None:
        self.replica[copy.offset] = copy.envelope
        self.engine.send(self.id, self.leader,
                         Message(MessageKind.LOG_ACK, self.sizes.log_ack,
                                 LogAck(copy.offset, self.id)))
