"""Deterministic discrete-event engine and latency-modeled message fabric.

Simulated time is integer microseconds. A single heap-ordered event queue
drives every node state machine; ties on fire time are broken by a global
monotonically increasing sequence number, so a run is an exact function of
(configuration, seed). Jitter comes from one engine-owned generator; nodes
never own randomness.
"""

from __future__ import annotations

import enum
import heapq
import random
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

US_PER_SECOND = 1_000_000

# FNV-1a constants, used for the stable dispatch digest (the builtin hash()
# is salted per process and would break cross-process reproducibility).
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a(data: bytes, h: int = _FNV_OFFSET) -> int:
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def _mix(h: int, value: int) -> int:
    return ((h ^ (value & _MASK64)) * _FNV_PRIME) & _MASK64


class SimError(Exception):
    """Raised for engine misuse that indicates a simulation bug."""


class UnknownTargetError(SimError):
    """Scheduling or sending to a node id that is not in the topology."""


class MessageKind(enum.Enum):
    PROPOSAL = "Proposal"
    ENDORSEMENT = "Endorsement"
    ENVELOPE = "Envelope"
    LOG_APPEND = "LogAppend"
    LOG_ACK = "LogAck"
    BLOCK_DELIVER = "BlockDeliver"
    GOSSIP_BLOCK = "GossipBlock"
    COMMIT_NOTICE = "CommitNotice"
    TIMER_FIRE = "TimerFire"


@dataclass(slots=True)
class Message:
    kind: MessageKind
    size_bytes: int
    body: object

    def __post_init__(self):
        if self.kind is not MessageKind.TIMER_FIRE and self.size_bytes <= 0:
            raise SimError(f"{self.kind.value} message must have size_bytes > 0")
        if self.size_bytes < 0:
            raise SimError("size_bytes must be non-negative")


class Timer(NamedTuple):
    """Body payload for TIMER_FIRE messages; tag routes it inside the node."""

    tag: str
    data: tuple = ()


def timer(tag: str, *data) -> Message:
    return Message(MessageKind.TIMER_FIRE, 0, Timer(tag, tuple(data)))


_SVC_TAG = "_svc"


class SimEvent(NamedTuple):
    """Queued event; tuple order gives the (fire_time, seq) dispatch order."""

    fire_time: int
    seq: int
    target: str
    payload: Message


class NodeClass(enum.Enum):
    CLIENT = "client"
    PEER = "peer"
    ORDERER = "orderer"
    BROKER = "broker"
    MONITOR = "monitor"


@dataclass
class LatencyModel:
    """Delivery delay = base(src class, dst class) + size * per_byte + jitter.

    base_us maps unordered class-pair keys like "client-peer" to microseconds;
    pairs not listed fall back to default_us. With jitter_fraction == 0 the
    delay is a pure function of (classes, size).
    """

    base_us: dict = field(default_factory=dict)
    default_us: int = 1000
    per_byte_ns: int = 0
    jitter_fraction: float = 0.0

    def __post_init__(self):
        if self.default_us < 0 or any(v < 0 for v in self.base_us.values()):
            raise SimError("latencies must be non-negative")
        if not 0.0 <= self.jitter_fraction < 1.0:
            raise SimError("jitter_fraction must be in [0, 1)")
        self._table = {}
        for key, value in self.base_us.items():
            a, b = key.split("-")
            self._table[(a, b)] = value
            self._table[(b, a)] = value

    def base_for(self, src: NodeClass, dst: NodeClass) -> int:
        return self._table.get((src.value, dst.value), self.default_us)

    def delay_us(self, src: NodeClass, dst: NodeClass, size_bytes: int,
                 rng: random.Random) -> int:
        delay = self.base_for(src, dst) + (size_bytes * self.per_byte_ns) // 1000
        if self.jitter_fraction > 0.0:
            spread = int(delay * self.jitter_fraction)
            if spread > 0:
                delay += rng.randint(-spread, spread)
        return delay


@dataclass(slots=True)
class TraceSummary:
    events_dispatched: int
    end_time_us: int
    dispatch_digest: str
    truncated: bool


class Node:
    """Base state machine: a single-server FIFO work queue.

    Each delivered message waits for the node to be idle, occupies it for
    service_us(msg), and is handled when that service completes. Handlers may
    call charge_busy() to extend their occupancy (for costs only known
    mid-handler, e.g. per-copy sends). Zero-service messages on an idle node
    are handled inline without an extra completion event.
    """

    def __init__(self, node_id: str, klass: NodeClass):
        self.id = node_id
        self.klass = klass
        self.id_fnv = fnv1a(node_id.encode())
        self.engine: Engine | None = None
        self.sent_msgs = 0
        self.sent_bytes = 0
        self.recv_msgs = 0
        self.recv_bytes = 0
        self._work: deque[Message] = deque()
        self._busy = False
        self._in_service: Message | None = None
        self._post_busy_us = 0

    # -- service discipline ------------------------------------------------

    def service_us(self, msg: Message) -> int:
        return 0

    def is_control(self, msg: Message) -> bool:
        """Control messages bypass the work queue and are handled on arrival
        (out-of-band bookkeeping such as replication acks); they must not
        charge busy time."""
        return False

    def handle(self, msg: Message) -> None:
        raise NotImplementedError

    def charge_busy(self, extra_us: int) -> None:
        """Extend the current work item's occupancy; callable from handle()."""
        self._post_busy_us += extra_us

    def deliver(self, msg: Message) -> None:
        if (msg.kind is MessageKind.TIMER_FIRE
                and isinstance(msg.body, Timer) and msg.body.tag == _SVC_TAG):
            self._on_service_done()
            return
        if self.is_control(msg):
            self.handle(msg)
            return
        self._work.append(msg)
        if not self._busy:
            self._pump()

    def _pump(self) -> None:
        while self._work:
            service = self.service_us(self._work[0])
            msg = self._work.popleft()
            if service > 0:
                self._busy = True
                self._in_service = msg
                self.engine.schedule(self.id, timer(_SVC_TAG), service)
                return
            self._run_handler(msg)
            if self._busy:
                return

    def _run_handler(self, msg: Message) -> None:
        self.handle(msg)
        if self._post_busy_us > 0:
            post = self._post_busy_us
            self._post_busy_us = 0
            self._busy = True
            self._in_service = None
            self.engine.schedule(self.id, timer(_SVC_TAG), post)

    def _on_service_done(self) -> None:
        self._busy = False
        msg = self._in_service
        self._in_service = None
        if msg is not None:
            self._run_handler(msg)
            if self._busy:
                return
        self._pump()


class Engine:
    def __init__(self, latency: LatencyModel, seed: int | str = 0):
        self.latency = latency
        self.rng = random.Random(f"{seed}:net")
        self.now = 0
        self.nodes: dict[str, Node] = {}
        self._heap: list[SimEvent] = []
        self._seq = 0
        self._events_dispatched = 0
        self._digest = _FNV_OFFSET

    def add_node(self, node: Node) -> None:
        if node.id in self.nodes:
            raise SimError(f"duplicate node id {node.id!r}")
        node.engine = self
        self.nodes[node.id] = node

    def schedule(self, target: str, payload: Message, delay_us: int) -> int:
        """Enqueue payload for target at now + delay_us; returns the event id."""
        if delay_us < 0:
            raise SimError(f"negative delay {delay_us}")
        if target not in self.nodes:
            raise UnknownTargetError(f"unknown target node {target!r}")
        self._seq += 1
        heapq.heappush(self._heap, SimEvent(self.now + delay_us, self._seq,
                                            target, payload))
        return self._seq

    def send(self, src: str, dst: str, msg: Message, extra_delay_us: int = 0,
             allow_loopback: bool = False) -> int:
        """Deliver msg from src to dst under the latency model.

        The network is lossless; drops only ever appear as timeouts at the
        application layer. Returns the scheduled delivery time.
        """
        if src == dst and not allow_loopback:
            raise SimError(f"loopback send on {src!r} without allow_loopback")
        src_node = self.nodes[src]
        if dst not in self.nodes:
            raise UnknownTargetError(f"unknown destination node {dst!r}")
        dst_node = self.nodes[dst]
        delay = self.latency.delay_us(src_node.klass, dst_node.klass,
                                      msg.size_bytes, self.rng)
        self.schedule(dst, msg, delay + extra_delay_us)
        src_node.sent_msgs += 1
        src_node.sent_bytes += msg.size_bytes
        dst_node.recv_msgs += 1
        dst_node.recv_bytes += msg.size_bytes
        return self.now + delay + extra_delay_us

    def run_until_quiescent(self, time_limit_us: int | None = None) -> TraceSummary:
        """Dispatch events in (fire_time, seq) order until empty or the limit.

        Hitting the limit is not an error; the summary is flagged truncated
        and remaining events stay queued.
        """
        heap = self._heap
        truncated = False
        while heap:
            if time_limit_us is not None and heap[0].fire_time > time_limit_us:
                truncated = True
                break
            event = heapq.heappop(heap)
            self.now = event.fire_time
            node = self.nodes[event.target]
            self._events_dispatched += 1
            d = _mix(self._digest, event.fire_time)
            d = _mix(d, event.seq)
            self._digest = _mix(d, node.id_fnv)
            node.deliver(event.payload)
        return TraceSummary(
            events_dispatched=self._events_dispatched,
            end_time_us=self.now,
            dispatch_digest=f"{self._digest:016x}",
            truncated=truncated,
        )
