"""Benchmark client: fixed-rate, endorsement-aware submission loop.

The schedule is open loop: proposal i is sent to all endorsing peers at
round(i * 1e6 / rate) microseconds after start, never waiting for earlier
transactions. Endorsement replies, broadcast acks and commit notices are
handled asynchronously; a transaction whose endorsements or broadcast ack
miss their timeout is discarded (never retried) and counted.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .committer import BlockCommitted
from .endorser import EndorsementPolicy, policy_satisfied
from .engine import Message, MessageKind, Node, NodeClass, Timer, timer
from .ordering import BroadcastAck, Envelope
from .smallbank import Proposal


class JourneyStatus(enum.Enum):
    COMMITTED = "Committed"
    INVALID_COMMITTED = "InvalidCommitted"
    DROPPED_ENDORSEMENT = "DroppedEndorsement"
    DROPPED_BROADCAST = "DroppedBroadcast"
    IN_FLIGHT = "InFlight"


class _State(enum.Enum):
    AWAIT_ENDORSE = 1
    AWAIT_ACK = 2
    AWAIT_COMMIT = 3
    CLOSED = 4


@dataclass
class ClientConfig:
    rate_tps: float
    duration_us: int
    endorse_timeout_us: int
    broadcast_timeout_us: int
    max_txns: int | None = None

    def __post_init__(self):
        if self.rate_tps <= 0:
            raise ValueError("rate_tps must be > 0")
        if self.endorse_timeout_us <= 0 or self.broadcast_timeout_us <= 0:
            raise ValueError("timeouts must be > 0")


def submission_times(cfg: ClientConfig) -> list[int]:
    """Submission instants in microseconds; depend only on (rate, index)."""
    times = []
    i = 0
    while True:
        if cfg.max_txns is not None and i >= cfg.max_txns:
            break
        t = round(i * 1_000_000 / cfg.rate_tps)
        if t >= cfg.duration_us:
            break
        times.append(t)
        i += 1
    return times


@dataclass(slots=True)
class TxnJourney:
    txn_id: str
    client: str
    index: int
    op_name: str
    submit_us: int
    endorsed_us: int | None = None
    bcast_ack_us: int | None = None
    commit_us: int | None = None
    status: JourneyStatus | None = None


class ClientNode(Node):
    def __init__(self, node_id: str, cfg: ClientConfig, proposals: list[Proposal],
                 endorsing_peers: list[str], orderers: list[str],
                 policy: EndorsementPolicy, sizes):
        super().__init__(node_id, NodeClass.CLIENT)
        self.cfg = cfg
        self.proposals = proposals
        self.peers = endorsing_peers
        self.orderers = orderers
        self.policy = policy
        self.sizes = sizes
        self.journeys: dict[str, TxnJourney] = {}
        self._states: dict[str, _State] = {}
        self._collected: dict[str, dict] = {}  # txn -> {peer: Endorsement}
        self._early_commits: dict[str, tuple[int, bool]] = {}

    def arm(self) -> None:
        """Schedule the whole open-loop submission plan; call at time 0."""
        for i, t in enumerate(submission_times(self.cfg)):
            self.engine.schedule(self.id, timer("submit", i), t)

    # -- events --------------------------------------------------------------

    def handle(self, msg: Message) -> None:
        if msg.kind is MessageKind.TIMER_FIRE:
            self._on_timer(msg.body)
        elif msg.kind is MessageKind.ENDORSEMENT:
            self._on_endorsement(msg.body)
        elif msg.kind is MessageKind.COMMIT_NOTICE:
            body = msg.body
            if isinstance(body, BroadcastAck):
                self._on_broadcast_ack(body.txn_id)
            elif isinstance(body, BlockCommitted):
                self._on_block_committed(body)

    def _on_timer(self, t: Timer) -> None:
        if t.tag == "submit":
            self._submit(t.data[0])
        elif t.tag == "endorse_to":
            txn_id = t.data[0]
            if self._states.get(txn_id) is _State.AWAIT_ENDORSE:
                self._close(txn_id, JourneyStatus.DROPPED_ENDORSEMENT)
        elif t.tag == "bcast_to":
            txn_id = t.data[0]
            if self._states.get(txn_id) is _State.AWAIT_ACK:
                self._close(txn_id, JourneyStatus.DROPPED_BROADCAST)

    def _submit(self, index: int) -> None:
        proposal = self.proposals[index]
        proposal.submitted_at = self.engine.now
        journey = TxnJourney(txn_id=proposal.txn_id, client=self.id, index=index,
                             op_name=proposal.op.kind.value,
                             submit_us=self.engine.now)
        self.journeys[proposal.txn_id] = journey
        self._states[proposal.txn_id] = _State.AWAIT_ENDORSE
        self._collected[proposal.txn_id] = {}
        for peer in self.peers:
            self.engine.send(self.id, peer,
                             Message(MessageKind.PROPOSAL, self.sizes.proposal,
                                     proposal))
        self.engine.schedule(self.id, timer("endorse_to", proposal.txn_id),
                             self.cfg.endorse_timeout_us)

    def _on_endorsement(self, endorsement) -> None:
        txn_id = endorsement.txn_id
        if self._states.get(txn_id) is not _State.AWAIT_ENDORSE:
            return  # late or duplicate reply for a finished txn
        collected = self._collected[txn_id]
        if endorsement.peer in collected:
            return
        collected[endorsement.peer] = endorsement
        if len(collected) < self.policy.threshold:
            return  # cannot possibly satisfy the policy yet
        ok, witness = policy_satisfied(self.policy, collected.values())
        if not ok:
            return
        journey = self.journeys[txn_id]
        journey.endorsed_us = self.engine.now
        size = self.sizes.proposal + self.sizes.endorsement * len(witness)
        envelope = Envelope(txn_id=txn_id, proposal=self.proposals[journey.index],
                            endorsements=tuple(witness),
                            read_set=witness[0].read_set,
                            write_set=witness[0].write_set,
                            client=self.id, broadcast_at=self.engine.now,
                            size_bytes=size)
        orderer = self.orderers[journey.index % len(self.orderers)]
        self.engine.send(self.id, orderer,
                         Message(MessageKind.ENVELOPE, size, envelope))
        self._states[txn_id] = _State.AWAIT_ACK
        del self._collected[txn_id]
        self.engine.schedule(self.id, timer("bcast_to", txn_id),
                             self.cfg.broadcast_timeout_us)

    def _on_broadcast_ack(self, txn_id: str) -> None:
        if self._states.get(txn_id) is not _State.AWAIT_ACK:
            return
        self.journeys[txn_id].bcast_ack_us = self.engine.now
        self._states[txn_id] = _State.AWAIT_COMMIT
        if txn_id in self._early_commits:
            committed_at, valid = self._early_commits.pop(txn_id)
            self._finalize(txn_id, committed_at, valid)

    def _on_block_committed(self, body: BlockCommitted) -> None:
        for txn_id, valid in body.txn_flags:
            state = self._states.get(txn_id)
            if state is _State.AWAIT_COMMIT:
                self._finalize(txn_id, body.committed_at, valid)
            elif state is _State.AWAIT_ACK:
                # Commit observed before the broadcast ack made it back;
                # resolve once the ack lands (or the timeout drops it).
                self._early_commits[txn_id] = (body.committed_at, valid)

    def _finalize(self, txn_id: str, committed_at: int, valid: bool) -> None:
        journey = self.journeys[txn_id]
        journey.commit_us = committed_at
        status = JourneyStatus.COMMITTED if valid else JourneyStatus.INVALID_COMMITTED
        self._close(txn_id, status)

    def _close(self, txn_id: str, status: JourneyStatus) -> None:
        self.journeys[txn_id].status = status
        self._states[txn_id] = _State.CLOSED
        self._collected.pop(txn_id, None)
        self._early_commits.pop(txn_id, None)

    def finish_open_journeys(self) -> None:
        """Mark journeys still open at run end; they count as in flight."""
        for txn_id, state in self._states.items():
            if state is not _State.CLOSED:
                self.journeys[txn_id].status = JourneyStatus.IN_FLIGHT
