"""Endorsement issuance and endorsement-policy evaluation.

Signatures are modeled as identity stamps: an endorsement names the peer
that produced it, and policy evaluation trusts the stamp. A policy is
satisfied by at least `threshold` endorsements from the required peer set
whose (read set, write set) payloads are pairwise equal.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ledger import ReadSet, WriteSet
from .smallbank import Proposal, execute


@dataclass(slots=True)
class Endorsement:
    txn_id: str
    peer: str
    read_set: ReadSet
    write_set: WriteSet
    response: int | None
    issued_at: int

    def payload_key(self):
        return (self.read_set.key(), self.write_set.key())


@dataclass(frozen=True)
class EndorsementPolicy:
    required: tuple[str, ...]  # sorted peer identities
    threshold: int

    def __post_init__(self):
        if not 1 <= self.threshold <= len(self.required):
            raise ValueError("threshold must be in 1..len(required)")
        object.__setattr__(self, "required", tuple(sorted(self.required)))


def policy_satisfied(policy: EndorsementPolicy,
                     endorsements) -> tuple[bool, list[Endorsement]]:
    """Check a policy; returns (satisfied, witnessing subset).

    The witnessing subset is the largest group of payload-identical
    endorsements from required peers with size >= threshold; ties between
    equally large groups break on lexicographic peer identity. Adding an
    endorsement can never turn a satisfied policy unsatisfied.
    """
    endorsements = list(endorsements)
    txn_ids = {e.txn_id for e in endorsements}
    if len(txn_ids) > 1:
        raise ValueError(f"mixed txn ids in policy check: {sorted(txn_ids)}")
    required = set(policy.required)
    groups: dict[tuple, list[Endorsement]] = {}
    for e in endorsements:
        if e.peer in required:
            groups.setdefault(e.payload_key(), []).append(e)
    best = None
    for group in groups.values():
        if len(group) < policy.threshold:
            continue
        group = sorted(group, key=lambda e: e.peer)
        peers = tuple(e.peer for e in group)
        if best is None or (-len(group), peers) < (-len(best), tuple(e.peer for e in best)):
            best = group
    if best is None:
        return False, []
    return True, best


def endorse(proposal: Proposal, ledger, peer_id: str, now: int,
            authorized: set[str] | None = None) -> Endorsement | None:
    """Produce an endorsement from the peer's committed state, or refuse.

    authorized=None means every client identity is authorized. A refusal
    (unauthorized client) returns None; it is counted by the caller, never
    fatal.
    """
    if authorized is not None and proposal.client not in authorized:
        return None
    read_set, write_set, response = execute(proposal.op, ledger)
    return Endorsement(txn_id=proposal.txn_id, peer=peer_id,
                       read_set=read_set, write_set=write_set,
                       response=response, issued_at=now)
