"""Smallbank contract execution and workload generation.

Each customer has a checking and a savings account. The six operations and
the exact semantics implemented (and tested against a serial oracle):

  transact_savings(c, amt)   savings += amt; rejected if the result < 0
  deposit_checking(c, amt)   checking += amt
  send_payment(c1, c2, amt)  move amt checking->checking; rejected if
                             c1.checking < amt
  write_check(c, amt)        checking -= amt, with an extra 1 overdraft
                             penalty when checking + savings < amt
  amalgamate(c1, c2)         move all of c1's funds into c2.checking
  query(c)                   returns checking + savings, writes nothing

Execution is a pure function of (op, snapshot): it records every key read
with the version observed, never mutates the snapshot, and a rejection
yields an empty write set. Unknown accounts are rejected.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from .ledger import ReadSet, WriteSet


class OpKind(enum.Enum):
    TRANSACT_SAVINGS = "transact_savings"
    DEPOSIT_CHECKING = "deposit_checking"
    SEND_PAYMENT = "send_payment"
    WRITE_CHECK = "write_check"
    AMALGAMATE = "amalgamate"
    QUERY = "query"


TWO_ACCOUNT_OPS = (OpKind.SEND_PAYMENT, OpKind.AMALGAMATE)
AMOUNT_OPS = (OpKind.TRANSACT_SAVINGS, OpKind.DEPOSIT_CHECKING,
              OpKind.SEND_PAYMENT, OpKind.WRITE_CHECK)

REJECTED = None  # execute() response for an application-level refusal


@dataclass(slots=True)
class SmallbankOp:
    kind: OpKind
    accounts: tuple[int, ...]
    amount: int | None = None

    def __post_init__(self):
        if self.kind in TWO_ACCOUNT_OPS:
            if len(self.accounts) != 2 or self.accounts[0] == self.accounts[1]:
                raise ValueError(f"{self.kind.value} needs two distinct customers")
        elif len(self.accounts) != 1:
            raise ValueError(f"{self.kind.value} takes one customer")
        if self.amount is not None and self.amount < 0:
            raise ValueError("amounts must be non-negative")


@dataclass(slots=True)
class Proposal:
    txn_id: str
    client: str
    op: SmallbankOp
    submitted_at: int | None = None


def checking_key(customer: int) -> str:
    return f"cust/{customer}/checking"


def savings_key(customer: int) -> str:
    return f"cust/{customer}/savings"


def execute(op: SmallbankOp, snapshot) -> tuple[ReadSet, WriteSet, int | None]:
    """Run op against a read-only state view, producing its read/write sets.

    snapshot only needs read_state(key) -> (value, version) | None.
    """
    rs = ReadSet()
    ws = WriteSet()

    def read(key: str) -> int | None:
        entry = snapshot.read_state(key)
        if entry is None:
            rs.reads.append((key, None))
            return None
        value, version = entry
        rs.reads.append((key, version))
        return value

    kind = op.kind
    if kind is OpKind.QUERY:
        c, = op.accounts
        checking = read(checking_key(c))
        savings = read(savings_key(c))
        if checking is None or savings is None:
            return rs, ws, REJECTED
        return rs, ws, checking + savings

    if kind is OpKind.DEPOSIT_CHECKING:
        c, = op.accounts
        checking = read(checking_key(c))
        if checking is None:
            return rs, ws, REJECTED
        new = checking + op.amount
        ws.writes.append((checking_key(c), new))
        return rs, ws, new

    if kind is OpKind.TRANSACT_SAVINGS:
        c, = op.accounts
        savings = read(savings_key(c))
        if savings is None:
            return rs, ws, REJECTED
        new = savings + op.amount
        if new < 0:
            return rs, ws, REJECTED
        ws.writes.append((savings_key(c), new))
        return rs, ws, new

    if kind is OpKind.WRITE_CHECK:
        c, = op.accounts
        checking = read(checking_key(c))
        savings = read(savings_key(c))
        if checking is None or savings is None:
            return rs, ws, REJECTED
        penalty = 1 if checking + savings < op.amount else 0
        new = checking - op.amount - penalty
        ws.writes.append((checking_key(c), new))
        return rs, ws, new

    if kind is OpKind.SEND_PAYMENT:
        src, dst = op.accounts
        src_checking = read(checking_key(src))
        dst_checking = read(checking_key(dst))
        if src_checking is None or dst_checking is None:
            return rs, ws, REJECTED
        if src_checking < op.amount:
            return rs, ws, REJECTED
        ws.writes.append((checking_key(src), src_checking - op.amount))
        ws.writes.append((checking_key(dst), dst_checking + op.amount))
        return rs, ws, src_checking - op.amount

    if kind is OpKind.AMALGAMATE:
        src, dst = op.accounts
        src_checking = read(checking_key(src))
        src_savings = read(savings_key(src))
        dst_checking = read(checking_key(dst))
        if src_checking is None or src_savings is None or dst_checking is None:
            return rs, ws, REJECTED
        moved = src_checking + src_savings
        ws.writes.append((checking_key(src), 0))
        ws.writes.append((savings_key(src), 0))
        ws.writes.append((checking_key(dst), dst_checking + moved))
        return rs, ws, moved

    raise ValueError(f"unhandled op kind {kind!r}")


@dataclass
class AccessPattern:
    kind: str = "uniform"  # "uniform" | "hotspot"
    fraction_hot: float = 0.01
    prob_hot: float = 0.5


@dataclass
class WorkloadConfig:
    n_accounts: int = 10000
    op_mix: dict = field(default_factory=lambda: dict(DEFAULT_OP_MIX))
    access: AccessPattern = field(default_factory=AccessPattern)
    seed: int | str = 0
    max_amount: int = 200
    initial_balance: int = 10000

    def __post_init__(self):
        if self.n_accounts < 1:
            raise ValueError("n_accounts must be >= 1")
        total = sum(self.op_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"op_mix must sum to 1, got {total}")
        if any(not 0.0 <= p <= 1.0 for p in self.op_mix.values()):
            raise ValueError("op_mix probabilities must be in [0, 1]")


DEFAULT_OP_MIX = {
    OpKind.TRANSACT_SAVINGS.value: 0.15,
    OpKind.DEPOSIT_CHECKING.value: 0.15,
    OpKind.SEND_PAYMENT.value: 0.25,
    OpKind.WRITE_CHECK.value: 0.15,
    OpKind.AMALGAMATE.value: 0.15,
    OpKind.QUERY.value: 0.15,
}


def _pick_account(rng: random.Random, cfg: WorkloadConfig) -> int:
    access = cfg.access
    if access.kind == "hotspot":
        hot = max(1, int(cfg.n_accounts * access.fraction_hot))
        if rng.random() < access.prob_hot:
            return rng.randrange(hot)
        if hot < cfg.n_accounts:
            return rng.randrange(hot, cfg.n_accounts)
        return rng.randrange(cfg.n_accounts)
    return rng.randrange(cfg.n_accounts)


def generate(cfg: WorkloadConfig, count: int, client: str = "",
             start_index: int = 0) -> list[Proposal]:
    """Deterministic proposal stream; op frequencies converge to op_mix."""
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = random.Random(f"{cfg.seed}:wl:{client}")
    kinds = [OpKind(name) for name in cfg.op_mix]
    weights = list(cfg.op_mix.values())
    out = []
    picks = rng.choices(kinds, weights=weights, k=count) if count else []
    for i, kind in enumerate(picks):
        a = _pick_account(rng, cfg)
        if kind in TWO_ACCOUNT_OPS:
            b = _pick_account(rng, cfg)
            while b == a:
                b = _pick_account(rng, cfg)
            accounts = (a, b)
        else:
            accounts = (a,)
        amount = rng.randint(1, cfg.max_amount) if kind in AMOUNT_OPS else None
        txn_id = f"{client or 'txn'}-{start_index + i:06d}"
        out.append(Proposal(txn_id=txn_id, client=client,
                            op=SmallbankOp(kind, accounts, amount)))
    return out


def initial_write_set(cfg: WorkloadConfig) -> WriteSet:
    """Genesis load: every account opens both balances at initial_balance."""
    ws = WriteSet()
    for c in range(cfg.n_accounts):
        ws.writes.append((checking_key(c), cfg.initial_balance))
        ws.writes.append((savings_key(c), cfg.initial_balance))
    return ws


def total_balance(state_items) -> int:
    """Sum of all committed customer balances, for conservation checks."""
    return sum(value for key, (value, _ver) in state_items
               if key.startswith("cust/"))
