"""Builds a topology from a config, runs it to quiescence, and reports.

Node naming: client000.., peer000.. (endorsing), npeer000.. (non-endorsing),
orderer000.., broker000..; broker000 is the static log leader. Every peer
starts from an identical genesis block carrying the initial account
balances, applied directly at build time (it predates the policy machinery).
Clients spray envelopes over orderers round-robin by submission index and
observe commits through their round-robin home peer.
"""

from __future__ import annotations

from dataclasses import dataclass

from .committer import EndorsingPeer, NonEndorsingPeer, ValidationFlag
from .config import ExperimentConfig
from .driver import (ClientConfig, ClientNode, TxnJourney, submission_times)
from .endorser import EndorsementPolicy
from .engine import (Engine, Message, MessageKind, Node, NodeClass,
                     TraceSummary, timer)
from .ledger import (GENESIS_PREV_HASH, Block, CutReason, Ledger, ReadSet,
                     hash_block)
from .metrics import RunReport, aggregate
from .ordering import (BlockCutter, BrokerNode, GenesisLoad, OrdererNode)
from .smallbank import generate, initial_write_set, total_balance

GENESIS_TXN_ID = "genesis-load"


class MonitorNode(Node):
    """Zero-cost observer that snapshots orderer counters at the window end."""

    def __init__(self, node_id: str, orderers: list[str]):
        super().__init__(node_id, NodeClass.MONITOR)
        self.orderers = orderers
        self.window_attempts = 0
        self.window_successes = 0

    def handle(self, msg: Message) -> None:
        if msg.kind is MessageKind.TIMER_FIRE and msg.body.tag == "window_end":
            for orderer_id in self.orderers:
                orderer = self.engine.nodes[orderer_id]
                self.window_attempts += orderer.enqueue_attempts
                self.window_successes += orderer.enqueue_successes


@dataclass
class Simulation:
    config: ExperimentConfig
    engine: Engine
    clients: list[ClientNode]
    endorsing: list[EndorsingPeer]
    non_endorsing: list[NonEndorsingPeer]
    orderers: list[OrdererNode]
    brokers: list[BrokerNode]
    monitor: MonitorNode
    policy: EndorsementPolicy

    @property
    def leader(self) -> BrokerNode:
        return self.brokers[0]

    def all_peers(self):
        return self.endorsing + self.non_endorsing


def genesis_block(cfg: ExperimentConfig) -> Block:
    ws = initial_write_set(cfg.workload)
    load = GenesisLoad(txn_id=GENESIS_TXN_ID, write_set=ws, read_set=ReadSet(),
                       endorsements=(), size_bytes=max(1, 16 * len(ws.writes)))
    return Block(height=0, prev_hash=GENESIS_PREV_HASH, txns=[load],
                 cut_reason=CutReason.COUNT_THRESHOLD, created_at=0)


def build(cfg: ExperimentConfig) -> Simulation:
    engine = Engine(cfg.latency, seed=cfg.seed)

    peer_ids = [f"peer{i:03d}" for i in range(cfg.peers)]
    npeer_ids = [f"npeer{i:03d}" for i in range(cfg.non_endorsing)]
    client_ids = [f"client{i:03d}" for i in range(cfg.clients)]
    orderer_ids = [f"orderer{i:03d}" for i in range(cfg.orderers)]
    broker_ids = [f"broker{i:03d}" for i in range(cfg.brokers)]
    leader_id = broker_ids[0]

    policy = EndorsementPolicy(required=tuple(peer_ids),
                               threshold=cfg.policy_threshold)

    genesis = genesis_block(cfg)
    tip = hash_block(genesis)

    base_ledger = Ledger()
    base_ledger.append_block(genesis, [ValidationFlag.VALID])
    base_ledger.apply_write_set(genesis.txns[0].write_set, (0, 0))

    endorsing = [EndorsingPeer(pid, base_ledger.fork(), policy, cfg.service,
                               cfg.sizes) for pid in peer_ids]
    non_endorsing = [NonEndorsingPeer(pid, base_ledger.fork(), policy,
                                      cfg.service, cfg.sizes)
                     for pid in npeer_ids]
    for i, npeer in enumerate(non_endorsing):
        anchor = endorsing[i % len(endorsing)]
        anchor.gossip_targets.append(npeer.id)

    orderers = [OrdererNode(oid, leader_id, peer_ids, cfg.orderer_capacity,
                            cfg.service, cfg.sizes) for oid in orderer_ids]

    cutter = BlockCutter(cfg.cutter, next_height=1, prev_hash=tip)
    followers = broker_ids[1:cfg.replication_factor]
    brokers = [BrokerNode(leader_id, True, leader_id, followers,
                          cfg.min_insync, orderer_ids, cutter,
                          cfg.service, cfg.sizes)]
    brokers += [BrokerNode(bid, False, leader_id, [], cfg.min_insync,
                           orderer_ids, None, cfg.service, cfg.sizes)
                for bid in broker_ids[1:]]

    client_cfg = ClientConfig(rate_tps=cfg.per_client_tps,
                              duration_us=cfg.duration_us,
                              endorse_timeout_us=cfg.endorse_timeout_us,
                              broadcast_timeout_us=cfg.broadcast_timeout_us,
                              max_txns=cfg.total_txns_per_client)
    plan = len(submission_times(client_cfg))
    clients = []
    for i, cid in enumerate(client_ids):
        proposals = generate(cfg.workload, plan, client=cid)
        client = ClientNode(cid, client_cfg, proposals, peer_ids, orderer_ids,
                            policy, cfg.sizes)
        clients.append(client)
        home = endorsing[i % len(endorsing)]
        home.home_clients.append(cid)

    monitor = MonitorNode("monitor", orderer_ids)

    for node in endorsing + non_endorsing + orderers + brokers + clients:
        engine.add_node(node)
    engine.add_node(monitor)

    for client in clients:
        client.arm()
    engine.schedule(monitor.id, timer("window_end"), cfg.duration_us)

    return Simulation(config=cfg, engine=engine, clients=clients,
                      endorsing=endorsing, non_endorsing=non_endorsing,
                      orderers=orderers, brokers=brokers, monitor=monitor,
                      policy=policy)


@dataclass
class RunResult:
    report: RunReport
    journeys: list[TxnJourney]
    sim: Simulation
    trace: TraceSummary


def run_simulation(cfg: ExperimentConfig) -> RunResult:
    sim = build(cfg)
    limit = cfg.duration_us + cfg.drain_limit_us
    trace = sim.engine.run_until_quiescent(limit)

    journeys: list[TxnJourney] = []
    for client in sim.clients:
        client.finish_open_journeys()
        journeys.extend(client.journeys.values())

    report = collect_report(sim, trace, journeys)
    return RunResult(report=report, journeys=journeys, sim=sim, trace=trace)


def collect_report(sim: Simulation, trace: TraceSummary,
                   journeys: list[TxnJourney]) -> RunReport:
    cfg = sim.config
    peers = sim.all_peers()
    observer = peers[0]

    views = [(p.ledger.height, p.ledger.tip_hash, p.ledger.state_digest(),
              tuple(sorted((k.value, v) for k, v in p.flag_counts.items())))
             for p in peers]
    all_agree = len(set(views)) == 1

    ledger = observer.ledger
    workload_blocks = ledger.blocks[1:]  # exclude genesis
    reasons = {reason.value: 0 for reason in CutReason}
    for block in workload_blocks:
        reasons[block.cut_reason.value] += 1
    fills = [len(b.txns) for b in workload_blocks]
    block_stats = {
        "count": len(workload_blocks),
        "mean_fill": sum(fills) / len(fills) if fills else None,
        "cut_reasons": reasons,
    }

    flag_counts = {
        "valid": observer.flag_counts[ValidationFlag.VALID],
        "policy_violation": observer.flag_counts[ValidationFlag.POLICY_VIOLATION],
        "mvcc_conflict": observer.flag_counts[ValidationFlag.MVCC_CONFLICT],
    }
    # Genesis is applied outside the validation path; keep it out of the counts.
    flag_counts["valid"] -= 1

    agreement = {
        "final_height": ledger.height,
        "tip_hash": ledger.tip_hash,
        "state_digest": ledger.state_digest(),
        "all_peers_agree": all_agree,
        "total_balance": total_balance(ledger.state_items()),
    }

    attempts_final = sum(o.enqueue_attempts for o in sim.orderers)
    successes_final = sum(o.enqueue_successes for o in sim.orderers)
    refusals = sum(o.refusals for o in sim.orderers)
    endorse_refusals = sum(p.endorse_refusals for p in sim.endorsing)

    per_node = {}
    for node in sim.engine.nodes.values():
        if node.klass is NodeClass.MONITOR:
            continue
        per_node[node.id] = {
            "class": node.klass.value,
            "sent_msgs": node.sent_msgs,
            "sent_bytes": node.sent_bytes,
            "recv_msgs": node.recv_msgs,
            "recv_bytes": node.recv_bytes,
        }

    return aggregate(
        journeys,
        config_echo=cfg.resolved(),
        seed=cfg.seed,
        window=(cfg.warmup_us, cfg.duration_us),
        orderer_window=(sim.monitor.window_attempts,
                        sim.monitor.window_successes),
        orderer_final=(attempts_final, successes_final, refusals),
        endorse_refusals=endorse_refusals,
        block_stats=block_stats,
        flag_counts=flag_counts,
        agreement=agreement,
        trace=trace,
        per_node=per_node,
    )
