"""Experiment configuration: schema, validation, and resolution.

A config file is a single JSON document; any field left out takes its value
from the PAPER_LIKE profile. Validation errors always name the offending
field with its dotted path.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass

from . import presets
from .engine import US_PER_SECOND, LatencyModel
from .ordering import BlockCutterConfig
from .smallbank import AccessPattern, OpKind, WorkloadConfig


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ServiceTimes:
    endorse: int
    validate_per_txn: int
    orderer_forward: int
    orderer_notice: int
    orderer_deliver_stagger: int
    broker_append: int
    leader_order: int
    leader_copy_send: int
    leader_notice_send: int
    leader_order_per_byte_ns: int


@dataclass(frozen=True)
class MessageSizes:
    proposal: int
    endorsement: int
    notice: int
    log_ack: int
    log_overhead: int
    block_header: int
    block_txn_summary: int


def _deep_merge(base: dict, overrides: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        here = f"{path}.{key}" if path else key
        if key not in base and not _is_open_dict(path):
            raise ConfigError(f"unknown field {here!r}")
        if here == "workload.op_mix":
            # A mix is a complete distribution; partial edits make no sense.
            out[key] = copy.deepcopy(value)
        elif isinstance(base.get(key), dict):
            if not isinstance(value, dict):
                raise ConfigError(f"field {here!r} must be an object")
            out[key] = _deep_merge(base[key], value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _is_open_dict(path: str) -> bool:
    # Sections whose keys are data, not schema: new keys are welcome.
    return path in ("workload.op_mix", "latency.base_us")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _as_int(raw: dict, path: str, minimum: int | None = None) -> int:
    value = _lookup(raw, path)
    _require(isinstance(value, int) and not isinstance(value, bool),
             f"field {path!r} must be an integer, got {value!r}")
    if minimum is not None:
        _require(value >= minimum, f"field {path!r} must be >= {minimum}")
    return value


def _as_number(raw: dict, path: str, minimum: float | None = None,
               strict: bool = False) -> float:
    value = _lookup(raw, path)
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             f"field {path!r} must be a number, got {value!r}")
    if minimum is not None:
        if strict:
            _require(value > minimum, f"field {path!r} must be > {minimum}")
        else:
            _require(value >= minimum, f"field {path!r} must be >= {minimum}")
    return float(value)


def _lookup(raw: dict, path: str):
    node = raw
    for part in path.split("."):
        node = node[part]
    return node


class ExperimentConfig:
    """Validated, fully resolved experiment description."""

    def __init__(self, raw: dict):
        self.raw = raw
        self.peers = _as_int(raw, "topology.peers", 1)
        self.clients = _as_int(raw, "topology.clients", 1)
        self.orderers = _as_int(raw, "topology.orderers", 1)
        self.brokers = _as_int(raw, "topology.brokers", 1)
        self.non_endorsing = _as_int(raw, "topology.non_endorsing", 0)
        self.zookeepers = _as_int(raw, "topology.zookeepers", 0)

        total = raw["rate"]["total_tps"]
        per_client = raw["rate"]["per_client_tps"]
        _require((total is None) != (per_client is None),
                 "exactly one of rate.total_tps / rate.per_client_tps required")
        if per_client is None:
            _require(isinstance(total, (int, float)) and total > 0,
                     "field 'rate.total_tps' must be > 0")
            self.per_client_tps = float(total) / self.clients
        else:
            _require(isinstance(per_client, (int, float)) and per_client > 0,
                     "field 'rate.per_client_tps' must be > 0")
            self.per_client_tps = float(per_client)
        self.total_tps = self.per_client_tps * self.clients
        cap = raw["rate"]["total_txns_per_client"]
        _require(cap is None or (isinstance(cap, int) and cap >= 0),
                 "field 'rate.total_txns_per_client' must be null or >= 0")
        self.total_txns_per_client = cap

        self.duration_us = int(_as_number(raw, "duration_s", 0, strict=True)
                               * US_PER_SECOND)
        warmup = _as_number(raw, "warmup_fraction", 0.0)
        _require(warmup < 1.0, "field 'warmup_fraction' must be in [0, 1)")
        self.warmup_us = int(self.duration_us * warmup)
        self.drain_limit_us = int(_as_number(raw, "drain_limit_s", 0.0)
                                  * US_PER_SECOND)
        self.seed = _as_int(raw, "seed")
        self.replica = _as_int(raw, "replica", 0)

        w = raw["workload"]
        mix = w["op_mix"]
        known = {k.value for k in OpKind}
        for name in mix:
            _require(name in known, f"unknown op {name!r} in workload.op_mix")
        try:
            self.workload = WorkloadConfig(
                n_accounts=_as_int(raw, "workload.n_accounts", 1),
                op_mix=dict(mix),
                access=AccessPattern(**w["access"]),
                seed=self.seed,
                max_amount=_as_int(raw, "workload.max_amount", 1),
                initial_balance=_as_int(raw, "workload.initial_balance", 0),
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"field 'workload': {exc}") from exc

        threshold = raw["policy"]["threshold"]
        if threshold is None:
            threshold = self.peers
        _require(isinstance(threshold, int) and 1 <= threshold <= self.peers,
                 "field 'policy.threshold' must be in 1..topology.peers")
        self.policy_threshold = threshold

        try:
            self.cutter = BlockCutterConfig(
                max_txn_count=_as_int(raw, "cutter.max_txn_count", 1),
                timeout_us=int(_as_number(raw, "cutter.timeout_s", 0, strict=True)
                               * US_PER_SECOND),
                max_block_bytes=_as_int(raw, "cutter.max_block_bytes", 1),
            )
        except ValueError as exc:
            raise ConfigError(f"field 'cutter': {exc}") from exc

        rf = raw["replication"]["replication_factor"]
        if rf is None:
            rf = max(1, self.brokers - 1)
        _require(isinstance(rf, int) and 1 <= rf <= self.brokers,
                 "field 'replication.replication_factor' must be in 1..topology.brokers")
        self.replication_factor = rf
        insync = _as_int(raw, "replication.min_insync", 1)
        _require(insync <= rf,
                 "field 'replication.min_insync' must be <= replication_factor")
        self.min_insync = insync

        lat = raw["latency"]
        base = dict(lat["base_us"])
        default = base.pop("default", 1000)
        for key, value in base.items():
            _require(isinstance(value, int) and value >= 0,
                     f"field 'latency.base_us.{key}' must be an integer >= 0")
            _require(len(key.split("-")) == 2,
                     f"field 'latency.base_us.{key}': keys look like 'client-peer'")
        jitter = _as_number(raw, "latency.jitter_fraction", 0.0)
        _require(jitter < 1.0, "field 'latency.jitter_fraction' must be in [0, 1)")
        self.latency = LatencyModel(
            base_us=base,
            default_us=default,
            per_byte_ns=_as_int(raw, "latency.per_byte_ns", 0),
            jitter_fraction=jitter,
        )

        svc = {k: _as_int(raw, f"service_us.{k}", 0) for k in raw["service_us"]}
        self.service = ServiceTimes(**svc)
        self.sizes = MessageSizes(**{k: _as_int(raw, f"sizes_bytes.{k}", 1)
                                     for k in raw["sizes_bytes"]})

        self.endorse_timeout_us = int(
            _as_number(raw, "timeouts.endorse_s", 0, strict=True) * US_PER_SECOND)
        self.broadcast_timeout_us = int(
            _as_number(raw, "timeouts.broadcast_s", 0, strict=True) * US_PER_SECOND)
        self.orderer_capacity = _as_int(raw, "queues.orderer_capacity", 1)

    # -- construction --------------------------------------------------------

    @classmethod
    def from_dict(cls, overrides: dict | None = None) -> "ExperimentConfig":
        raw = _deep_merge(presets.PAPER_LIKE, overrides or {})
        return cls(raw)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        return cls.from_dict(data)

    def resolved(self) -> dict:
        """Full config echo embedded in every output file."""
        out = copy.deepcopy(self.raw)
        out["resolved"] = {
            "per_client_tps": self.per_client_tps,
            "total_tps": self.total_tps,
            "policy_threshold": self.policy_threshold,
            "replication_factor": self.replication_factor,
            "min_insync": self.min_insync,
            "warmup_us": self.warmup_us,
            "duration_us": self.duration_us,
        }
        return out


def validate_param_path(path: str) -> None:
    """Check that a sweep axis names a real config field."""
    node = presets.PAPER_LIKE
    parts = path.split(".")
    for i, part in enumerate(parts):
        here = ".".join(parts[: i + 1])
        if not isinstance(node, dict) or part not in node:
            if _is_open_dict(".".join(parts[:i])):
                return
            raise ConfigError(f"unknown sweep parameter {here!r}")
        node = node[part]


def set_param(overrides: dict, path: str, value) -> None:
    parts = path.split(".")
    node = overrides
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value
