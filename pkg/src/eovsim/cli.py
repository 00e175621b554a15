"""Command-line experiment runner: run / sweep / report subcommands.

Exit codes: 0 on success, 1 for configuration errors, 2 for runtime errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import presets
from .config import ConfigError, ExperimentConfig
from .metrics import journeys_to_csv
from .simulation import run_simulation
from .sweep import SweepSpec, extract_figure, read_cells_csv, run_sweep


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eovsim",
        description="Discrete-event simulator of an execute-order-validate "
                    "blockchain pipeline with a fixed-rate benchmark harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment")
    run_p.add_argument("--config", help="JSON config file (defaults inside)")
    run_p.add_argument("--out", default="out", help="output directory")
    run_p.add_argument("--seed", type=int, help="override the config seed")
    run_p.add_argument("--duration", type=float,
                       help="override duration in seconds")
    run_p.add_argument("--block-trace", action="store_true",
                       help="also dump one JSON line per block")

    sweep_p = sub.add_parser("sweep", help="run a parameter sweep")
    source = sweep_p.add_mutually_exclusive_group(required=True)
    source.add_argument("--spec", help="JSON sweep spec file")
    source.add_argument("--figure", choices=sorted(presets.FIGURES),
                        help="named figure scenario")
    sweep_p.add_argument("--config", help="base config JSON merged under the spec")
    sweep_p.add_argument("--out", default="out", help="output directory")
    sweep_p.add_argument("--seed", type=int, help="base seed (cell i gets seed+i)")
    sweep_p.add_argument("--workers", type=int, default=1,
                         help="parallel worker processes")

    report_p = sub.add_parser("report", help="extract plot data from a sweep")
    report_p.add_argument("--cells", required=True, help="cells.csv from sweep")
    report_p.add_argument("--figure", required=True,
                          choices=sorted(presets.FIGURES))
    report_p.add_argument("--out", default="out", help="output directory")
    return parser


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def cmd_run(args) -> int:
    overrides = _load_json(args.config) if args.config else {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.duration is not None:
        overrides["duration_s"] = args.duration
    cfg = ExperimentConfig.from_dict(overrides)
    result = run_simulation(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(result.report.to_json())
    journeys_to_csv(result.journeys, out / "journeys.csv")
    if args.block_trace:
        ledger = result.sim.all_peers()[0].ledger
        with open(out / "blocks.jsonl", "w") as fh:
            for line in ledger.trace_lines():
                fh.write(line + "\n")
    report = result.report
    print(f"committed {report.committed} txns, "
          f"throughput {report.throughput_tps:.1f} tps, "
          f"avg latency {report.avg_latency_s if report.avg_latency_s is not None else 'n/a'} s")
    print(f"wrote {out / 'report.json'} and {out / 'journeys.csv'}")
    return 0


def cmd_sweep(args) -> int:
    if args.spec:
        spec_dict = _load_json(args.spec)
        if args.config:
            # file spec's own base wins over the shared base config
            spec_dict["base"] = presets.merge_dicts(
                _load_json(args.config), spec_dict.get("base", {}))
    else:
        spec_dict = presets.figure_sweep(
            args.figure, _load_json(args.config) if args.config else None)
    spec = SweepSpec.from_dict(spec_dict)
    rows = run_sweep(spec, args.out, base_seed=args.seed, workers=args.workers)
    failed = sum(1 for row in rows if row.get("error"))
    print(f"{len(rows)} cells -> {Path(args.out) / 'cells.csv'}"
          + (f" ({failed} failed)" if failed else ""))
    return 0


def cmd_report(args) -> int:
    rows = read_cells_csv(args.cells)
    written = extract_figure(rows, args.figure, args.out)
    for path in written:
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "report":
            return cmd_report(args)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
