"""Parameter sweeps and plot-ready figure extraction.

A sweep spec holds a base config plus axis groups. Values inside one group
advance together (paired parameters like peers/clients); the groups
themselves combine as a cross product. Cells are fully isolated runs, so
they can execute on parallel workers without changing any result; each
cell's seed is base seed + cell index and is recorded in its row.
"""

from __future__ import annotations

import copy
import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import presets
from .config import ConfigError, ExperimentConfig, set_param, validate_param_path
from .metrics import journeys_to_csv
from .simulation import run_simulation

CELL_SCALARS = ["throughput_tps", "avg_latency_s", "p50_s", "p95_s", "r_ratio",
                "r_ratio_final", "dropped_endorse", "dropped_broadcast",
                "invalid_committed", "blocks", "mean_block_fill"]


@dataclass
class SweepSpec:
    base: dict
    groups: list[dict]  # {"params": [...], "values": [[...], ...]}

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        base = data.get("base", {})
        groups = []
        for axis in data.get("axes", []):
            if "param" in axis:
                params = [axis["param"]]
                values = [[v] for v in axis["values"]]
            else:
                params = list(axis["params"])
                values = [list(row) for row in axis["values"]]
            for path in params:
                validate_param_path(path)
            for row in values:
                if len(row) != len(params):
                    raise ConfigError(
                        f"axis row {row!r} does not match params {params!r}")
            groups.append({"params": params, "values": values})
        return cls(base=base, groups=groups)

    @classmethod
    def from_file(cls, path) -> "SweepSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def varied_params(self) -> list[str]:
        out = []
        for group in self.groups:
            out.extend(group["params"])
        return out

    def cells(self) -> list[dict]:
        """Flat list of {param: value} assignments, cross product of groups."""
        assignments = [{}]
        for group in self.groups:
            expanded = []
            for assignment in assignments:
                for row in group["values"]:
                    new = dict(assignment)
                    new.update(zip(group["params"], row))
                    expanded.append(new)
            assignments = expanded
        return assignments


def _cell_config(spec: SweepSpec, assignment: dict, base_seed: int | None,
                 index: int) -> dict:
    overrides = copy.deepcopy(spec.base)
    for path, value in assignment.items():
        set_param(overrides, path, value)
    seed = (base_seed if base_seed is not None
            else overrides.get("seed", presets.PAPER_LIKE["seed"]))
    set_param(overrides, "seed", seed + index)
    return overrides


def run_cell(overrides: dict, out_dir: str | None) -> dict:
    """Execute one sweep cell; returns its RunReport as a plain dict."""
    cfg = ExperimentConfig.from_dict(overrides)
    result = run_simulation(cfg)
    if out_dir is not None:
        cell_dir = Path(out_dir)
        cell_dir.mkdir(parents=True, exist_ok=True)
        (cell_dir / "report.json").write_text(result.report.to_json())
        journeys_to_csv(result.journeys, cell_dir / "journeys.csv")
    report = result.report
    return {name: getattr(report, name) for name in CELL_SCALARS} | {
        "seed": report.seed,
        "offered_tps": cfg.total_tps,
    }


def _run_cell_task(args):
    index, overrides, out_dir, assignment = args
    try:
        row = run_cell(overrides, out_dir)
        row["error"] = ""
    except Exception as exc:  # a failing cell must not abort the sweep
        row = {name: "" for name in CELL_SCALARS}
        row["seed"] = overrides.get("seed", "")
        row["offered_tps"] = ""
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["cell"] = index
    row.update(assignment)
    return row


def run_sweep(spec: SweepSpec, out_dir, base_seed: int | None = None,
              workers: int = 1, keep_cell_artifacts: bool = True) -> list[dict]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = []
    for index, assignment in enumerate(spec.cells()):
        overrides = _cell_config(spec, assignment, base_seed, index)
        cell_dir = str(out / "cells" / f"cell_{index:03d}") \
            if keep_cell_artifacts else None
        tasks.append((index, overrides, cell_dir, assignment))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell_task, tasks))
    else:
        rows = [_run_cell_task(task) for task in tasks]

    write_cells_csv(rows, spec.varied_params(), out / "cells.csv")
    return rows


def write_cells_csv(rows: list[dict], varied: list[str], path) -> None:
    columns = (["cell"] + varied + ["seed", "offered_tps"]
               + CELL_SCALARS + ["error"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(col, "")) for col in columns])


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


# -- figure extraction -------------------------------------------------------

def read_cells_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def extract_figure(cells_rows: list[dict], figure: str, out_dir) -> list[Path]:
    """Write two-column (x, y, stderr-over-seeds) series files for a figure."""
    if figure not in presets.FIGURES:
        raise ConfigError(f"unknown figure {figure!r}")
    fig = presets.FIGURES[figure]
    x_col = fig["x"]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for row in cells_rows:
        if x_col not in row:
            raise ConfigError(f"cells csv is missing column {x_col!r}")

    series_col = fig["series_by"]
    series_values = sorted({row[series_col] for row in cells_rows}) \
        if series_col else [None]
    for y_col in fig["y"]:
        if cells_rows and y_col not in cells_rows[0]:
            raise ConfigError(f"cells csv is missing column {y_col!r}")
        for series_value in series_values:
            rows = [r for r in cells_rows
                    if series_col is None or r[series_col] == series_value]
            grouped: dict[float, list[float]] = {}
            for row in rows:
                if row.get("error"):
                    continue
                if row[y_col] == "":
                    continue
                grouped.setdefault(float(row[x_col]), []).append(float(row[y_col]))
            label = f"_{series_col.split('.')[-1]}_{series_value}" \
                if series_col else ""
            path = out / f"{figure}{label}_{y_col}.dat"
            with open(path, "w") as fh:
                fh.write(f"# {fig['description']}\n")
                fh.write(f"# x={x_col} y={y_col}\n")
                for x in sorted(grouped):
                    ys = grouped[x]
                    mean = sum(ys) / len(ys)
                    if len(ys) > 1:
                        var = sum((y - mean) ** 2 for y in ys) / (len(ys) - 1)
                        stderr = math.sqrt(var / len(ys))
                    else:
                        stderr = 0.0
                    fh.write(f"{x:g} {mean:.6f} {stderr:.6f}\n")
            written.append(path)
    return written
