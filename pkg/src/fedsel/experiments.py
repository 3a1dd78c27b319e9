"""Selection experiments: single rounds, parameter sweeps, summaries and plots."""

from __future__ import annotations

import csv
import dataclasses
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from fedsel.config import ExperimentConfig, SWEEP_PARAMS, ConfigError
from fedsel.linkbudget import link_budgets
from fedsel.population import distances_km, sample_population
from fedsel.selection import (
    SelectionInstance,
    WorkBoundExceeded,
    best_sinr_select,
    dp_optimal_select,
    feasible_filter,
    greedy_select,
)

METRICS_COLUMNS = (
    "algorithm", "sweep_param", "sweep_value", "seed", "objective", "total_sensed_bytes",
    "total_update_bytes", "n_selected", "n_feasible", "wall_time_ms",
)


@dataclass
class MetricsRow:
    algorithm: str
    sweep_param: str
    sweep_value: float
    seed: int
    objective: float
    total_sensed_bytes: int
    total_update_bytes: int
    n_selected: int
    n_feasible: int
    wall_time_ms: float | None = None
    skip_reason: str | None = None

    @property
    def skipped(self) -> bool:
        return self.skip_reason is not None


def build_instance(config: ExperimentConfig, seed: int, n_devices: int | None = None) -> SelectionInstance:
    """Sample a population and turn it into a selection instance with unbounded capacity."""
    pop_cfg = config.population
    if n_devices is not None and n_devices != pop_cfg.n_devices:
        pop_cfg = dataclasses.replace(pop_cfg, n_devices=int(n_devices))
    devices = sample_population(pop_cfg, seed)
    dist = distances_km(devices, pop_cfg.server_position)
    budgets = link_budgets(dist, config.radio)
    return feasible_filter(devices, budgets, pop_cfg.computational_intensity, config.t_upd_s)


def _solve(config: ExperimentConfig, algorithm: str, instance: SelectionInstance):
    if algorithm == "greedy":
        return greedy_select(instance)
    if algorithm == "best_sinr":
        return best_sinr_select(instance)
    if algorithm == "dp_oracle":
        return dp_optimal_select(instance, config.dp_quantum_bytes, config.dp_work_limit)
    raise ConfigError(f"unknown algorithm {algorithm!r}")


def solve_instance(config: ExperimentConfig, instance: SelectionInstance, seed: int,
                   sweep_param: str = "", sweep_value: float = math.nan) -> list[MetricsRow]:
    rows = []
    for alg in config.algorithms:
        t0 = time.perf_counter()
        try:
            res = _solve(config, alg, instance)
        except WorkBoundExceeded as exc:
            rows.append(MetricsRow(alg, sweep_param, sweep_value, seed, math.nan, 0, 0, 0,
                                   sum(it.feasible for it in instance.items), skip_reason=str(exc)))
            continue
        elapsed = (time.perf_counter() - t0) * 1e3 if config.record_timing else None
        rows.append(MetricsRow(
            algorithm=alg,
            sweep_param=sweep_param,
            sweep_value=sweep_value,
            seed=seed,
            objective=res.objective,
            total_sensed_bytes=res.total_sensed_bytes,
            total_update_bytes=res.total_update_bytes,
            n_selected=res.n_selected,
            n_feasible=res.n_feasible,
            wall_time_ms=elapsed,
        ))
    return rows


def run_round(config: ExperimentConfig, seed: int) -> list[MetricsRow]:
    """One selection round at the configured N and L_max, one row per algorithm."""
    instance = build_instance(config, seed).with_capacity(config.l_max_bytes)
    return solve_instance(config, instance, seed, "l_max_bytes", config.l_max_bytes)


def _seed_rows(config: ExperimentConfig, seed: int) -> list[MetricsRow]:
    param, grid = config.sweep.param, config.sweep.grid
    rows = []
    if param == "l_max_bytes":
        # one population per seed, reused across capacities
        base = build_instance(config, seed)
        for value in grid:
            rows += solve_instance(config, base.with_capacity(value), seed, param, value)
    else:
        for value in grid:
            inst = build_instance(config, seed, int(value)).with_capacity(config.l_max_bytes)
            rows += solve_instance(config, inst, seed, param, value)
    return rows


def sweep(config: ExperimentConfig, jobs: int = 1) -> list[MetricsRow]:
    """All (grid value, seed, algorithm) rows, sorted in that order.

    Skipped DP rows are included with ``skip_reason`` set.
    """
    config.validate()
    if config.sweep.param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {config.sweep.param!r}")
    if jobs > 1 and len(config.seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_seed_rows, [config] * len(config.seeds), config.seeds))
    else:
        chunks = [_seed_rows(config, s) for s in config.seeds]
    rows = [r for chunk in chunks for r in chunk]
    grid_pos = {v: i for i, v in enumerate(config.sweep.grid)}
    alg_pos = {a: i for i, a in enumerate(config.algorithms)}
    rows.sort(key=lambda r: (grid_pos[r.sweep_value], r.seed, alg_pos[r.algorithm]))
    return rows


@dataclass
class SummaryRow:
    algorithm: str
    sweep_param: str
    sweep_value: float
    n_runs: int
    objective_mean: float
    objective_sd: float
    total_sensed_mean: float
    total_sensed_sd: float
    n_selected_mean: float
    n_feasible_mean: float


SUMMARY_COLUMNS = tuple(f.name for f in dataclasses.fields(SummaryRow))


def summarize(rows: list[MetricsRow]) -> list[SummaryRow]:
    """Mean and population standard deviation per (algorithm, sweep value), over seeds."""
    rows = [r for r in rows if not r.skipped]
    if not rows:
        raise ValueError("nothing to summarize")
    groups: dict[tuple, list[MetricsRow]] = {}
    for r in rows:
        groups.setdefault((r.algorithm, r.sweep_param, r.sweep_value), []).append(r)
    out = []
    for (alg, param, value), grp in groups.items():
        obj = [r.objective for r in grp]
        sensed = [float(r.total_sensed_bytes) for r in grp]
        out.append(SummaryRow(
            algorithm=alg,
            sweep_param=param,
            sweep_value=value,
            n_runs=len(grp),
            objective_mean=statistics.fmean(obj),
            objective_sd=statistics.pstdev(obj),
            total_sensed_mean=statistics.fmean(sensed),
            total_sensed_sd=statistics.pstdev(sensed),
            n_selected_mean=statistics.fmean(r.n_selected for r in grp),
            n_feasible_mean=statistics.fmean(r.n_feasible for r in grp),
        ))
    return out


# --------------------------------------------------------------------------- output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if v.is_integer() and abs(v) < 1e15:
            return str(int(v))
        return repr(v)
    return str(v)


def write_csv(path, columns, records, provenance: list[str] | None = None) -> None:
    """Write ``records`` (dataclass instances) with a header row.

    ``provenance`` lines go first, each prefixed with ``#``.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in provenance or ():
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for rec in records:
            writer.writerow([_fmt(getattr(rec, c)) for c in columns])


def write_metrics_csv(path, rows: list[MetricsRow], provenance: list[str] | None = None) -> None:
    write_csv(path, METRICS_COLUMNS, [r for r in rows if not r.skipped], provenance)


def write_skips_csv(path, rows: list[MetricsRow]) -> None:
    write_csv(path, ("algorithm", "sweep_param", "sweep_value", "seed", "skip_reason"),
              [r for r in rows if r.skipped])


def read_metrics_csv(path) -> list[MetricsRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        return [
            MetricsRow(
                algorithm=r["algorithm"],
                sweep_param=r["sweep_param"],
                sweep_value=float(r["sweep_value"]) if r["sweep_value"] else math.nan,
                seed=int(r["seed"]),
                objective=float(r["objective"]),
                total_sensed_bytes=int(r["total_sensed_bytes"]),
                total_update_bytes=int(r["total_update_bytes"]),
                n_selected=int(r["n_selected"]),
                n_feasible=int(r["n_feasible"]),
                wall_time_ms=float(r["wall_time_ms"]) if r["wall_time_ms"] else None,
            )
            for r in reader
        ]


_PLOT_LABELS = {
    "objective": "Objective value",
    "total_sensed": "Total sensed data (bytes)",
}
_AXIS_LABELS = {
    "l_max_bytes": "Aggregator capacity L_max (bytes)",
    "n_devices": "Number of devices N",
}


def emit_plot(summary: list[SummaryRow], path, metric: str = "objective") -> Path:
    """Write an SVG line chart, one line per algorithm, sweep value on the x-axis."""
    if not summary:
        raise ValueError("cannot plot an empty summary")
    if metric not in _PLOT_LABELS:
        raise ValueError(f"unknown metric {metric!r}")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_alg: dict[str, list[SummaryRow]] = {}
    for s in summary:
        by_alg.setdefault(s.algorithm, []).append(s)

    path = Path(path)
    with matplotlib.rc_context({"svg.hashsalt": "fedsel", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for alg, pts in by_alg.items():
            pts = sorted(pts, key=lambda s: s.sweep_value)
            ax.errorbar(
                [p.sweep_value for p in pts],
                [getattr(p, f"{metric}_mean") for p in pts],
                yerr=[getattr(p, f"{metric}_sd") for p in pts],
                marker="o", capsize=3, label=alg,
            )
        ax.set_xlabel(_AXIS_LABELS.get(summary[0].sweep_param, summary[0].sweep_param))
        ax.set_ylabel(_PLOT_LABELS[metric])
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return path
