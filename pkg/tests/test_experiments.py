import dataclasses
import json
import math

import pytest

from fedsel.config import (
    DEFAULT_LMAX_GRID,
    DEFAULT_N_GRID,
    MB,
    ConfigError,
    ExperimentConfig,
    SweepSpec,
    config_from_dict,
    config_to_dict,
    dump_config,
    load_config,
)
from fedsel.experiments import (
    METRICS_COLUMNS,
    MetricsRow,
    build_instance,
    emit_plot,
    read_metrics_csv,
    run_round,
    summarize,
    sweep,
    write_metrics_csv,
)
from fedsel.population import PopulationConfig


def small(**kw):
    base = dict(population=PopulationConfig(n_devices=60), seeds=[0, 1, 2],
                sweep=SweepSpec("l_max_bytes", [0.1 * MB, 0.3 * MB]))
    base.update(kw)
    return ExperimentConfig(**base)


def row(alg="greedy", value=1.0, seed=0, obj=0.5, sensed=100):
    return MetricsRow(alg, "l_max_bytes", value, seed, obj, sensed, 10, 1, 2)


def test_defaults_are_reference_values():
    cfg = ExperimentConfig()
    assert cfg.population.n_devices == 300
    assert cfg.t_upd_s == 0.120
    assert cfg.l_max_bytes == 1e6
    assert cfg.radio.bandwidth_hz == 180e3
    assert cfg.radio.noise_density_dbm_hz == -174.0
    assert cfg.population.update_mean_bytes == 10_000
    assert cfg.population.dataset_sigma_bytes == 20_000
    assert len(cfg.seeds) == 30
    assert DEFAULT_LMAX_GRID == [200_000 * k for k in range(1, 11)]
    assert DEFAULT_N_GRID == [100, 200, 300, 400, 500, 600, 700, 800]


def test_run_round_greedy_only():
    cfg = dataclasses.replace(ExperimentConfig(), algorithms=["greedy"])
    rows = run_round(cfg, 0)
    assert len(rows) == 1
    assert rows[0].total_update_bytes <= cfg.l_max_bytes
    # greedy favours short updates, so the count may exceed L_max / mean(l) but
    # never L_max / min(l)
    inst = build_instance(cfg, 0)
    chosen = [it for it in inst.items if it.feasible]
    assert rows[0].n_selected <= cfg.l_max_bytes // min(it.size_bytes for it in chosen)


def test_run_round_no_algorithms():
    assert run_round(dataclasses.replace(small(), algorithms=[]), 0) == []


def test_run_round_shared_instance_and_deterministic():
    cfg = small()
    rows = run_round(cfg, 4)
    assert rows[0].n_feasible == rows[1].n_feasible
    assert run_round(cfg, 4) == rows
    assert all(0 <= r.objective <= 1 and r.n_selected <= r.n_feasible for r in rows)


def test_dp_refusal_is_recorded():
    cfg = small(algorithms=["greedy", "dp_oracle"], dp_quantum_bytes=1, dp_work_limit=1000)
    rows = run_round(cfg, 0)
    assert not rows[0].skipped
    assert rows[1].skipped and "work limit" in rows[1].skip_reason


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_exact_dp_dominates_on_physical_instances(seed):
    cfg = small(algorithms=["greedy", "best_sinr", "dp_oracle"], dp_quantum_bytes=1, l_max_bytes=0.2 * MB)
    g, b, dp = run_round(cfg, seed)
    assert not dp.skipped
    assert g.objective <= dp.objective and b.objective <= dp.objective


def test_coarse_dp_is_feasible_at_full_scale():
    # 1 kB quantum: sizes round up, so the result is feasible but not a bound on greedy
    cfg = dataclasses.replace(ExperimentConfig(), algorithms=["dp_oracle"])
    (dp,) = run_round(cfg, 0)
    assert not dp.skipped
    assert dp.total_update_bytes <= cfg.l_max_bytes
    assert dp.n_selected > 0


def test_sweep_row_count_and_order():
    cfg = small(sweep=SweepSpec("l_max_bytes", [1e5, 2e5, 3e5, 4e5, 5e5]))
    rows = sweep(cfg)
    assert len(rows) == 5 * 3 * 2
    keys = [(r.sweep_value, r.seed, r.algorithm) for r in rows]
    assert keys[:3] == [(1e5, 0, "greedy"), (1e5, 0, "best_sinr"), (1e5, 1, "greedy")]


def test_sweep_parallel_matches_serial():
    cfg = small()
    assert sweep(cfg, jobs=2) == sweep(cfg)


def test_sweep_unknown_parameter():
    with pytest.raises(ConfigError):
        sweep(small(sweep=SweepSpec("t_upd_s", [0.1])))


def test_single_value_grid_equals_run_round():
    cfg = small(sweep=SweepSpec("l_max_bytes", [1 * MB]))
    rows = sweep(cfg)
    assert rows == [r for s in cfg.seeds for r in run_round(cfg, s)]


def test_n_sweep_uses_requested_population_size():
    cfg = small(sweep=SweepSpec("n_devices", [20, 40]), l_max_bytes=10 * MB)
    rows = sweep(cfg)
    for r in rows:
        assert r.n_feasible == sum(it.feasible for it in build_instance(cfg, r.seed, int(r.sweep_value)).items)


def test_greedy_objective_nondecreasing_in_capacity():
    cfg = small(algorithms=["greedy"], sweep=SweepSpec("l_max_bytes", [k * 50_000 for k in range(1, 15)]))
    rows = sweep(cfg)
    for s in cfg.seeds:
        obj = [r.objective for r in rows if r.seed == s]
        assert all(a <= b for a, b in zip(obj, obj[1:]))


def test_saturation_all_algorithms_agree():
    cfg = small(algorithms=["greedy", "best_sinr", "dp_oracle"], dp_quantum_bytes=1)
    for s in cfg.seeds:
        inst = build_instance(cfg, s)
        total = sum(it.size_bytes for it in inst.feasible_items())
        rows = run_round(dataclasses.replace(cfg, l_max_bytes=total), s)
        assert len({r.total_sensed_bytes for r in rows}) == 1
        assert all(r.n_selected == r.n_feasible for r in rows)


def test_summarize_examples():
    (one,) = summarize([row(obj=0.25)])
    assert one.objective_mean == 0.25 and one.objective_sd == 0.0
    (two,) = summarize([row(obj=0.2, seed=0), row(obj=0.4, seed=1)])
    assert two.objective_mean == pytest.approx(0.3)
    assert two.objective_sd == pytest.approx(0.1)
    grouped = summarize([row(alg=a, value=v, seed=s) for a in ("greedy", "best_sinr")
                         for v in (1.0, 2.0) for s in range(3)])
    assert len(grouped) == 4 and all(g.n_runs == 3 for g in grouped)


def test_summarize_empty():
    with pytest.raises(ValueError):
        summarize([])


def test_metrics_csv(tmp_path):
    rows = sweep(small())
    path = tmp_path / "m.csv"
    write_metrics_csv(path, rows, ["overrides: seed=3 (from --seed)"])
    lines = path.read_text(encoding="utf-8").split("\n")
    assert lines[0] == "# overrides: seed=3 (from --seed)"
    assert lines[1] == ",".join(METRICS_COLUMNS)
    assert lines[-1] == ""  # newline-terminated
    back = read_metrics_csv(path)
    assert [(r.algorithm, r.seed, r.objective, r.total_sensed_bytes) for r in back] == \
        [(r.algorithm, r.seed, r.objective, r.total_sensed_bytes) for r in rows]


def test_plot_is_deterministic_svg(tmp_path):
    summary = summarize(sweep(small()))
    a = emit_plot(summary, tmp_path / "a.svg")
    b = emit_plot(summary, tmp_path / "b.svg")
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert text.lstrip().startswith("<?xml") and "</svg>" in text
    assert "greedy" in text and "best_sinr" in text


def test_plot_errors(tmp_path):
    with pytest.raises(ValueError):
        emit_plot([], tmp_path / "x.svg")
    with pytest.raises(OSError):
        emit_plot(summarize([row()]), tmp_path / "missing_dir" / "x.svg")


def test_config_round_trip(tmp_path):
    cfg = small()
    dump_config(cfg, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == cfg
    assert config_from_dict({}) == ExperimentConfig()


def test_shipped_defaults_file_matches_code():
    from pathlib import Path
    shipped = Path(__file__).parents[1] / "configs" / "defaults.json"
    assert json.loads(shipped.read_text()) == json.loads(json.dumps(config_to_dict(ExperimentConfig())))


@pytest.mark.parametrize("data", [
    {"bogus": 1},
    {"population": {"n_devices": 0}},
    {"algorithms": ["simulated_annealing"]},
    {"seeds": []},
    {"sweep": {"param": "l_max_bytes", "grid": []}},
    {"radio": {"bandwidth_hz": -1}},
    {"population": []},
])
def test_malformed_configs(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")
