"""Experiment configuration and its JSON form.

Every default is the reference operating point (N=300, T_upd=120 ms,
L_max=1 MB, 180 kHz per user, 200 mW, -174 dBm/Hz).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fedsel.linkbudget import RadioParams
from fedsel.population import KB, DeviceCategory, PopulationConfig
from fedsel.spectrum import QHyperparams, WorkloadConfig

MB = 1000 * KB
ALGORITHM_NAMES = ("greedy", "best_sinr", "dp_oracle")
SWEEP_PARAMS = ("l_max_bytes", "n_devices")

DEFAULT_LMAX_GRID = [round(0.2 * k * MB) for k in range(1, 11)]
DEFAULT_N_GRID = [100 * k for k in range(1, 9)]


class ConfigError(ValueError):
    pass


@dataclass
class SweepSpec:
    param: str = "l_max_bytes"
    grid: list[float] = field(default_factory=lambda: list(DEFAULT_LMAX_GRID))

    def validate(self) -> None:
        if self.param not in SWEEP_PARAMS:
            raise ConfigError(f"unknown sweep parameter {self.param!r}; expected one of {SWEEP_PARAMS}")
        if not self.grid:
            raise ConfigError("sweep grid must be nonempty")


@dataclass
class SpectrumConfig:
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    hyper: QHyperparams = field(default_factory=QHyperparams)
    eval_episodes: int = 20
    seed: int = 0


@dataclass
class ExperimentConfig:
    population: PopulationConfig = field(default_factory=PopulationConfig)
    radio: RadioParams = field(default_factory=RadioParams)
    t_upd_s: float = 0.120
    l_max_bytes: float = 1 * MB
    algorithms: list[str] = field(default_factory=lambda: ["greedy", "best_sinr"])
    sweep: SweepSpec = field(default_factory=SweepSpec)
    seeds: list[int] = field(default_factory=lambda: list(range(30)))
    dp_quantum_bytes: int = 1000
    dp_work_limit: int = 50_000_000
    record_timing: bool = False
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)

    def validate(self) -> None:
        try:
            self.population.validate()
            self.spectrum.workload.validate()
            self.spectrum.hyper.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self.sweep.validate()
        unknown = set(self.algorithms) - set(ALGORITHM_NAMES)
        if unknown:
            raise ConfigError(f"unknown algorithms {sorted(unknown)}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not self.t_upd_s > 0:
            raise ConfigError("t_upd_s must be positive")
        if self.l_max_bytes < 0:
            raise ConfigError("l_max_bytes must be non-negative")
        if self.dp_quantum_bytes < 1:
            raise ConfigError("dp_quantum_bytes must be >= 1")


def _build(cls, data: Any, where: str):
    """Instantiate dataclass ``cls`` from a dict, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = _NESTED.get((cls, name))
        if sub is list:
            kwargs[name] = [_build(DeviceCategory, v, f"{where}.{name}[{i}]") for i, v in enumerate(value)]
        elif sub is not None:
            kwargs[name] = _build(sub, value, f"{where}.{name}")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


_NESTED = {
    (ExperimentConfig, "population"): PopulationConfig,
    (ExperimentConfig, "radio"): RadioParams,
    (ExperimentConfig, "sweep"): SweepSpec,
    (ExperimentConfig, "spectrum"): SpectrumConfig,
    (PopulationConfig, "categories"): list,
    (SpectrumConfig, "workload"): WorkloadConfig,
    (SpectrumConfig, "hyper"): QHyperparams,
}


def config_from_dict(data: dict) -> ExperimentConfig:
    cfg = _build(ExperimentConfig, data, "config")
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path) -> ExperimentConfig:
    """Read a JSON config file. Missing keys take their defaults."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(data)


def dump_config(cfg: ExperimentConfig, path) -> None:
    data = config_to_dict(cfg)
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")

