"""Heterogeneous device population, per-device delays and aggregation weights."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KB = 1000.0  # decimal kilobyte


@dataclass(frozen=True)
class DeviceCategory:
    name: str
    mix_fraction: float
    mean_dataset_bytes: float
    compute_capacity_cps: float

    def __post_init__(self):
        if not self.mean_dataset_bytes > 0:
            raise ValueError(f"{self.name}: mean_dataset_bytes must be positive")
        if not self.compute_capacity_cps > 0:
            raise ValueError(f"{self.name}: compute_capacity_cps must be positive")
        if not 0 <= self.mix_fraction <= 1:
            raise ValueError(f"{self.name}: mix_fraction must lie in [0, 1]")


def default_categories() -> list[DeviceCategory]:
    return [
        DeviceCategory("Smartphone", 0.5, 150 * KB, 1e6),
        DeviceCategory("Vehicle", 0.3, 250 * KB, 2e6),
        DeviceCategory("IoTSensor", 0.2, 100 * KB, 5e5),
    ]


@dataclass(frozen=True)
class Device:
    id: int
    category: str
    position: tuple[float, float]
    dataset_bytes: int
    update_bytes: int
    compute_capacity_cps: float


@dataclass
class PopulationConfig:
    """Population parameters; defaults reproduce the reference scenario.

    ``computational_intensity`` is in CPU cycles per *byte* of training data.
    """

    n_devices: int = 300
    area_side_km: float = 1.0
    categories: list[DeviceCategory] = field(default_factory=default_categories)
    dataset_sigma_bytes: float = 20 * KB
    update_mean_bytes: float = 10 * KB
    update_sigma_bytes: float = 2 * KB
    computational_intensity: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        if self.n_devices < 1:
            raise ValueError("n_devices must be >= 1")
        if not self.area_side_km > 0:
            raise ValueError("area_side_km must be positive")
        if not self.categories:
            raise ValueError("at least one device category is required")
        total = math.fsum(c.mix_fraction for c in self.categories)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"category mix fractions sum to {total}, expected 1")
        if self.dataset_sigma_bytes < 0 or self.update_sigma_bytes < 0:
            raise ValueError("standard deviations must be non-negative")
        if not self.update_mean_bytes >= 1:
            raise ValueError("update_mean_bytes must be at least 1 byte")
        if self.computational_intensity < 0:
            raise ValueError("computational_intensity must be non-negative")

    @property
    def server_position(self) -> tuple[float, float]:
        half = self.area_side_km / 2.0
        return (half, half)


def category_counts(n_devices: int, categories: list[DeviceCategory]) -> list[int]:
    """round(fraction * N) per category; the rounding remainder goes to the first one."""
    counts = [int(round(c.mix_fraction * n_devices)) for c in categories]
    counts[0] += n_devices - sum(counts)
    if counts[0] < 0:
        raise ValueError("category rounding produced a negative count")
    return counts


def _truncated_normal_bytes(rng: np.random.Generator, mean: float, sigma: float, n: int) -> np.ndarray:
    # Rejection below 1 byte; values are whole bytes.
    out = np.rint(rng.normal(mean, sigma, n))
    bad = out < 1
    while bad.any():
        out[bad] = np.rint(rng.normal(mean, sigma, int(bad.sum())))
        bad = out < 1
    return out.astype(np.int64)


def sample_population(config: PopulationConfig, seed: int | None = None) -> list[Device]:
    """Draw ``config.n_devices`` devices.

    Each category draws from its own child stream of the seed, so for a fixed
    seed the devices of a category at population size N are a prefix of those
    at any larger N. Ids are assigned in category order.
    """
    config.validate()
    seed = config.seed if seed is None else seed
    counts = category_counts(config.n_devices, config.categories)
    streams = np.random.SeedSequence(seed).spawn(len(config.categories))

    devices: list[Device] = []
    side = config.area_side_km
    for cat, count, ss in zip(config.categories, counts, streams):
        if count == 0:
            continue
        pos_rng, data_rng, upd_rng = (np.random.default_rng(s) for s in ss.spawn(3))
        xy = pos_rng.uniform(0.0, side, size=(count, 2))
        data = _truncated_normal_bytes(data_rng, cat.mean_dataset_bytes, config.dataset_sigma_bytes, count)
        upd = _truncated_normal_bytes(upd_rng, config.update_mean_bytes, config.update_sigma_bytes, count)
        for k in range(count):
            devices.append(
                Device(
                    id=len(devices),
                    category=cat.name,
                    position=(float(xy[k, 0]), float(xy[k, 1])),
                    dataset_bytes=int(data[k]),
                    update_bytes=int(upd[k]),
                    compute_capacity_cps=float(cat.compute_capacity_cps),
                )
            )
    return devices


def distances_km(devices: list[Device], server: tuple[float, float]) -> np.ndarray:
    if not devices:
        return np.zeros(0)
    xy = np.array([d.position for d in devices], dtype=float)
    return np.hypot(xy[:, 0] - server[0], xy[:, 1] - server[1])


def compute_delay(device: Device, alpha: float) -> float:
    """Local training time: alpha * D_i / C_i seconds."""
    if not device.compute_capacity_cps > 0:
        raise ValueError(f"device {device.id} has no compute capacity")
    return alpha * device.dataset_bytes / device.compute_capacity_cps


def comm_delay(update_bytes: float, rate_bps: float) -> float:
    """Upload time of ``update_bytes`` at ``rate_bps``; infinite when the link carries nothing."""
    if not rate_bps > 0:
        return math.inf
    return 8.0 * update_bytes / rate_bps


def weights(devices: list[Device]) -> list[float]:
    if not devices:
        raise ValueError("weights of an empty population are undefined")
    sizes = [d.dataset_bytes for d in devices]
    if min(sizes) <= 0:
        raise ValueError("dataset sizes must be positive")
    total = math.fsum(sizes)
    return [s / total for s in sizes]


POPULATION_COLUMNS = ("id", "category", "x_km", "y_km", "dataset_bytes", "update_bytes", "capacity_cps")


def dump_population_csv(devices: list[Device], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(POPULATION_COLUMNS)
        for d in devices:
            writer.writerow([
                d.id, d.category, repr(d.position[0]), repr(d.position[1]),
                d.dataset_bytes, d.update_bytes, repr(d.compute_capacity_cps),
            ])


def load_population_csv(path) -> list[Device]:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        missing = set(POPULATION_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"population CSV missing columns: {sorted(missing)}")
        return [
            Device(
                id=int(row["id"]),
                category=row["category"],
                position=(float(row["x_km"]), float(row["y_km"])),
                dataset_bytes=int(row["dataset_bytes"]),
                update_bytes=int(row["update_bytes"]),
                compute_capacity_cps=float(row["capacity_cps"]),
            )
            for row in reader
        ]
