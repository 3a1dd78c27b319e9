import math
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from fedsel.population import (
    KB,
    Device,
    DeviceCategory,
    PopulationConfig,
    _truncated_normal_bytes,
    category_counts,
    comm_delay,
    compute_delay,
    default_categories,
    dump_population_csv,
    load_population_csv,
    sample_population,
    weights,
)

import numpy as np


def _dev(D, C=1e6, l=10_000, i=0):
    return Device(i, "Smartphone", (0.5, 0.5), D, l, C)


def test_paper_mix_counts_for_ten_devices():
    devs = sample_population(PopulationConfig(n_devices=10))
    assert Counter(d.category for d in devs) == {"Smartphone": 5, "Vehicle": 3, "IoTSensor": 2}


@pytest.mark.parametrize("n", [10, 100, 300, 800])
def test_exact_proportions_for_multiples_of_ten(n):
    counts = category_counts(n, default_categories())
    assert counts == [n // 2, 3 * n // 10, n // 5]


def test_remainder_goes_to_first_category():
    counts = category_counts(7, default_categories())
    assert sum(counts) == 7
    assert counts[1:] == [round(0.3 * 7), round(0.2 * 7)]


def test_mix_must_sum_to_one():
    cats = default_categories()[:2]
    with pytest.raises(ValueError):
        sample_population(PopulationConfig(categories=cats))


def test_zero_sigma_is_degenerate():
    cfg = PopulationConfig(n_devices=20, dataset_sigma_bytes=0, update_sigma_bytes=0)
    devs = sample_population(cfg)
    assert {d.dataset_bytes for d in devs if d.category == "Smartphone"} == {150_000}
    assert {d.dataset_bytes for d in devs if d.category == "Vehicle"} == {250_000}
    assert {d.update_bytes for d in devs} == {10_000}


def test_same_seed_same_population(tmp_path):
    cfg = PopulationConfig(n_devices=50, seed=42)
    a, b = sample_population(cfg), sample_population(cfg)
    assert a == b
    dump_population_csv(a, tmp_path / "a.csv")
    dump_population_csv(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert sample_population(cfg, seed=43) != a


def test_csv_round_trip(tmp_path):
    devs = sample_population(PopulationConfig(n_devices=30, seed=3))
    dump_population_csv(devs, tmp_path / "pop.csv")
    header = (tmp_path / "pop.csv").read_text().splitlines()[0]
    assert header == "id,category,x_km,y_km,dataset_bytes,update_bytes,capacity_cps"
    assert load_population_csv(tmp_path / "pop.csv") == devs


def test_positions_in_square_and_ids_unique():
    cfg = PopulationConfig(n_devices=500, area_side_km=2.0, seed=1)
    devs = sample_population(cfg)
    assert sorted(d.id for d in devs) == list(range(500))
    assert all(0 <= x <= 2.0 and 0 <= y <= 2.0 for d in devs for x, y in [d.position])
    assert cfg.server_position == (1.0, 1.0)


def test_smaller_population_is_prefix_per_category():
    small = sample_population(PopulationConfig(n_devices=100, seed=5))
    big = sample_population(PopulationConfig(n_devices=800, seed=5))
    for cat in ("Smartphone", "Vehicle", "IoTSensor"):
        s = [(d.position, d.dataset_bytes, d.update_bytes) for d in small if d.category == cat]
        b = [(d.position, d.dataset_bytes, d.update_bytes) for d in big if d.category == cat]
        assert b[: len(s)] == s


def test_truncation_never_below_one_byte():
    rng = np.random.default_rng(0)
    # mean/sigma chosen so that a large share of raw draws fall below 1 byte
    out = _truncated_normal_bytes(rng, 2.0, 5.0, 1_000_000)
    assert out.min() >= 1
    assert len(out) == 1_000_000


def test_sampled_means_track_category_means():
    devs = sample_population(PopulationConfig(n_devices=3000, seed=11))
    by_cat = {}
    for d in devs:
        by_cat.setdefault(d.category, []).append(d.dataset_bytes)
    for cat in default_categories():
        assert np.mean(by_cat[cat.name]) == pytest.approx(cat.mean_dataset_bytes, rel=0.02)


@pytest.mark.parametrize("D, C, alpha, expected", [
    (150 * KB, 1e6, 0.5, 0.075),
    (250 * KB, 2e6, 0.5, 0.0625),
    (100 * KB, 5e5, 0.5, 0.1),
    (150 * KB, 1e6, 0.0, 0.0),
])
def test_compute_delay(D, C, alpha, expected):
    assert compute_delay(_dev(D, C), alpha) == pytest.approx(expected, abs=1e-15)


def test_compute_delay_zero_capacity():
    with pytest.raises(ValueError):
        compute_delay(_dev(100, C=0.0), 0.5)


def test_comm_delay():
    assert comm_delay(10_000, 1e6) == pytest.approx(0.08)
    assert comm_delay(10_000, 984035.385754425554583) == pytest.approx(0.0812978894439520533, rel=1e-12)
    assert comm_delay(0, 1e6) == 0.0
    assert comm_delay(10_000, 0.0) == math.inf


@pytest.mark.parametrize("D, expected", [
    ([100, 300], [0.25, 0.75]),
    ([7, 7, 7, 7], [0.25] * 4),
    ([150_000, 250_000, 100_000], [0.3, 0.5, 0.2]),
])
def test_weights_examples(D, expected):
    w = weights([_dev(d, i=i) for i, d in enumerate(D)])
    assert w == pytest.approx(expected, abs=1e-15)


def test_weights_empty():
    with pytest.raises(ValueError):
        weights([])


@settings(max_examples=50)
@given(st.lists(st.integers(1, 10**7), min_size=1, max_size=50), st.integers(1, 1000))
def test_weights_sum_to_one_and_scale_invariant(D, c):
    w = weights([_dev(d, i=i) for i, d in enumerate(D)])
    assert abs(math.fsum(w) - 1.0) < 1e-9
    ws = weights([_dev(d * c, i=i) for i, d in enumerate(D)])
    assert max(abs(a - b) for a, b in zip(w, ws)) < 1e-9


def test_category_validation():
    with pytest.raises(ValueError):
        DeviceCategory("x", 0.5, 0.0, 1.0)
    with pytest.raises(ValueError):
        DeviceCategory("x", 0.5, 1.0, 0.0)
