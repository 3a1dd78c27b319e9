"""Device-to-server radio link math.

Distance-based pathloss (128.1 + 37.6 log10 d, d in km), thermal noise over the
user channel, and Shannon-rate link budgets. Everything here is deterministic:
no fading, no shadowing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PATHLOSS_CONST_DB = 128.1
PATHLOSS_SLOPE_DB = 37.6


def mw_to_dbm(power_mw: float) -> float:
    if power_mw <= 0:
        return -math.inf
    return 10.0 * math.log10(power_mw)


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class RadioParams:
    """Uplink radio parameters shared by every device.

    Defaults: 200 mW transmit power, -174 dBm/Hz noise density,
    one 180 kHz resource block per user, 10 m distance floor.
    """

    tx_power_dbm: float = mw_to_dbm(200.0)
    noise_density_dbm_hz: float = -174.0
    bandwidth_hz: float = 180e3
    min_distance_km: float = 0.01

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise ValueError(f"bandwidth_hz must be positive, got {self.bandwidth_hz}")
        if not self.min_distance_km > 0:
            raise ValueError(f"min_distance_km must be positive, got {self.min_distance_km}")


@dataclass(frozen=True)
class LinkBudget:
    distance_km: float
    pathloss_db: float
    rx_power_dbm: float
    noise_power_dbm: float
    snr_linear: float
    spectral_efficiency_bps_hz: float
    rate_bps: float


def pathloss_db(distance_km):
    """Pathloss in dB for a distance in km. Accepts scalars or arrays."""
    d = np.asarray(distance_km, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distance_km must be positive")
    pl = PATHLOSS_CONST_DB + PATHLOSS_SLOPE_DB * np.log10(d)
    return float(pl) if pl.ndim == 0 else pl


def noise_power_dbm(bandwidth_hz: float, noise_density_dbm_hz: float) -> float:
    if not bandwidth_hz > 0:
        raise ValueError("bandwidth_hz must be positive")
    return noise_density_dbm_hz + 10.0 * math.log10(bandwidth_hz)


def link_budget(distance_km: float, params: RadioParams) -> LinkBudget:
    """Full link budget for one device at ``distance_km`` from the server.

    The distance is clamped to ``params.min_distance_km`` first.
    """
    d = max(float(distance_km), params.min_distance_km)
    pl = pathloss_db(d)
    rx = params.tx_power_dbm - pl
    noise = noise_power_dbm(params.bandwidth_hz, params.noise_density_dbm_hz)
    snr = 10.0 ** ((rx - noise) / 10.0)
    se = math.log2(1.0 + snr)
    return LinkBudget(
        distance_km=d,
        pathloss_db=pl,
        rx_power_dbm=rx,
        noise_power_dbm=noise,
        snr_linear=snr,
        spectral_efficiency_bps_hz=se,
        rate_bps=params.bandwidth_hz * se,
    )


def link_budgets(distances_km, params: RadioParams) -> list[LinkBudget]:
    return [link_budget(d, params) for d in np.asarray(distances_km, dtype=float).ravel()]
