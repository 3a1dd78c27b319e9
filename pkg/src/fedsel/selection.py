"""Per-round participant selection under aggregator capacity and round deadline.

The problem is a 0/1 knapsack over the delay-feasible devices: item value is
the device's aggregation weight w_i, item size its update length l_i, and the
knapsack capacity the aggregator limit L_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fedsel.linkbudget import LinkBudget
from fedsel.population import Device, comm_delay, compute_delay, weights

DEFAULT_DP_WORK_LIMIT = 50_000_000


class WorkBoundExceeded(RuntimeError):
    """The exact solver refuses an instance whose DP table would be too large."""


@dataclass(frozen=True)
class SelectionItem:
    device_id: int
    value: float
    size_bytes: int
    feasible: bool
    snr_linear: float
    sensed_bytes: int = 0


@dataclass(frozen=True)
class SelectionInstance:
    items: tuple[SelectionItem, ...]
    capacity_bytes: float
    round_budget_s: float = math.inf

    def __post_init__(self):
        if self.capacity_bytes < 0:
            raise ValueError("capacity_bytes must be non-negative")
        for it in self.items:
            if not it.size_bytes > 0:
                raise ValueError(f"item {it.device_id}: size must be positive")
            if it.value < 0:
                raise ValueError(f"item {it.device_id}: value must be non-negative")

    def feasible_items(self) -> list[SelectionItem]:
        return [it for it in self.items if it.feasible]

    def with_capacity(self, capacity_bytes: float) -> "SelectionInstance":
        return SelectionInstance(self.items, capacity_bytes, self.round_budget_s)


@dataclass(frozen=True)
class SelectionResult:
    selected_ids: tuple[int, ...]
    objective: float
    total_update_bytes: int
    total_sensed_bytes: int
    n_feasible: int

    @property
    def n_selected(self) -> int:
        return len(self.selected_ids)


def _result(instance: SelectionInstance, chosen: list[SelectionItem]) -> SelectionResult:
    chosen = sorted(chosen, key=lambda it: it.device_id)
    return SelectionResult(
        selected_ids=tuple(it.device_id for it in chosen),
        objective=math.fsum(it.value for it in chosen),
        total_update_bytes=sum(it.size_bytes for it in chosen),
        total_sensed_bytes=sum(it.sensed_bytes for it in chosen),
        n_feasible=sum(1 for it in instance.items if it.feasible),
    )


def feasible_filter(
    devices: list[Device],
    budgets: list[LinkBudget],
    alpha: float,
    t_upd: float,
    capacity_bytes: float = math.inf,
) -> SelectionInstance:
    """Build the selection instance, flagging devices that finish within ``t_upd``.

    Values are the weights normalized over the whole population, not only the
    feasible devices.
    """
    if len(devices) != len(budgets):
        raise ValueError("need exactly one link budget per device")
    if not devices:
        return SelectionInstance((), capacity_bytes, t_upd)
    w = weights(devices)
    items = []
    for dev, lb, wi in zip(devices, budgets, w):
        total = compute_delay(dev, alpha) + comm_delay(dev.update_bytes, lb.rate_bps)
        items.append(
            SelectionItem(
                device_id=dev.id,
                value=wi,
                size_bytes=dev.update_bytes,
                feasible=total <= t_upd,
                snr_linear=lb.snr_linear,
                sensed_bytes=dev.dataset_bytes,
            )
        )
    return SelectionInstance(tuple(items), capacity_bytes, t_upd)


def _fill(instance: SelectionInstance, ordered: list[SelectionItem]) -> SelectionResult:
    # Skip items that do not fit and keep scanning; a later, smaller one may.
    room = instance.capacity_bytes
    chosen = []
    for it in ordered:
        if it.size_bytes <= room:
            chosen.append(it)
            room -= it.size_bytes
    return _result(instance, chosen)


def greedy_select(instance: SelectionInstance) -> SelectionResult:
    """Value-density greedy: take feasible devices by w_i / l_i, highest first."""
    ordered = sorted(
        instance.feasible_items(),
        key=lambda it: (-(it.value / it.size_bytes), it.size_bytes, it.device_id),
    )
    return _fill(instance, ordered)


def best_sinr_select(instance: SelectionInstance) -> SelectionResult:
    """Baseline: take feasible devices in order of channel quality."""
    ordered = sorted(instance.feasible_items(), key=lambda it: (-it.snr_linear, it.device_id))
    return _fill(instance, ordered)


def dp_optimal_select(
    instance: SelectionInstance,
    quantum_bytes: int = 1,
    work_limit: int = DEFAULT_DP_WORK_LIMIT,
) -> SelectionResult:
    """Exact 0/1 knapsack by dynamic programming over quantized capacity.

    Sizes are rounded up and the capacity down to multiples of
    ``quantum_bytes``, so every returned set is feasible for the unquantized
    problem; with ``quantum_bytes=1`` and integer sizes the result is optimal.

    Raises:
        WorkBoundExceeded: if items x capacity cells exceeds ``work_limit``.
    """
    if quantum_bytes <= 0:
        raise ValueError("quantum_bytes must be positive")
    items = instance.feasible_items()
    sizes = [int(math.ceil(it.size_bytes / quantum_bytes)) for it in items]
    # capacity beyond the total size never changes the optimum
    if math.isinf(instance.capacity_bytes):
        cap = sum(sizes)
    else:
        cap = min(int(math.floor(instance.capacity_bytes / quantum_bytes)), sum(sizes))
    if len(items) * (cap + 1) > work_limit:
        raise WorkBoundExceeded(
            f"DP table {len(items)} x {cap + 1} exceeds work limit {work_limit}; "
            "coarsen quantum_bytes or shrink the instance"
        )

    best = np.zeros(cap + 1)
    take = np.zeros((len(items), cap + 1), dtype=bool)
    for i, (it, s) in enumerate(zip(items, sizes)):
        if s > cap:
            continue
        cand = best[: cap + 1 - s] + it.value
        better = cand > best[s:]
        take[i, s:] = better
        best[s:] = np.where(better, cand, best[s:])

    chosen = []
    c = cap
    for i in range(len(items) - 1, -1, -1):
        if take[i, c]:
            chosen.append(items[i])
            c -= sizes[i]
    return _result(instance, chosen)


ALGORITHMS = {
    "greedy": greedy_select,
    "best_sinr": best_sinr_select,
    "dp_oracle": dp_optimal_select,
}
