"""Resource-block allocation for uplink model-update traffic.

Tasks arrive one after another at an edge base station. Each asks for some
number of resource blocks; it holds the granted blocks exclusively for its
transmission time l / (x * beta * eta) and then releases them. Tasks are
admitted in arrival order: a task that finds no free block waits for the
earliest release. Allocators are compared on mean per-task delay and the
fraction of tasks whose delay exceeds their deadline.
"""

from __future__ import annotations

import copy
import dataclasses
import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

BASELINES = ("min_qos", "equal_share", "greedy_max")


@dataclass(frozen=True)
class SpectrumTask:
    id: int
    length_bits: float
    spectral_efficiency: float
    arrival_s: float
    max_delay_s: float

    def __post_init__(self):
        if not self.length_bits > 0:
            raise ValueError("length_bits must be positive")
        if not self.spectral_efficiency > 0:
            raise ValueError("spectral_efficiency must be positive")
        if not self.max_delay_s > 0:
            raise ValueError("max_delay_s must be positive")


def task_delay(length_bits: float, blocks: int, block_bandwidth_hz: float, spectral_efficiency: float) -> float:
    if blocks < 1:
        raise ValueError("a task needs at least one resource block")
    return length_bits / (blocks * block_bandwidth_hz * spectral_efficiency)


def min_blocks_for_qos(task: SpectrumTask, block_bandwidth_hz: float) -> int:
    """Fewest blocks that meet the task deadline when granted immediately.

    Not capped at the system size; callers check feasibility themselves.
    """
    need = task.length_bits / (task.max_delay_s * block_bandwidth_hz * task.spectral_efficiency)
    n = max(1, math.ceil(need))
    # Guard against ceil landing one short through rounding.
    while task_delay(task.length_bits, n, block_bandwidth_hz, task.spectral_efficiency) > task.max_delay_s:
        n += 1
    return n


@dataclass
class StepOutcome:
    delay_s: float
    qos_violated: bool
    granted_blocks: int
    wait_s: float
    dropped: bool = False


@dataclass
class SpectrumEnv:
    """Resource-block occupancy. Mutated in place by :meth:`step`."""

    total_blocks: int
    block_bandwidth_hz: float = 180e3
    wait_cap_s: float = 1.0
    drop_penalty_delay_s: float = 1.0
    clock_s: float = 0.0
    # min-heap of (release_s, blocks_held)
    occupancy: list[tuple[float, int]] = field(default_factory=list)

    def __post_init__(self):
        if self.total_blocks < 1:
            raise ValueError("total_blocks must be >= 1")

    @classmethod
    def from_bandwidth(cls, total_bandwidth_hz: float, block_bandwidth_hz: float, **kw) -> "SpectrumEnv":
        return cls(int(total_bandwidth_hz // block_bandwidth_hz), block_bandwidth_hz, **kw)

    @property
    def busy_blocks(self) -> int:
        return sum(b for _, b in self.occupancy)

    @property
    def free_blocks(self) -> int:
        return self.total_blocks - self.busy_blocks

    def reset(self) -> None:
        self.clock_s = 0.0
        self.occupancy.clear()

    def advance(self, t: float) -> None:
        """Move the clock forward to ``t`` (never backward) and release expired holds."""
        self.clock_s = max(self.clock_s, t)
        while self.occupancy and self.occupancy[0][0] <= self.clock_s:
            heapq.heappop(self.occupancy)

    def free_at(self, t: float) -> int:
        """Free blocks a task arriving at ``t`` would see, without mutating."""
        t = max(self.clock_s, t)
        return self.total_blocks - sum(b for r, b in self.occupancy if r > t)

    def step(self, task: SpectrumTask, action_blocks: int) -> StepOutcome:
        if action_blocks < 1:
            raise ValueError("action_blocks must be >= 1")
        self.advance(task.arrival_s)
        while self.free_blocks == 0:
            self.advance(self.occupancy[0][0])
        start = self.clock_s
        wait = start - task.arrival_s
        if wait > self.wait_cap_s:
            return StepOutcome(self.drop_penalty_delay_s, True, 0, wait, dropped=True)
        granted = min(action_blocks, self.free_blocks)
        tx = task_delay(task.length_bits, granted, self.block_bandwidth_hz, task.spectral_efficiency)
        heapq.heappush(self.occupancy, (start + tx, granted))
        delay = wait + tx
        return StepOutcome(delay, delay > task.max_delay_s, granted, wait)


def env_step(env: SpectrumEnv, task: SpectrumTask, action_blocks: int) -> tuple[float, bool, SpectrumEnv]:
    """Functional form of :meth:`SpectrumEnv.step`; ``env`` is left untouched."""
    nxt = copy.deepcopy(env)
    out = nxt.step(task, action_blocks)
    return out.delay_s, out.qos_violated, nxt


# --------------------------------------------------------------------------- workload


@dataclass
class WorkloadConfig:
    """Task-arrival process. Defaults are the reference contended workload."""

    total_bandwidth_hz: float = 1.8e6
    block_bandwidth_hz: float = 180e3
    arrival: str = "poisson"  # or "periodic"
    arrival_rate_hz: float = 30.0
    tasks_per_episode: int = 200
    length_min_bits: float = 40e3
    length_max_bits: float = 120e3
    eta_min: float = 1.0
    eta_max: float = 5.0
    max_delay_s: float = 0.1
    max_delay_choices_s: list[float] | None = None
    wait_cap_s: float = 1.0
    drop_penalty_delay_s: float = 1.0
    expected_concurrency: int = 4

    def validate(self) -> None:
        if self.arrival not in ("poisson", "periodic"):
            raise ValueError(f"unknown arrival process {self.arrival!r}")
        if not self.arrival_rate_hz > 0:
            raise ValueError("arrival_rate_hz must be positive")
        if self.tasks_per_episode < 1:
            raise ValueError("tasks_per_episode must be >= 1")
        if not 0 < self.length_min_bits <= self.length_max_bits:
            raise ValueError("need 0 < length_min_bits <= length_max_bits")
        if not 0 < self.eta_min <= self.eta_max:
            raise ValueError("need 0 < eta_min <= eta_max")
        if not self.max_delay_s > 0:
            raise ValueError("max_delay_s must be positive")
        if self.expected_concurrency < 1:
            raise ValueError("expected_concurrency must be >= 1")
        if int(self.total_bandwidth_hz // self.block_bandwidth_hz) < 1:
            raise ValueError("total bandwidth is smaller than one resource block")

    @property
    def total_blocks(self) -> int:
        return int(self.total_bandwidth_hz // self.block_bandwidth_hz)

    def make_env(self) -> SpectrumEnv:
        return SpectrumEnv(
            self.total_blocks,
            self.block_bandwidth_hz,
            wait_cap_s=self.wait_cap_s,
            drop_penalty_delay_s=self.drop_penalty_delay_s,
        )


def generate_tasks(cfg: WorkloadConfig, rng: np.random.Generator, n: int | None = None) -> list[SpectrumTask]:
    n = cfg.tasks_per_episode if n is None else n
    if cfg.arrival == "poisson":
        arrivals = np.cumsum(rng.exponential(1.0 / cfg.arrival_rate_hz, n))
    else:
        arrivals = np.arange(1, n + 1) / cfg.arrival_rate_hz
    lengths = rng.uniform(cfg.length_min_bits, cfg.length_max_bits, n)
    etas = rng.uniform(cfg.eta_min, cfg.eta_max, n)
    if cfg.max_delay_choices_s:
        taus = rng.choice(np.asarray(cfg.max_delay_choices_s, dtype=float), n)
    else:
        taus = np.full(n, cfg.max_delay_s)
    return [
        SpectrumTask(i, float(lengths[i]), float(etas[i]), float(arrivals[i]), float(taus[i]))
        for i in range(n)
    ]


def baseline_policy(kind: str, env: SpectrumEnv, task: SpectrumTask, expected_concurrency: int = 4) -> int:
    free = env.free_at(task.arrival_s)
    if kind == "min_qos":
        need = min_blocks_for_qos(task, env.block_bandwidth_hz)
        return max(1, min(need, free))
    if kind == "equal_share":
        return max(1, free // expected_concurrency)
    if kind == "greedy_max":
        return max(1, free)
    raise ValueError(f"unknown baseline {kind!r}; expected one of {BASELINES}")


# --------------------------------------------------------------------------- Q-learning


@dataclass
class QHyperparams:
    episodes: int = 200
    learning_rate: float = 0.1
    gamma: float = 0.5
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    # fraction of episodes over which epsilon decays linearly to epsilon_end
    epsilon_decay_fraction: float = 0.8
    r_max: float = 1000.0  # 1 / (1 ms)
    violation_penalty: float = 20.0
    eta_buckets: int = 4
    free_buckets: int = 5
    length_buckets: int = 4

    def validate(self) -> None:
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if not 0 <= self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in [0, 1]")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        for name in ("epsilon_start", "epsilon_end"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.r_max <= 0 or self.violation_penalty < 0:
            raise ValueError("need r_max > 0 and violation_penalty >= 0")
        if min(self.eta_buckets, self.free_buckets, self.length_buckets) < 1:
            raise ValueError("bucket counts must be >= 1")

    def epsilon(self, episode: int) -> float:
        span = max(1, int(round(self.episodes * self.epsilon_decay_fraction)))
        frac = min(1.0, episode / span)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac


State = tuple[int, int, int]


def _bucket(x: float, lo: float, hi: float, n: int) -> int:
    if hi <= lo:
        return 0
    return min(n - 1, max(0, int((x - lo) / (hi - lo) * n)))


@dataclass
class QPolicy:
    """Tabular action values over (eta bucket, free-block bucket, length bucket).

    Action index ``a`` means requesting ``a + 1`` resource blocks.
    """

    table: np.ndarray
    hyper: QHyperparams
    workload: WorkloadConfig

    @classmethod
    def zeros(cls, workload: WorkloadConfig, hyper: QHyperparams) -> "QPolicy":
        shape = (hyper.eta_buckets, hyper.free_buckets, hyper.length_buckets, workload.total_blocks)
        return cls(np.zeros(shape), hyper, workload)

    @property
    def n_actions(self) -> int:
        return self.table.shape[-1]

    def state(self, env: SpectrumEnv, task: SpectrumTask) -> State:
        w, h = self.workload, self.hyper
        return (
            _bucket(task.spectral_efficiency, w.eta_min, w.eta_max, h.eta_buckets),
            _bucket(env.free_at(task.arrival_s), 0, env.total_blocks + 1, h.free_buckets),
            _bucket(task.length_bits, w.length_min_bits, w.length_max_bits, h.length_buckets),
        )

    def greedy_action(self, s: State) -> int:
        # argmax returns the first maximum: ties go to fewer blocks
        return int(np.argmax(self.table[s]))

    def act(self, s: State, epsilon: float, rng: np.random.Generator) -> int:
        if epsilon > 0 and rng.random() < epsilon:
            return int(rng.integers(self.n_actions))
        return self.greedy_action(s)


def q_update(policy: QPolicy, s: State, a: int, reward: float, s_next: State | None,
             lr: float | None = None, gamma: float | None = None) -> QPolicy:
    """One-step Q-learning backup, in place. ``s_next=None`` marks a terminal transition."""
    lr = policy.hyper.learning_rate if lr is None else lr
    gamma = policy.hyper.gamma if gamma is None else gamma
    target = reward if s_next is None else reward + gamma * float(np.max(policy.table[s_next]))
    policy.table[s + (a,)] += lr * (target - policy.table[s + (a,)])
    return policy


def step_reward(outcome: StepOutcome, hyper: QHyperparams) -> float:
    r = min(1.0 / outcome.delay_s, hyper.r_max) if outcome.delay_s > 0 else hyper.r_max
    return r - (hyper.violation_penalty if outcome.qos_violated else 0.0)


@dataclass
class EpisodeStats:
    episode: int
    mean_delay_s: float
    violation_rate: float


def _summarize(episode: int, outcomes: list[StepOutcome]) -> EpisodeStats:
    return EpisodeStats(
        episode,
        math.fsum(o.delay_s for o in outcomes) / len(outcomes),
        sum(o.qos_violated for o in outcomes) / len(outcomes),
    )


def train_agent(workload: WorkloadConfig, hyper: QHyperparams, rng: np.random.Generator | int
                ) -> tuple[QPolicy, list[EpisodeStats]]:
    """Epsilon-greedy Q-learning over ``hyper.episodes`` independent episodes.

    Each episode draws ``tasks_per_episode + 1`` tasks; the extra one only
    supplies the bootstrap state of the last decision, so an episode boundary
    is treated as a time-limit cut rather than a terminal state.
    """
    workload.validate()
    hyper.validate()
    rng = np.random.default_rng(rng)
    policy = QPolicy.zeros(workload, hyper)
    curve = []
    for ep in range(hyper.episodes):
        eps = hyper.epsilon(ep)
        env = workload.make_env()
        tasks = generate_tasks(workload, rng, workload.tasks_per_episode + 1)
        s = policy.state(env, tasks[0])
        outcomes = []
        for task, nxt in zip(tasks[:-1], tasks[1:]):
            a = policy.act(s, eps, rng)
            out = env.step(task, a + 1)
            outcomes.append(out)
            s_next = policy.state(env, nxt)
            q_update(policy, s, a, step_reward(out, hyper), s_next)
            s = s_next
        curve.append(_summarize(ep, outcomes))
    return policy, curve


def evaluate_policy(policy: QPolicy | str, workload: WorkloadConfig, rng: np.random.Generator | int,
                    episodes: int = 20) -> tuple[float, float]:
    """Mean per-task delay and QoS-violation rate with exploration switched off.

    ``policy`` is a trained :class:`QPolicy` or one of :data:`BASELINES`.
    """
    workload.validate()
    rng = np.random.default_rng(rng)
    outcomes = []
    for _ in range(episodes):
        env = workload.make_env()
        for task in generate_tasks(workload, rng):
            if isinstance(policy, QPolicy):
                blocks = policy.greedy_action(policy.state(env, task)) + 1
            else:
                blocks = baseline_policy(policy, env, task, workload.expected_concurrency)
            outcomes.append(env.step(task, blocks))
    stats = _summarize(0, outcomes)
    return stats.mean_delay_s, stats.violation_rate


def policy_to_dict(policy: QPolicy) -> dict:
    return {
        "workload": dataclasses.asdict(policy.workload),
        "hyper": dataclasses.asdict(policy.hyper),
        "shape": list(policy.table.shape),
        "table": policy.table.ravel().tolist(),
    }


def policy_from_dict(data: dict) -> QPolicy:
    table = np.asarray(data["table"], dtype=float).reshape(data["shape"])
    return QPolicy(table, QHyperparams(**data["hyper"]), WorkloadConfig(**data["workload"]))


def save_policy(policy: QPolicy, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(policy_to_dict(policy), fh)
        fh.write("\n")


def load_policy(path) -> QPolicy:
    with open(path, encoding="utf-8") as fh:
        return policy_from_dict(json.load(fh))
