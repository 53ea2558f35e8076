"""Monte Carlo simulation of the controlled buffer.

The buffer starts at ``D``, drains at unit rate and gains one packet per
Poisson arrival; the arrival rate is ``R0`` or ``R0 + Rc`` depending on the
policy's action. A trial ends at interruption (buffer hits zero) or when the
file has fully arrived (``D`` plus arrivals reaches ``F``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _kernels
from .analytic import QoeTarget, ServerRates, truncation_gap, truncation_horizon
from .errors import DomainError
from .policy import BothAlways, FreeOnly, Offline, PolicySpec, Risky, Safe
from .stats import mean_interval, wilson_interval

DEFAULT_TRIALS = 100_000
DEFAULT_TRUNCATION_TOL = 1e-4


@dataclass(frozen=True)
class SimConfig:
    rates: ServerRates
    target: QoeTarget
    spec: PolicySpec
    file_size: Union[float, str] = "auto"
    trials: int = DEFAULT_TRIALS
    master_seed: int = 0
    truncation_tol: float = DEFAULT_TRUNCATION_TOL

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError(f"trials must be >= 1 (got {self.trials})")
        if not 0 <= self.master_seed < 2**64:
            raise DomainError("master_seed must be a 64-bit unsigned integer")
        if self.file_size != "auto":
            if not isinstance(self.file_size, (int, float)) or not self.file_size > self.target.d:
                raise DomainError(f"file size must exceed D={self.target.d} (got {self.file_size!r})")

    @property
    def horizon(self) -> float:
        """File size in packets actually simulated."""
        if self.file_size == "auto":
            return float(truncation_horizon(self.rates.r_free, self.truncation_tol))
        return float(self.file_size)

    @property
    def truncation_bias(self) -> float:
        """Bound on how far the free-server ruin probability can drop because of a finite file."""
        return truncation_gap(self.rates.r_free, self.horizon)

    @property
    def arrivals_needed(self) -> int:
        return max(0, math.ceil(self.horizon - self.target.d))


@dataclass(frozen=True)
class TrajectoryOutcome:
    interrupted: bool
    stop_time: float
    cost_time: float
    costly_packets: int


@dataclass(frozen=True)
class TrialBatch:
    """Raw per-trial arrays, indexed by trial number."""

    interrupted: np.ndarray
    stop_time: np.ndarray
    cost_time: np.ndarray
    costly_packets: np.ndarray

    def __len__(self):
        return len(self.interrupted)


@dataclass(frozen=True)
class McEstimate:
    n: int
    p_hat: float
    p_ci: tuple[float, float]
    p_se: float
    cost_mean: float
    cost_ci: tuple[float, float]
    cost_se: float
    packets_mean: float
    packets_ci: tuple[float, float]
    packets_se: float
    horizon: float = math.inf
    truncation_bias: float = 0.0
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_batch(cls, batch: TrialBatch, **extra) -> "McEstimate":
        n = len(batch)
        hits = int(np.count_nonzero(batch.interrupted))
        p_hat = hits / n
        cost, cost_se, cost_ci = mean_interval(batch.cost_time)
        pk, pk_se, pk_ci = mean_interval(batch.costly_packets.astype(float))
        return cls(
            n=n,
            p_hat=p_hat,
            p_ci=wilson_interval(hits, n),
            p_se=math.sqrt(p_hat * (1 - p_hat) / n),
            cost_mean=cost,
            cost_ci=cost_ci,
            cost_se=cost_se,
            packets_mean=pk,
            packets_ci=pk_ci,
            packets_se=pk_se,
            **extra,
        )


def _encode(spec: PolicySpec) -> tuple[int, float]:
    if isinstance(spec, FreeOnly):
        return _kernels.FREE_ONLY, 0.0
    if isinstance(spec, BothAlways):
        return _kernels.BOTH_ALWAYS, 0.0
    if isinstance(spec, Offline):
        return _kernels.OFFLINE, float(spec.t_s)
    if isinstance(spec, Safe):
        return _kernels.SAFE, float(spec.s)
    if isinstance(spec, Risky):
        return _kernels.RISKY, float(spec.t)
    raise TypeError(f"unknown policy spec {spec!r}")


def run_trials(config: SimConfig, first_index: int = 0, n: int | None = None, leap: bool = True) -> TrialBatch:
    """Simulate trials ``first_index .. first_index + n - 1`` of a configuration.

    Trial ``i`` always consumes the random stream of ``(master_seed, i)``, so
    any split of the index range reproduces the same outcomes.
    """
    kind, param = _encode(config.spec)
    n = config.trials if n is None else n
    out = _kernels.run_batch(
        kind, param, float(config.target.d), float(config.rates.r_free), float(config.rates.r_costly),
        config.arrivals_needed, np.uint64(config.master_seed), first_index, n, leap,
    )
    return TrialBatch(*out)


def simulate_trajectory(config: SimConfig, trial_index: int = 0, leap: bool = True) -> TrajectoryOutcome:
    b = run_trials(config, trial_index, 1, leap)
    return TrajectoryOutcome(
        bool(b.interrupted[0]), float(b.stop_time[0]), float(b.cost_time[0]), int(b.costly_packets[0])
    )


def estimate(config: SimConfig, leap: bool = True, chunk: int = 1_000_000) -> McEstimate:
    """Run ``config.trials`` trajectories and summarise them.

    Chunks only bound memory; they do not change any trial's stream.
    """
    parts = [
        run_trials(config, start, min(chunk, config.trials - start), leap)
        for start in range(0, config.trials, chunk)
    ]
    batch = TrialBatch(*(np.concatenate(arrs) for arrs in zip(*(
        (p.interrupted, p.stop_time, p.cost_time, p.costly_packets) for p in parts))))
    return McEstimate.from_batch(
        batch,
        horizon=config.horizon,
        truncation_bias=config.truncation_bias,
        metadata={
            "master_seed": config.master_seed,
            "trials": config.trials,
            "horizon": config.horizon,
            "truncation_tol": config.truncation_tol,
            "rng": "xoshiro256** per trial, splitmix64-seeded from (master_seed, trial_index)",
            "method": "leap" if leap else "event",
        },
    )


@dataclass(frozen=True)
class FirstPassageStats:
    n: int
    prob_reach: float
    prob_reach_se: float
    mean_overshoot: float
    mean_overshoot_se: float
    mean_time: float
    mean_time_se: float
    reached: np.ndarray = field(repr=False)
    overshoot: np.ndarray = field(repr=False)
    time: np.ndarray = field(repr=False)

    def wald_residuals(self, d: float, threshold: float, rate: float) -> np.ndarray:
        """Per-trial ``d + (rate - 1) * tau - x_tau``; mean zero by optional stopping."""
        x_stop = np.where(self.reached, threshold + self.overshoot, 0.0)
        return d + (rate - 1.0) * self.time - x_stop


def first_passage_stats(d: float, threshold: float, rate: float, trials: int, seed: int = 0) -> FirstPassageStats:
    """Single server from ``d``: probability and overshoot of reaching ``threshold`` before ruin."""
    if not rate > 1.0:
        raise DomainError(f"rate must exceed 1 (got {rate!r})")
    if not 0.0 < d <= threshold:
        raise DomainError(f"need 0 < d <= threshold (got d={d!r}, threshold={threshold!r})")
    reached, overshoot, time = _kernels.run_first_passage(
        float(d), float(threshold), float(rate), np.uint64(seed), int(trials))
    n = len(reached)
    p = float(reached.mean())
    over = overshoot[reached]
    over_mean, over_se, _ = mean_interval(over) if len(over) else (0.0, math.inf, None)
    t_mean, t_se, _ = mean_interval(time)
    return FirstPassageStats(
        n, p, math.sqrt(p * (1 - p) / n), over_mean, over_se, t_mean, t_se, reached, overshoot, time)
