"""Parameter sweeps behind the figure CSVs."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__, hjb
from .analytic import QoeTarget, ServerRates, truncation_gap, truncation_horizon
from .engine import SimConfig, estimate
from .errors import InfeasibleTarget
from .policy import POLICY_NAMES, analytic_cost, design, risky_threshold

FIG1_COLUMNS = ("D", "T_star", "D_bar_flag")
FIG2_COLUMNS = (
    "D", "policy", "analytic_cost_time", "analytic_is_bound", "mc_cost_time", "mc_cost_lo", "mc_cost_hi",
    "mc_p_hat", "mc_p_lo", "mc_p_hi", "costly_packets_mean",
)
HJB_COLUMNS = ("x", "p", "lhs", "rhs", "residual", "argmin_u", "in_exact_zone")


@dataclass
class ExperimentConfig:
    r0: float = 1.05
    rc: float = 0.15
    eps: float = 1e-3
    d_min: float = 18.5
    d_max: float = 70.0
    d_step: float = 2.5
    policies: tuple = ("offline", "safe", "risky")
    trials: int = 100_000
    master_seed: int = 0
    file_size: object = "auto"
    truncation_tol: float = 1e-4
    output: str = "results"

    def __post_init__(self):
        if not self.d_step > 0:
            raise ValueError(f"d_step must be positive (got {self.d_step})")
        if self.d_max < self.d_min:
            raise ValueError(f"d_max {self.d_max} is below d_min {self.d_min}")
        if not self.policies:
            raise ValueError("at least one policy is required")
        unknown = [p for p in self.policies if p not in POLICY_NAMES]
        if unknown:
            raise ValueError(f"unknown policies {unknown}; choose from {', '.join(POLICY_NAMES)}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    @property
    def rates(self) -> ServerRates:
        return ServerRates(self.r0, self.rc)

    def d_grid(self) -> np.ndarray:
        n = int(math.floor((self.d_max - self.d_min) / self.d_step + 1e-9)) + 1
        return self.d_min + self.d_step * np.arange(n)


def fmt(value) -> str:
    """CSV rendering: 9 significant digits, ``inf`` for infinite values, ints as is."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isnan(value):
        raise ValueError("NaN reached the CSV writer")
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".9g")


def write_csv(path: Path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) for c in columns])
    return path


def write_metadata(csv_path: Path, meta: dict) -> Path:
    side = Path(csv_path).with_suffix(".meta.json")
    payload = {"csv": Path(csv_path).name, "package_version": __version__, **meta}
    side.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
    return side


def cell_seed(master_seed: int, *key: int) -> int:
    """Independent 64-bit seed for one sweep cell."""
    ss = np.random.SeedSequence(master_seed, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def fig1_rows(cfg: ExperimentConfig) -> list[dict]:
    rates = cfg.rates
    exps = rates.exponents()
    d_bar = exps.d_bar(cfg.eps)
    rows = []
    for d in cfg.d_grid():
        try:
            t_star = risky_threshold(QoeTarget(float(d), cfg.eps), rates, exps)
        except InfeasibleTarget:
            t_star = math.inf
        rows.append({"D": float(d), "T_star": t_star, "D_bar_flag": int(d >= d_bar)})
    return rows


def fig2_rows(cfg: ExperimentConfig, progress=None) -> list[dict]:
    rates = cfg.rates
    exps = rates.exponents()
    rows = []
    order = [p for p in POLICY_NAMES if p in cfg.policies]
    for i, d in enumerate(cfg.d_grid()):
        target = QoeTarget(float(d), cfg.eps)
        for j, name in enumerate(order):
            row = {"D": float(d), "policy": name}
            try:
                report = analytic_cost(name, target, rates, exps)
                spec = design(name, target, rates, exps)
            except InfeasibleTarget:
                row.update({c: math.inf for c in FIG2_COLUMNS[2:]})
                row["analytic_is_bound"] = 0
                rows.append(row)
                continue
            est = estimate(SimConfig(
                rates, target, spec, file_size=cfg.file_size, trials=cfg.trials,
                master_seed=cell_seed(cfg.master_seed, i, POLICY_NAMES.index(name)),
                truncation_tol=cfg.truncation_tol,
            ))
            row.update({
                "analytic_cost_time": report.expected_cost_time,
                "analytic_is_bound": int(report.is_bound),
                "mc_cost_time": est.cost_mean,
                "mc_cost_lo": est.cost_ci[0],
                "mc_cost_hi": est.cost_ci[1],
                "mc_p_hat": est.p_hat,
                "mc_p_lo": est.p_ci[0],
                "mc_p_hi": est.p_ci[1],
                "costly_packets_mean": est.packets_mean,
            })
            rows.append(row)
            if progress:
                progress(d, name, est)
    return rows


def sweep_metadata(cfg: ExperimentConfig) -> dict:
    if cfg.file_size == "auto":
        horizon = float(truncation_horizon(cfg.r0, cfg.truncation_tol))
    else:
        horizon = float(cfg.file_size)
    return {
        "config": asdict(cfg),
        "horizon_packets": horizon,
        "truncation_bias_bound": truncation_gap(cfg.r0, horizon),
        "rng": "xoshiro256** per trial; cell seed from SeedSequence(master_seed, spawn_key=(i_D, i_policy))",
        "interval_p": "Wilson 95%",
        "interval_cost": "Student-t 95%",
    }


def hjb_rows(reports) -> list[dict]:
    return [
        {
            "x": r.point.x, "p": r.point.p, "lhs": r.lhs, "rhs": r.rhs, "residual": r.residual,
            "argmin_u": r.argmin_u, "in_exact_zone": int(r.in_exact_zone),
        }
        for r in reports
    ]


def manifold_points(anchor: QoeTarget, exps, x_lo: float, x_hi: float, n: int) -> list[tuple[float, float]]:
    return [(float(x), hjb.manifold_p(float(x), anchor, exps)) for x in np.linspace(x_lo, x_hi, n)]
