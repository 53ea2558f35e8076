"""Acceptance criteria, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line (also collected
into the pytest terminal summary). Run this file directly for the lines alone.
Tolerances below are the contractual ones; none is tuned to the results.
"""
import math
import sys
from pathlib import Path

import numpy as np
from scipy import stats

sys.path.insert(0, str(Path(__file__).parent))
from conftest import ACCEPTANCE_LINES  # noqa: E402

from streamqoe import FreeOnly, QoeTarget, Risky, ServerRates, design, largest_root  # noqa: E402
from streamqoe import hjb  # noqa: E402
from streamqoe.analytic import region_bounds  # noqa: E402
from streamqoe.engine import SimConfig, estimate, first_passage_stats  # noqa: E402
from streamqoe.experiments import ExperimentConfig, fig1_rows, fig2_rows  # noqa: E402
from streamqoe.policy import (  # noqa: E402
    PolicyState, decide, observe, offline_cost, risky_cost_bound, risky_threshold, safe_cost,
    stopping_prob_interval,
)

REF_RATES = ServerRates(1.05, 0.15)
REF_TARGET = QoeTarget(20.0, 1e-3)

# 1
C1_RATES = (1.05, 1.2, 1.5, 2.0)
C1_BUFFERS = (5.0, 10.0, 20.0)
C1_TRIALS = 100_000
C1_TOL = 1e-4
C1_SIGMAS = 4.0
# 2
C2_OFFLINE = (61.0, 2.0)
C2_SAFE = (43.0, 2.0)
C2_RISKY = (10.0, 12.0)
C2_TRIALS = 100_000
C2_SIGMAS = 3.0
C2_BRANCH_REL = 1e-9
# 3
C3_PAIRS = 20
C3_REL = 1e-12
# 4
C4_EPS = 0.05
C4_TRIALS = 100_000
C4_SIGMAS = 4.0
C4_BIG_TRIALS = 1_000_000
C4_BIG_LIMIT = 1.5e-3
# 5
C5_EPS = 1e-3
C5_GRID = (18.5, 70.0, 0.5)
C5_BELOW_FROM = 25.0
# 6
C6_GRID = (20.0, 70.0, 5.0)
C6_TRIALS = 100_000
C6_SIGMAS = 3.0
# 7
C7_TRIALS = 100_000
C7_SIGMAS = 3.0
C7_TRIPLES = ((5.0, 10.0, 1.2), (2.0, 6.0, 1.5), (10.0, 25.0, 1.05), (1.0, 4.0, 2.0), (8.0, 12.0, 1.2))
# 8
C8_GRID = (50, 50)
C8_AGREEMENT = 1.0
C8_RESIDUAL_RATIO = 10.0
C8_STEPS = (4e-3, 2e-3, 1e-3)
C8_ANCHOR = QoeTarget(10.0, 0.05)
C8_TRIALS = 1_000
C8_SIGMAS = 3.0


def record(n, checks):
    """``checks`` is a list of ``(label, ok)``; prints one line and returns overall success."""
    ok = all(c for _, c in checks)
    detail = "; ".join(label if c else f"NOT MET: {label}" for label, c in checks)
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_criterion_1_free_server_ruin_probability():
    checks = []
    for i, rate in enumerate(C1_RATES):
        for j, d in enumerate(C1_BUFFERS):
            exact = math.exp(-largest_root(rate) * d)
            cfg = SimConfig(ServerRates(rate, 0.1), QoeTarget(d, 1.0), FreeOnly(), trials=C1_TRIALS,
                            master_seed=1000 + 10 * i + j, truncation_tol=C1_TOL)
            est = estimate(cfg)
            sigma = math.sqrt(est.p_hat * (1 - est.p_hat) / est.n)
            lo, hi = exact - C1_TOL - C1_SIGMAS * sigma, exact + C1_SIGMAS * sigma
            checks.append((f"R={rate:g},D={d:g}: p={est.p_hat:.4g} vs {exact:.4g}", lo <= est.p_hat <= hi))
    assert record(1, checks)


def test_criterion_2_operating_point_costs():
    rates, target = REF_RATES, REF_TARGET
    off = offline_cost(target, rates).costly_packets_equiv
    safe = safe_cost(target, rates)
    safe_lo = safe.costly_packets_equiv
    safe_hi = safe_lo + safe.xi_band * rates.r_costly
    risky = risky_cost_bound(target, rates).costly_packets_equiv
    checks = [
        (f"offline {off:.2f} pkts", abs(off - C2_OFFLINE[0]) <= C2_OFFLINE[1]),
        (f"safe [{safe_lo:.2f}, {safe_hi:.2f}] pkts",
         abs(safe_lo - C2_SAFE[0]) <= C2_SAFE[1] and abs(safe_hi - C2_SAFE[0]) <= C2_SAFE[1]),
        (f"risky bound {risky:.2f} pkts", C2_RISKY[0] <= risky <= C2_RISKY[1]),
    ]
    est = estimate(SimConfig(rates, target, design("safe", target, rates), trials=C2_TRIALS, master_seed=2))
    mc = est.cost_mean * rates.r_costly
    se = est.cost_se * rates.r_costly
    band_hi = safe_lo + rates.r_costly / (rates.r_both - 1)
    checks.append((f"MC safe {mc:.3f}+-{se:.3f} pkts in [{safe_lo:.3f}, {band_hi:.3f}]",
                   safe_lo - C2_SIGMAS * se <= mc <= band_hi + C2_SIGMAS * se))

    exps = rates.exponents()
    d_bar = exps.d_bar(target.eps)
    left = risky_threshold(QoeTarget(d_bar * (1 - 1e-14), target.eps), rates)
    right = risky_threshold(QoeTarget(d_bar, target.eps), rates)
    checks.append((f"branches at D_bar differ by {abs(left - right) / right:.1e} rel",
                   abs(left - right) / right <= C2_BRANCH_REL))

    rng = np.random.default_rng(2)
    spec = Risky(risky_threshold(target, rates))
    pure = True
    for x in rng.uniform(0, 60, 200):
        state = PolicyState()
        for h in rng.uniform(0, 60, 20):
            observe(spec, state, h)
        pure &= decide(spec, state, rng.uniform(0, 1e3), x) == decide(spec, PolicyState(), 0.0, x)
    checks.append(("risky action a function of x only", bool(pure)))
    assert record(2, checks)


def test_criterion_3_offline_safe_ratio():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(C3_PAIRS):
        rates = ServerRates(float(rng.uniform(1.01, 3.0)), float(rng.uniform(0.01, 2.0)))
        d_min, d_max = region_bounds(1e-3, rates.exponents())
        target = QoeTarget(d_min + 0.3 * (d_max - d_min), 1e-3)
        ratio = offline_cost(target, rates).expected_cost_time / safe_cost(target, rates).expected_cost_time
        r1 = rates.r_both
        expected = rates.r_free * (r1 - 1) / (r1 - rates.r_free)
        worst = max(worst, abs(ratio - expected) / expected)
    assert record(3, [(f"max relative error {worst:.1e} over {C3_PAIRS} pairs", worst <= C3_REL)])


def _c4_points():
    pts = []
    for rates in (ServerRates(1.05, 0.15), ServerRates(1.1, 0.3), ServerRates(1.2, 0.5)):
        d_min, d_max = region_bounds(C4_EPS, rates.exponents())
        for w in (0.2, 0.6):
            pts.append((rates, QoeTarget(round(d_min + w * (d_max - d_min), 3), C4_EPS)))
    return pts


def test_criterion_4_feasibility():
    checks = []
    for k, (rates, target) in enumerate(_c4_points()):
        for name in ("offline", "safe", "risky"):
            est = estimate(SimConfig(rates, target, design(name, target, rates), trials=C4_TRIALS,
                                     master_seed=400 + k))
            sigma = math.sqrt(est.p_hat * (1 - est.p_hat) / est.n)
            checks.append((f"{name}@R0={rates.r_free:g},Rc={rates.r_costly:g},D={target.d:g}: p={est.p_hat:.4f}",
                           est.p_hat <= C4_EPS + C4_SIGMAS * sigma))
    for name in ("offline", "safe", "risky"):
        est = estimate(SimConfig(REF_RATES, REF_TARGET, design(name, REF_TARGET, REF_RATES),
                                 trials=C4_BIG_TRIALS, master_seed=44))
        checks.append((f"{name}@D=20,eps=1e-3: p={est.p_hat:.2e}", est.p_hat <= C4_BIG_LIMIT))
    assert record(4, checks)


def test_criterion_5_threshold_curve():
    cfg = ExperimentConfig(eps=C5_EPS, d_min=C5_GRID[0], d_max=C5_GRID[1], d_step=C5_GRID[2], policies=("risky",))
    rows = fig1_rows(cfg)
    d = np.array([r["D"] for r in rows])
    t = np.array([r["T_star"] for r in rows])
    exps = REF_RATES.exponents()
    d_min = math.log(1 / C5_EPS) / exps.alpha1
    near = [risky_threshold(QoeTarget(d_min + 10.0 ** -k, C5_EPS), REF_RATES) for k in (3, 6, 9, 12)]
    growth = np.diff(near)
    crossings = int(np.sum(np.diff(np.sign(t - d)) != 0))
    checks = [
        ("strictly decreasing on the grid", bool(np.all(np.diff(t) < 0))),
        (f"diverges at D->{d_min:.2f} (T*={near[-1]:.1f} at +1e-12)",
         bool(np.all(growth > 0.9 * math.log(1e3) / exps.alpha1))),
        (f"T* < D for D >= {C5_BELOW_FROM:g}", bool(np.all(t[d >= C5_BELOW_FROM] < d[d >= C5_BELOW_FROM]))),
        (f"{crossings} crossing of T*=D", crossings == 1),
    ]
    assert record(5, checks)


def _sigma_from_ci(mean, hi, n):
    return (hi - mean) / stats.t.ppf(0.975, n - 1)


def test_criterion_6_cost_ordering():
    cfg = ExperimentConfig(eps=1e-3, d_min=C6_GRID[0], d_max=C6_GRID[1], d_step=C6_GRID[2], trials=C6_TRIALS,
                           master_seed=6)
    rows = fig2_rows(cfg)
    by = {(r["D"], r["policy"]): r for r in rows}
    checks = []
    for d in cfg.d_grid():
        d = float(d)
        risky, safe, off = by[(d, "risky")], by[(d, "safe")], by[(d, "offline")]
        for a, b in ((risky, safe), (safe, off)):
            separated = a["mc_cost_hi"] < b["mc_cost_lo"] or b["mc_cost_hi"] < a["mc_cost_lo"]
            if separated:
                checks.append((f"D={d:g} {a['policy']} {a['mc_cost_time']:.4g} < {b['policy']} "
                               f"{b['mc_cost_time']:.4g}", a["mc_cost_time"] < b["mc_cost_time"]))
        sigma = _sigma_from_ci(risky["mc_cost_time"], risky["mc_cost_hi"], cfg.trials)
        bound = risky["analytic_cost_time"]
        checks.append((f"D={d:g} risky MC {risky['mc_cost_time']:.4g} <= bound {bound:.4g}",
                       risky["mc_cost_time"] <= bound + C6_SIGMAS * sigma))
    failing = [(label, c) for label, c in checks if not c]
    line_checks = failing + [(f"{len(checks) - len(failing)} other comparisons hold", True)]
    assert record(6, line_checks)


def test_criterion_7_optional_stopping():
    rates, target = REF_RATES, REF_TARGET
    s_star = design("safe", target, rates).s
    r1 = rates.r_both
    st = first_passage_stats(target.d, s_star, r1, C7_TRIALS, seed=7)
    res = st.wald_residuals(target.d, s_star, r1)
    se = res.std(ddof=1) / math.sqrt(len(res))
    checks = [
        (f"D+(R1-1)E[tau]-E[x_tau] = {res.mean():.3g} (se {se:.2g})", abs(res.mean()) < C7_SIGMAS * se),
        (f"overshoot mean {st.mean_overshoot:.3f} in [0,1)", 0.0 <= st.mean_overshoot < 1.0),
    ]
    for k, (d, t, rate) in enumerate(C7_TRIPLES):
        fp = first_passage_stats(d, t, rate, C7_TRIALS, seed=70 + k)
        lo, hi = stopping_prob_interval(d, t, rate)
        sig = fp.prob_reach_se
        checks.append((f"(d={d:g},T={t:g},R={rate:g}) p={fp.prob_reach:.4f} in [{lo:.4f},{hi:.4f}]",
                       lo - C7_SIGMAS * sig <= fp.prob_reach <= hi + C7_SIGMAS * sig))
    assert record(7, checks)


def test_criterion_8_hjb_properties():
    rates = REF_RATES
    exps = rates.exponents()
    pts = hjb.region_grid(exps, n_x=C8_GRID[0], n_p=C8_GRID[1])
    reports, actions, skipped = hjb.residual_grid(rates, pts, exps=exps)
    summary = hjb.summarize_grid(reports, actions, skipped)
    ratio = summary.mean_rel_residual_outside / summary.mean_rel_residual_exact

    rng = np.random.default_rng(8)
    fd_ratios = []
    for idx in rng.choice(len(reports), 25, replace=False):
        pt = reports[idx].point
        if abs(pt.x - hjb.switching_level(pt.p, exps)) < 0.5:
            continue
        try:
            vals = [hjb.value_partials(pt, rates, h, exps) for h in (4e-3, 2e-3, 1e-3)]
        except hjb.StencilError:
            continue
        for k in (0, 1):
            dd = [v[k] for v in vals]
            if abs(dd[1] - dd[2]) > 1e-12 * max(1.0, abs(dd[2])):
                fd_ratios.append((dd[0] - dd[1]) / (dd[1] - dd[2]))
    fd_ratios = np.array(fd_ratios)

    sims = [hjb.simulate_expanded_state(C8_ANCHOR, rates, trials=C8_TRIALS, seed=8, dt=dt, exps=exps)
            for dt in C8_STEPS]
    devs = [s.max_deviation for s in sims]
    z = max(float(np.max(np.abs(s.mean_p[1:] - C8_ANCHOR.eps) / s.se_p[1:])) for s in sims)

    checks = [
        (f"argmin agreement {summary.agreement_rate:.2%} on {summary.n_points} points "
         f"({summary.n_skipped} skipped)", summary.agreement_rate >= C8_AGREEMENT),
        (f"FD convergence ratios {fd_ratios.min():.2f}..{fd_ratios.max():.2f} over {len(fd_ratios)} partials",
         len(fd_ratios) > 0 and bool(np.all(np.abs(fd_ratios - 4.0) < 0.5))),
        ("manifold deviation " + ", ".join(f"{v:.4f}" for v in devs) + f" for dt={C8_STEPS}",
         all(a > b for a, b in zip(devs, devs[1:]))),
        (f"E[p_t]=eps, max |z| {z:.2f}", z < C8_SIGMAS),
        (f"mean relative residual exact {summary.mean_rel_residual_exact:.3g} vs outside "
         f"{summary.mean_rel_residual_outside:.3g} (x{ratio:.1f}; max {summary.max_rel_residual_exact:.3g} vs "
         f"{summary.max_rel_residual_outside:.3g})", ratio >= C8_RESIDUAL_RATIO),
    ]
    assert record(8, checks)


if __name__ == "__main__":
    for name, fn in sorted((k, v) for k, v in dict(globals()).items() if k.startswith("test_criterion_")):
        try:
            fn()
        except AssertionError:
            pass
