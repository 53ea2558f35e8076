"""``streamqoe`` command line.

Exit codes: 0 ok, 1 usage or parse error, 2 infeasible target,
3 numeric or domain error.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import hjb
from .analytic import QoeTarget, ServerRates, classify, largest_root
from .config import ConfigError, load_config
from .engine import SimConfig, estimate
from .errors import DomainError, InfeasibleTarget, NumericError
from .experiments import (
    FIG1_COLUMNS, FIG2_COLUMNS, HJB_COLUMNS, fig1_rows, fig2_rows, fmt, hjb_rows, manifold_points,
    sweep_metadata, write_csv, write_metadata,
)
from .policy import POLICY_NAMES, Offline, Risky, Safe, analytic_cost, design

log = logging.getLogger("streamqoe")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def emit(**pairs):
    for key, value in pairs.items():
        print(f"{key}={fmt(value)}")


def _span(text: str, name: str) -> tuple[float, float, int]:
    parts = text.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"{name} expects lo:hi:n (got {text!r})") from None
    if n < 1 or not hi >= lo:
        raise UsageError(f"{name} needs hi >= lo and n >= 1 (got {text!r})")
    return lo, hi, n


def _anchor(text: str) -> QoeTarget:
    try:
        d, eps = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--anchor expects d,eps (got {text!r})") from None
    return QoeTarget(d, eps)


def _file_size(text: str):
    return "auto" if text == "auto" else float(text)


def _rates(args) -> ServerRates:
    return ServerRates(args.r0, args.rc)


# --- subcommands -------------------------------------------------------------

def cmd_roots(args):
    if args.rate is not None:
        emit(rbar=largest_root(args.rate))
        return
    if args.r0 is None or args.rc is None:
        raise UsageError("give --rate, or both --r0 and --rc")
    rates = _rates(args)
    e = rates.exponents()
    emit(r0=rates.r_free, r1=rates.r_both, alpha0=e.alpha0, alpha1=e.alpha1, beta=e.beta, theta=e.theta)


def cmd_region(args):
    rates = _rates(args)
    target = QoeTarget(args.d, args.eps)
    rc = classify(target, rates)
    emit(region=rc.region.value, d_min=rc.d_min, d_max=rc.d_max, d_bar=rates.exponents().d_bar(args.eps))


_PARAM_KEY = {Offline: ("t_s", "t_s"), Safe: ("S", "s"), Risky: ("T", "t")}


def cmd_threshold(args):
    rates = _rates(args)
    target = QoeTarget(args.d, args.eps)
    try:
        report = analytic_cost(args.policy, target, rates)
        spec = design(args.policy, target, rates)
    except InfeasibleTarget:
        emit(policy=args.policy, status="infeasible", cost_time=math.inf, costly_packets=math.inf)
        raise
    out = {"policy": args.policy}
    if type(spec) in _PARAM_KEY:
        key, attr = _PARAM_KEY[type(spec)]
        out[key] = getattr(spec, attr)
    out.update(
        cost_time=report.expected_cost_time,
        cost_is_bound=int(report.is_bound),
        xi_band=report.xi_band,
        costly_packets=report.costly_packets_equiv,
    )
    emit(**out)


def cmd_simulate(args):
    rates = _rates(args)
    target = QoeTarget(args.d, args.eps)
    if args.param is None:
        spec = design(args.policy, target, rates)
    else:
        cls = {"offline": Offline, "safe": Safe, "risky": Risky}.get(args.policy)
        if cls is None:
            raise UsageError(f"--param does not apply to {args.policy}")
        spec = cls(args.param)
    cfg = SimConfig(rates, target, spec, file_size=args.file_size, trials=args.trials,
                    master_seed=args.seed, truncation_tol=args.truncation_tol)
    est = estimate(cfg, leap=not args.event)
    emit(
        policy=args.policy, n=est.n, p_hat=est.p_hat, p_lo=est.p_ci[0], p_hi=est.p_ci[1],
        cost_time=est.cost_mean, cost_lo=est.cost_ci[0], cost_hi=est.cost_ci[1],
        costly_packets=est.packets_mean, horizon=est.horizon, truncation_bias=est.truncation_bias,
    )


def cmd_sweep(args):
    overrides = {
        "r0": args.r0, "rc": args.rc, "eps": args.eps, "d_min": args.d_min, "d_max": args.d_max,
        "d_step": args.d_step, "trials": args.trials, "master_seed": args.seed,
        "file_size": args.file_size, "truncation_tol": args.truncation_tol, "output": args.output,
        "policies": tuple(p.strip() for p in args.policies.split(",") if p.strip()) if args.policies is not None else None,
    }
    path = args.config
    if path is not None and not Path(path).exists():
        log.warning("config file %s not found; using flags and defaults", path)
        path = None
    cfg = load_config(path, overrides)
    out = Path(cfg.output)
    meta = sweep_metadata(cfg)
    figs = {"fig1", "fig2"} if args.figures == "both" else {args.figures}
    exps = cfg.rates.exponents()
    if "fig1" in figs:
        rows = fig1_rows(cfg)
        p = write_csv(out / "fig1.csv", FIG1_COLUMNS, rows)
        write_metadata(p, {**meta, "d_bar": exps.d_bar(cfg.eps)})
        emit(fig1_csv=str(p))
        if not args.no_plots:
            from .plotting import plot_threshold
            emit(fig1_png=str(plot_threshold(rows, out / "fig1.png", exps.d_bar(cfg.eps))))
    if "fig2" in figs:
        rows = fig2_rows(cfg, progress=lambda d, name, est: log.info("D=%g %s p=%.3g cost=%.4g",
                                                                     d, name, est.p_hat, est.cost_mean))
        p = write_csv(out / "fig2.csv", FIG2_COLUMNS, rows)
        write_metadata(p, meta)
        emit(fig2_csv=str(p))
        if not args.no_plots:
            from .plotting import plot_costs
            emit(fig2_png=str(plot_costs(rows, out / "fig2.png", cfg.rc)))


def cmd_hjb_check(args):
    rates = _rates(args)
    exps = rates.exponents()
    x_lo, x_hi, n_x = _span(args.grid_x, "--grid-x")
    anchor = _anchor(args.anchor) if args.anchor else None
    if anchor is not None:
        if classify(anchor, rates, exps).region.value != "interior":
            raise DomainError(f"anchor {anchor} lies outside the interior of the feasibility region")
        points = manifold_points(anchor, exps, x_lo, x_hi, n_x)
    elif ":" in args.grid_p:
        p_lo, p_hi, n_p = _span(args.grid_p, "--grid-p")
        if not p_lo > 0:
            raise UsageError("--grid-p needs lo > 0")
        points = [(float(x), float(p)) for x in np.linspace(x_lo, x_hi, n_x) for p in np.geomspace(p_lo, p_hi, n_p)]
    else:
        try:
            n_p = int(args.grid_p)
        except ValueError:
            raise UsageError(f"--grid-p expects n or lo:hi:n (got {args.grid_p!r})") from None
        points = hjb.region_grid(exps, x_lo, x_hi, n_x, n_p)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        reports, actions, skipped = hjb.residual_grid(rates, points, args.fd_step, args.p_grid, exps)
    for w in caught:
        log.warning("%s", w.message)
    if not reports:
        raise DomainError("no grid point lies inside the region")
    summary = hjb.summarize_grid(reports, actions, skipped)

    out = Path(args.output)
    rows = hjb_rows(reports)
    path = write_csv(out / "hjb.csv", HJB_COLUMNS, rows)

    sim_anchor = anchor or QoeTarget(10.0, 0.05)
    coarse = hjb.simulate_expanded_state(sim_anchor, rates, args.trials, args.seed, args.dt, args.horizon, exps=exps)
    fine = hjb.simulate_expanded_state(sim_anchor, rates, args.trials, args.seed, args.dt / 2, args.horizon, exps=exps)
    z = np.abs(fine.mean_p[1:] - sim_anchor.eps) / fine.se_p[1:]

    write_metadata(path, {
        "rates": {"r0": rates.r_free, "rc": rates.r_costly},
        "mode": "anchor" if anchor else "grid",
        "fd_step": args.fd_step,
        "p_grid": args.p_grid,
        "skipped": [list(s) for s in skipped],
        "expanded_state": {"anchor": [sim_anchor.d, sim_anchor.eps], "trials": args.trials, "seed": args.seed,
                           "dt": [args.dt, args.dt / 2], "horizon": args.horizon},
    })
    emit(
        hjb_csv=str(path),
        n_points=summary.n_points,
        n_skipped=summary.n_skipped,
        argmin_agreement=summary.agreement_rate,
        max_rel_residual_exact=summary.max_rel_residual_exact,
        mean_rel_residual_exact=summary.mean_rel_residual_exact,
        max_rel_residual_outside=summary.max_rel_residual_outside,
        mean_rel_residual_outside=summary.mean_rel_residual_outside,
        manifold_deviation_dt=coarse.max_deviation,
        manifold_deviation_half_dt=fine.max_deviation,
        integration_deviation_dt=coarse.max_integration_deviation,
        integration_deviation_half_dt=fine.max_integration_deviation,
        absorbed_at_p1=fine.n_absorbed,
        mean_p_max_z=float(z.max()) if len(z) else 0.0,
    )
    if not args.no_plots:
        from .plotting import plot_hjb
        xs = np.linspace(x_lo, x_hi, 200)
        curve = (xs, np.minimum(exps.theta * np.exp(-exps.alpha1 * xs), 1.0))
        emit(hjb_png=str(plot_hjb(rows, out / "hjb.png", curve)))


# --- parser ------------------------------------------------------------------

def _add_rates(p, required=True):
    p.add_argument("--r0", type=float, required=required, help="free-server rate relative to playback")
    p.add_argument("--rc", type=float, required=required, help="costly-server rate relative to playback")


def _add_target(p):
    p.add_argument("--d", type=float, required=True, help="initial buffer (packets)")
    p.add_argument("--eps", type=float, required=True, help="interruption probability budget")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="streamqoe", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="log progress")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add = sub.add_parser
    sub.add_parser = lambda *a, **k: _add(*a, parents=[common], **k)

    p = sub.add_parser("roots", help="decay exponents")
    p.add_argument("--rate", type=float)
    _add_rates(p, required=False)
    p.set_defaults(func=cmd_roots)

    p = sub.add_parser("region", help="classify a QoE target")
    _add_target(p)
    _add_rates(p)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("threshold", help="designed policy parameter and analytic cost")
    p.add_argument("--policy", choices=POLICY_NAMES, required=True)
    _add_target(p)
    _add_rates(p)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("simulate", help="Monte Carlo estimate for one policy")
    p.add_argument("--policy", choices=POLICY_NAMES, required=True)
    _add_target(p)
    _add_rates(p)
    p.add_argument("--param", type=float, help="override the designed switch time or threshold")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--file-size", type=_file_size, default="auto")
    p.add_argument("--truncation-tol", type=float, default=1e-4)
    p.add_argument("--event", action="store_true", help="step every arrival instead of leaping")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="write fig1.csv / fig2.csv and their figures")
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--r0", type=float)
    p.add_argument("--rc", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--d-min", type=float)
    p.add_argument("--d-max", type=float)
    p.add_argument("--d-step", type=float)
    p.add_argument("--policies", help="comma-separated subset of " + ",".join(POLICY_NAMES))
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--file-size", type=_file_size)
    p.add_argument("--truncation-tol", type=float)
    p.add_argument("--output")
    p.add_argument("--figures", choices=("fig1", "fig2", "both"), default="both")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("hjb-check", help="residuals of the expanded-state value candidate")
    p.add_argument("--r0", type=float, default=1.05)
    p.add_argument("--rc", type=float, default=0.15)
    p.add_argument("--grid-x", default="2:60:50", help="lo:hi:n")
    p.add_argument("--grid-p", default="50", help="n (spread over the region) or lo:hi:n")
    p.add_argument("--anchor", help="d,eps: check along the manifold through this target")
    p.add_argument("--fd-step", type=float, default=1e-5)
    p.add_argument("--p-grid", type=int, default=200)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=2e-3)
    p.add_argument("--horizon", type=float, default=50.0)
    p.add_argument("--output", default="results")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_hjb_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (UsageError, ConfigError) as err:
        print(f"streamqoe: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleTarget as err:
        print(f"streamqoe: infeasible: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DomainError, NumericError, ValueError, ArithmeticError) as err:
        print(f"streamqoe: error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
