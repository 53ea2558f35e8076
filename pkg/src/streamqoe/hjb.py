"""Expanded-state (buffer, remaining budget) check of the risky-policy value function.

State ``(x, p)``: buffer level and the interruption probability still
allowed. The candidate value ``V(x, p)`` is built from the risky-policy
cost, the switching curve is ``x = log(theta / p) / alpha1`` and
``theta = alpha1 / alpha0``. Nothing here solves the HJB equation; it
measures how well the candidate satisfies it.

The manifold's lower branch is coded as
``((theta-1) w + exp(-alpha1 x) (1 - theta w)) / (1 - w)`` with
``w = exp(-alpha1 T)``. With the opposite sign on the second term the curve
neither passes through its anchor nor joins the upper branch at ``x = T``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from ._rng import exponential, seed_stream
from .analytic import DecayExponents, QoeTarget, Region, ServerRates, classify
from .errors import DomainError, NumericError


class StencilError(DomainError):
    """A finite-difference stencil would leave the evaluation region."""


@njit(cache=True)
def _split(p, a1, th):
    return math.log(th / p) / a1


@njit(cache=True)
def _threshold(x, p, a0, a1, th):
    if x >= _split(p, a1, th):
        return (math.log(th / p) - a0 * x) / (a1 - a0)
    y = math.exp(-a1 * x)
    return math.log((p + th * (1.0 - y) - 1.0) / (p - y)) / a1


@njit(cache=True)
def _value(x, p, a0, a1, th, beta, drift):
    t = _threshold(x, p, a0, a1, th)
    if x >= _split(p, a1, th):
        return math.exp(-a0 * (x - t)) / (a0 * (1.0 - a0 / 2.0) * drift)
    y = math.exp(-a1 * x)
    return (p + th * (1.0 - y) - 1.0) / (drift * (th - 1.0)) * (t + beta / a1) - x / drift


@njit(cache=True)
def _manifold(x, t_anchor, a0, a1, th):
    if x >= t_anchor:
        return th * math.exp(-a0 * x - (a1 - a0) * t_anchor)
    w = math.exp(-a1 * t_anchor)
    return ((th - 1.0) * w + math.exp(-a1 * x) * (1.0 - th * w)) / (1.0 - w)


@dataclass(frozen=True)
class HjbPoint:
    x: float
    p: float

    def __post_init__(self):
        if not self.x >= 0.0:
            raise DomainError(f"buffer level must be >= 0 (got {self.x!r})")
        if not 0.0 < self.p <= 1.0:
            raise DomainError(f"budget p must lie in (0, 1] (got {self.p!r})")


def _consts(exps: DecayExponents):
    return exps.alpha0, exps.alpha1, exps.theta


def _check_region(x: float, p: float, exps: DecayExponents):
    if not p > math.exp(-exps.alpha1 * x):
        raise DomainError(f"(x={x:g}, p={p:g}) lies outside the region p > exp(-alpha1 x)")


def switching_level(p: float, exps: DecayExponents) -> float:
    """Buffer level at which the candidate's optimal action flips."""
    return math.log(exps.theta / p) / exps.alpha1


def threshold_T(point: HjbPoint, exps: DecayExponents) -> float:
    _check_region(point.x, point.p, exps)
    return _threshold(point.x, point.p, *_consts(exps))


def value_candidate(point: HjbPoint, rates: ServerRates, exps: DecayExponents | None = None) -> float:
    exps = exps or rates.exponents()
    _check_region(point.x, point.p, exps)
    return _value(point.x, point.p, *_consts(exps), exps.beta, rates.r_both - 1.0)


def optimal_action(point: HjbPoint, exps: DecayExponents) -> int:
    _check_region(point.x, point.p, exps)
    return 0 if point.x >= switching_level(point.p, exps) else 1


def manifold_p(x: float, anchor: QoeTarget, exps: DecayExponents) -> float:
    """Budget on the invariant curve through ``(anchor.d, anchor.eps)`` at buffer ``x``."""
    if not x >= 0.0:
        raise DomainError(f"buffer level must be >= 0 (got {x!r})")
    t_anchor = threshold_T(HjbPoint(anchor.d, anchor.eps), exps)
    p = _manifold(x, t_anchor, *_consts(exps))
    if not 0.0 < p <= 1.0 + 1e-12:
        raise NumericError(f"manifold left (0, 1] at x={x:g}: p={p!r}")
    return min(p, 1.0)


@dataclass(frozen=True)
class HjbResidualReport:
    point: HjbPoint
    lhs: float
    rhs: float
    residual: float
    argmin_u: int
    in_exact_zone: bool
    rhs_by_action: tuple[float, float] = (math.nan, math.nan)
    p_hat: float = math.nan
    manifold_gap: float = 0.0

    @property
    def relative_residual(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs), 1e-12)
        return abs(self.residual) / scale


def _partial(f, z: float, h: float, split: float, lower: float):
    """Central difference of ``f`` at ``z``; one-sided second order across ``split``.

    The side is chosen so the stencil stays on ``z``'s branch; ``z >= split``
    counts as the upper branch.
    """
    if z - h < split <= z + h:
        if z >= split:
            return (-3.0 * f(z) + 4.0 * f(z + h) - f(z + 2.0 * h)) / (2.0 * h)
        if z - 2.0 * h <= lower:
            raise StencilError(f"one-sided stencil at {z:g} leaves the region")
        return (3.0 * f(z) - 4.0 * f(z - h) + f(z - 2.0 * h)) / (2.0 * h)
    if z - h <= lower:
        raise StencilError(f"stencil at {z:g} leaves the region")
    return (f(z + h) - f(z - h)) / (2.0 * h)


def value_partials(point: HjbPoint, rates: ServerRates, fd_step: float = 1e-5,
                   exps: DecayExponents | None = None) -> tuple[float, float]:
    """Finite-difference ``(dV/dx, dV/dp)`` of the candidate."""
    exps = exps or rates.exponents()
    a0, a1, th = _consts(exps)
    beta, drift = exps.beta, rates.r_both - 1.0
    x, p = point.x, point.p
    _check_region(x, p, exps)
    hx = fd_step * max(1.0, abs(x))
    hp = fd_step * p
    # lowest x keeping p inside the region, and lowest p at this x
    x_low = -math.log(p) / a1
    p_low = math.exp(-a1 * x)
    vx = _partial(lambda z: _value(z, p, a0, a1, th, beta, drift), x, hx, _split(p, a1, th), x_low)
    vp = _partial(lambda z: _value(x, z, a0, a1, th, beta, drift), p, hp, th * math.exp(-a1 * x), p_low)
    if p + 2.0 * hp > 1.0 and p + hp > 1.0:
        raise StencilError(f"p stencil at {p:g} exceeds 1")
    return vx, vp


def hjb_residual(point: HjbPoint, rates: ServerRates, fd_step: float = 1e-5, p_grid: int = 200,
                 exps: DecayExponents | None = None) -> HjbResidualReport:
    """Compare ``dV/dx`` with the minimised right-hand side of the HJB equation.

    The minimisation over the post-jump budget ``p_hat`` takes the better of
    the manifold point through ``(x, p)`` and a log-spaced grid on
    ``(exp(-alpha1 (x+1)), 1]``; ``p_hat = 1`` (budget spent) is admissible.
    """
    exps = exps or rates.exponents()
    a0, a1, th = _consts(exps)
    beta, drift = exps.beta, rates.r_both - 1.0
    x, p = point.x, point.p
    lhs, vp = value_partials(point, rates, fd_step, exps)
    v = _value(x, p, a0, a1, th, beta, drift)

    p_man = _manifold(x + 1.0, _threshold(x, p, a0, a1, th), a0, a1, th)
    lo = math.exp(-a1 * (x + 1.0))
    cands = np.geomspace(lo, 1.0, p_grid + 1)[1:]
    cands = np.append(cands, p_man)
    v_next = np.array([_value(x + 1.0, q, a0, a1, th, beta, drift) for q in cands])

    by_action = []
    best_q = []
    man_gap = []
    for u, rate in ((0, rates.r_free), (1, rates.r_both)):
        vals = u + vp * (p - cands) * rate + rate * (v_next - v)
        i = int(np.argmin(vals))
        by_action.append(float(vals[i]))
        best_q.append(float(cands[i]))
        man_gap.append(float(vals[-1] - vals[i]))
    u_best = 0 if by_action[0] <= by_action[1] else 1
    rhs = by_action[u_best]
    return HjbResidualReport(
        point=point,
        lhs=lhs,
        rhs=rhs,
        residual=lhs - rhs,
        argmin_u=u_best,
        in_exact_zone=x >= switching_level(p, exps) - 1.0,
        rhs_by_action=(by_action[0], by_action[1]),
        p_hat=best_q[u_best],
        manifold_gap=man_gap[u_best],
    )


def region_grid(exps: DecayExponents, x_lo: float = 2.0, x_hi: float = 60.0, n_x: int = 50, n_p: int = 50,
                edge_margin: float = 1.05) -> list[tuple[float, float]]:
    """``n_x`` by ``n_p`` points of the feasibility region in ``(x, p)`` coordinates.

    Each column ``x`` gets ``n_p`` log-spaced budgets between
    ``edge_margin * exp(-alpha1 x)`` and ``exp(-alpha0 x)``; above the latter
    the free server alone meets the budget.
    """
    pts = []
    for x in np.linspace(x_lo, x_hi, n_x):
        p_lo = edge_margin * math.exp(-exps.alpha1 * x)
        p_hi = math.exp(-exps.alpha0 * x)
        if not p_lo < p_hi:
            raise DomainError(f"column x={x:g} has no room inside the region")
        pts.extend((float(x), float(p)) for p in np.geomspace(p_lo, p_hi, n_p))
    return pts


def residual_grid(rates: ServerRates, points, fd_step: float = 1e-5, p_grid: int = 200,
                  exps: DecayExponents | None = None):
    """Evaluate :func:`hjb_residual` at each ``(x, p)``, skipping points near the region edge.

    Returns ``(reports, closed_form_actions, skipped)`` with reports sorted by ``(x, p)``.
    """
    exps = exps or rates.exponents()
    reports, actions, skipped = [], [], []
    for x, p in sorted(points):
        try:
            pt = HjbPoint(float(x), float(p))
            rep = hjb_residual(pt, rates, fd_step, p_grid, exps)
        except DomainError as err:
            skipped.append((float(x), float(p), str(err)))
            continue
        reports.append(rep)
        actions.append(optimal_action(pt, exps))
    if skipped:
        warnings.warn(f"skipped {len(skipped)} grid points at the region edge", stacklevel=2)
    return reports, actions, skipped


@dataclass(frozen=True)
class GridSummary:
    n_points: int
    n_skipped: int
    agreement_rate: float
    max_rel_residual_exact: float
    mean_rel_residual_exact: float
    max_rel_residual_outside: float
    mean_rel_residual_outside: float


def summarize_grid(reports, actions, skipped) -> GridSummary:
    agree = [r.argmin_u == a for r, a in zip(reports, actions)]
    inside = np.array([r.relative_residual for r in reports if r.in_exact_zone])
    outside = np.array([r.relative_residual for r in reports if not r.in_exact_zone])

    def stat(arr, fn):
        return float(fn(arr)) if len(arr) else math.nan

    return GridSummary(
        n_points=len(reports),
        n_skipped=len(skipped),
        agreement_rate=float(np.mean(agree)) if agree else math.nan,
        max_rel_residual_exact=stat(inside, np.max),
        mean_rel_residual_exact=stat(inside, np.mean),
        max_rel_residual_outside=stat(outside, np.max),
        mean_rel_residual_outside=stat(outside, np.mean),
    )


# --- expanded-state simulation ---------------------------------------------

@njit(cache=True)
def _expanded_trial(d, eps, t_anchor, a0, a1, th, r0, rc, dt, horizon, checkpoints, out_p, s):
    """Euler-integrate one (x, p) path.

    Returns ``(max deviation, max deviation on band-free segments, status)``.
    A segment is the time between two arrivals; it is band-free if it never
    ran with both servers inside ``[T - 1, T)``, where the jump target is
    taken from the upper branch. Status is 0 normal, 1 absorbed at ``p = 1``,
    -1 if ``p`` dropped to zero.
    """
    x = d
    p = eps
    t = 0.0
    r1 = r0 + rc
    clock = exponential(s, 1.0)
    hazard = 0.0
    max_dev = 0.0
    max_clean = 0.0
    in_band = False
    k = 0
    n_chk = len(checkpoints)
    while k < n_chk and checkpoints[k] <= 0.0:
        out_p[k] = p
        k += 1
    ruined = False
    status = 0
    while t < horizon and not ruined:
        u = 0 if x >= math.log(th / p) / a1 else 1
        rate = r1 if u == 1 else r0
        h = min(dt, horizon - t)
        if k < n_chk:
            h = min(h, checkpoints[k] - t)
        jump = False
        if hazard + rate * h >= clock:
            h = (clock - hazard) / rate
            jump = True
        if h >= x:
            h = x
            jump = False
            ruined = True
        if u == 1 and x + 1.0 >= t_anchor:
            in_band = True
        p_hat = _manifold(x + 1.0, t_anchor, a0, a1, th)
        p += (p - p_hat) * rate * h
        x -= h
        t += h
        hazard += rate * h
        if jump:
            x += 1.0
            p = _manifold(x, t_anchor, a0, a1, th)
            clock = exponential(s, 1.0)
            hazard = 0.0
        if ruined:
            x = 0.0
        if not p > 0.0:
            return max_dev, max_clean, -1
        if p >= 1.0:
            # budget exhausted: absorb at the boundary, a stopped martingale
            p = 1.0
            ruined = True
            status = 1
        dev = abs(p - _manifold(x, t_anchor, a0, a1, th))
        if dev > max_dev:
            max_dev = dev
        if not in_band and dev > max_clean:
            max_clean = dev
        if jump:
            in_band = False
        while k < n_chk and checkpoints[k] <= t + 1e-12:
            out_p[k] = p
            k += 1
    while k < n_chk:
        out_p[k] = p
        k += 1
    return max_dev, max_clean, status


@njit(cache=True, parallel=True)
def _expanded_batch(d, eps, t_anchor, a0, a1, th, r0, rc, dt, horizon, checkpoints, master_seed, n):
    devs = np.empty(n)
    clean = np.empty(n)
    status = np.empty(n, dtype=np.int64)
    ps = np.empty((n, len(checkpoints)))
    for i in prange(n):
        s = np.empty(4, dtype=np.uint64)
        seed_stream(s, master_seed, i)
        devs[i], clean[i], status[i] = _expanded_trial(d, eps, t_anchor, a0, a1, th, r0, rc, dt, horizon,
                                         checkpoints, ps[i], s)
    return devs, clean, status, ps


@dataclass(frozen=True)
class ExpandedStateReport:
    """``max_deviation`` covers every path; ``max_integration_deviation`` only
    arrival-to-arrival segments that never used the jump target across ``T``,
    where the candidate dynamics are exactly tangent to the manifold."""

    max_deviation: float
    max_integration_deviation: float
    checkpoints: np.ndarray
    mean_p: np.ndarray
    se_p: np.ndarray
    n_absorbed: int
    deviations: np.ndarray = field(repr=False)


def simulate_expanded_state(anchor: QoeTarget, rates: ServerRates, trials: int = 1000, seed: int = 0,
                            dt: float = 1e-3, horizon: float = 50.0, n_checkpoints: int = 11,
                            exps: DecayExponents | None = None) -> ExpandedStateReport:
    """Simulate ``(x_t, p_t)`` under the candidate's actions and track the distance to the manifold.

    Between arrivals the budget follows ``dp = (p - p_hat) R_u dt`` by
    explicit Euler with step ``dt``; at each arrival the buffer gains a
    packet and the budget jumps to ``p_hat``, the manifold value there.
    Off the manifold that drift is unstable, so a path whose budget climbs to
    1 is stopped there (counted in ``n_absorbed``); stopping keeps the
    budget's mean at ``eps``.
    """
    exps = exps or rates.exponents()
    if classify(anchor, rates, exps).region is not Region.INTERIOR:
        raise DomainError(f"anchor {anchor} is not inside the feasibility region")
    if not dt > 0:
        raise DomainError("dt must be positive")
    t_anchor = threshold_T(HjbPoint(anchor.d, anchor.eps), exps)
    chk = np.linspace(0.0, horizon, n_checkpoints)
    devs, clean, status, ps = _expanded_batch(float(anchor.d), float(anchor.eps), t_anchor, *_consts(exps),
                                   float(rates.r_free), float(rates.r_costly), float(dt), float(horizon),
                                   chk, np.uint64(seed), int(trials))
    if (status < 0).any():
        raise NumericError(f"budget fell to zero in {int((status < 0).sum())} of {trials} trials")
    se = ps.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.full(len(chk), math.inf)
    return ExpandedStateReport(float(devs.max()), float(clean.max()), chk, ps.mean(axis=0), se,
                               int((status == 1).sum()), devs)


def boundary_value(x: float, rates: ServerRates, exps: DecayExponents | None = None) -> float:
    """Candidate value at ``p = 1``, where the true value is zero."""
    return value_candidate(HjbPoint(x, 1.0), rates, exps)


def threshold_mismatch(target: QoeTarget, rates: ServerRates, exps: DecayExponents | None = None) -> float:
    """Designed risky threshold minus the expanded-state threshold at the same target."""
    from .policy import risky_threshold

    exps = exps or rates.exponents()
    return risky_threshold(target, rates, exps) - threshold_T(HjbPoint(target.d, target.eps), exps)
