"""Association policies and their closed-form designs.

Five families are supported: free server only, both servers always, an
offline switch-off time, the online *safe* threshold (both servers until the
buffer first reaches ``S``) and the online *risky* threshold (both servers
whenever the buffer is below ``T``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .analytic import (
    DecayExponents,
    QoeTarget,
    Region,
    ServerRates,
    classify,
    largest_root,
)
from .errors import DomainError, InfeasibleTarget, NumericError


@dataclass(frozen=True)
class FreeOnly:
    name = "free-only"


@dataclass(frozen=True)
class BothAlways:
    name = "both-always"


@dataclass(frozen=True)
class Offline:
    t_s: float
    name = "offline"

    def __post_init__(self):
        if not self.t_s >= 0:
            raise DomainError(f"switch time must be >= 0 (got {self.t_s!r})")


@dataclass(frozen=True)
class Safe:
    s: float
    name = "safe"

    def __post_init__(self):
        if not self.s >= 0:
            raise DomainError(f"safe threshold must be >= 0 (got {self.s!r})")


@dataclass(frozen=True)
class Risky:
    t: float
    name = "risky"

    def __post_init__(self):
        if not self.t >= 0:
            raise DomainError(f"risky threshold must be >= 0 (got {self.t!r})")


PolicySpec = Union[FreeOnly, BothAlways, Offline, Safe, Risky]
POLICY_NAMES = ("offline", "safe", "risky", "free-only", "both-always")


@dataclass
class PolicyState:
    """Per-trajectory memory. Only the safe policy uses it."""

    latched_done: bool = False

    def latch(self):
        self.latched_done = True


def decide(spec: PolicySpec, state: PolicyState, t: float, x: float) -> int:
    """Action at time ``t`` with buffer ``x``: 1 uses both servers, 0 the free one.

    For the safe policy the caller latches ``state`` once ``x`` reaches ``S``;
    :func:`observe` does that bookkeeping.
    """
    if isinstance(spec, FreeOnly):
        return 0
    if isinstance(spec, BothAlways):
        return 1
    if isinstance(spec, Offline):
        return 1 if t <= spec.t_s else 0
    if isinstance(spec, Safe):
        return 0 if state.latched_done else 1
    if isinstance(spec, Risky):
        return 1 if 0.0 < x < spec.t else 0
    raise TypeError(f"unknown policy spec {spec!r}")


def observe(spec: PolicySpec, state: PolicyState, x: float) -> None:
    if isinstance(spec, Safe) and x >= spec.s:
        state.latch()


@dataclass(frozen=True)
class CostReport:
    """Expected time on the costly server.

    ``xi_band`` is an additive uncertainty: the true value lies in
    ``[expected_cost_time, expected_cost_time + xi_band)``.
    """

    expected_cost_time: float
    is_bound: bool
    r_costly: float
    xi_band: float = 0.0

    @property
    def costly_packets_equiv(self) -> float:
        return self.expected_cost_time * self.r_costly


def _budget_margin(target: QoeTarget, rates: ServerRates, exps: DecayExponents) -> float:
    """``eps - exp(-alpha1 D)``: budget left after the combined-server ruin risk."""
    rc = classify(target, rates, exps)
    if rc.region is Region.INFEASIBLE:
        raise InfeasibleTarget(
            f"D={target.d:g} is below the feasibility bound {rc.d_min:g} for eps={target.eps:g}"
        )
    margin = target.eps - math.exp(-exps.alpha1 * target.d)
    if not margin > 0.0:
        raise InfeasibleTarget(f"target (D={target.d:g}, eps={target.eps:g}) sits on the region boundary")
    return margin


def safe_threshold(target: QoeTarget, rates: ServerRates, exps: DecayExponents | None = None) -> float:
    exps = exps or rates.exponents()
    margin = _budget_margin(target, rates, exps)
    return math.log(1.0 / margin) / exps.alpha0


def offline_switch_time(target: QoeTarget, rates: ServerRates, exps: DecayExponents | None = None) -> float:
    exps = exps or rates.exponents()
    s = safe_threshold(target, rates, exps)
    return max(0.0, rates.r_free / rates.r_costly * (s - target.d))


def offline_cost(target: QoeTarget, rates: ServerRates, exps: DecayExponents | None = None) -> CostReport:
    """The offline policy pays for exactly its switch-off time."""
    return CostReport(offline_switch_time(target, rates, exps), False, rates.r_costly)


def safe_cost(target: QoeTarget, rates: ServerRates, exps: DecayExponents | None = None) -> CostReport:
    """Expected time to first reach ``S*`` with both servers, overshoot excluded."""
    exps = exps or rates.exponents()
    s = safe_threshold(target, rates, exps)
    drift = rates.r_both - 1.0
    if target.d >= s:
        return CostReport(0.0, False, rates.r_costly, 0.0)
    return CostReport((s - target.d) / drift, False, rates.r_costly, 1.0 / drift)


def risky_threshold(target: QoeTarget, rates: ServerRates, exps: DecayExponents | None = None) -> float:
    exps = exps or rates.exponents()
    margin = _budget_margin(target, rates, exps)
    a0, a1, beta = exps.alpha0, exps.alpha1, exps.beta
    d, eps = target.d, target.eps
    if d >= exps.d_bar(eps):
        return (math.log(beta / eps) - a0 * d) / (a1 - a0)
    numerator = eps + beta * (1.0 - math.exp(-a1 * d)) - 1.0
    if not numerator > 0.0:
        raise NumericError(f"risky threshold log numerator is {numerator!r} at D={d:g}, eps={eps:g}")
    return math.log(numerator / margin) / a1


def risky_cost_bound(target: QoeTarget, rates: ServerRates, exps: DecayExponents | None = None) -> CostReport:
    exps = exps or rates.exponents()
    t = risky_threshold(target, rates, exps)
    a0, a1, beta = exps.alpha0, exps.alpha1, exps.beta
    drift = rates.r_both - 1.0
    d = target.d
    if d >= exps.d_bar(target.eps):
        bound = beta / (a1 * drift) * math.exp(-a0 * (d - t))
    else:
        reach = -math.expm1(-a1 * d) / -math.expm1(-a1 * t)
        bound = reach / drift * (t + 1.0 + beta / a1) - d / drift
    return CostReport(bound, True, rates.r_costly)


def design(name: str, target: QoeTarget, rates: ServerRates, exps: DecayExponents | None = None) -> PolicySpec:
    """Policy of family ``name`` at its designed operating parameter."""
    if name == "free-only":
        return FreeOnly()
    if name == "both-always":
        return BothAlways()
    exps = exps or rates.exponents()
    if name == "offline":
        return Offline(offline_switch_time(target, rates, exps))
    if name == "safe":
        return Safe(safe_threshold(target, rates, exps))
    if name == "risky":
        return Risky(risky_threshold(target, rates, exps))
    raise ValueError(f"unknown policy family {name!r}; expected one of {POLICY_NAMES}")


def analytic_cost(name: str, target: QoeTarget, rates: ServerRates, exps: DecayExponents | None = None) -> CostReport:
    """Closed-form cost of the designed policy; ``inf`` where the family cannot meet the target."""
    exps = exps or rates.exponents()
    if name == "offline":
        return offline_cost(target, rates, exps)
    if name == "safe":
        return safe_cost(target, rates, exps)
    if name == "risky":
        return risky_cost_bound(target, rates, exps)
    if name == "free-only":
        free_ok = classify(target, rates, exps).region is Region.FREE_ONLY_SUFFICIENT
        return CostReport(0.0 if free_ok else math.inf, False, rates.r_costly)
    if name == "both-always":
        # never releases the costly server, so an endless file costs forever
        return CostReport(math.inf, False, rates.r_costly)
    raise ValueError(f"unknown policy family {name!r}")


def stopping_prob_reach_before_ruin(d: float, t: float, rate: float, overshoot_expectation: float = 0.5) -> float:
    """Probability a single server climbs from ``d`` to ``t`` before the buffer empties.

    The conditional mean of ``exp(-rbar * x_crossing)`` is replaced by its
    value at ``t + overshoot_expectation``.
    """
    if not 0.0 < d <= t:
        raise DomainError(f"need 0 < d <= t (got d={d!r}, t={t!r})")
    if not 0.0 <= overshoot_expectation <= 1.0:
        raise DomainError(f"overshoot surrogate must lie in [0, 1] (got {overshoot_expectation!r})")
    r = largest_root(rate)
    return -math.expm1(-r * d) / -math.expm1(-r * (t + overshoot_expectation))


def stopping_prob_interval(d: float, t: float, rate: float) -> tuple[float, float]:
    """``(low, high)`` from overshoot surrogates 1 and 0."""
    return (
        stopping_prob_reach_before_ruin(d, t, rate, 1.0),
        stopping_prob_reach_before_ruin(d, t, rate, 0.0),
    )
