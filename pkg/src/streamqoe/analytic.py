"""Closed-form single-server quantities.

The playback rate is normalised to one packet per unit time, so a server
delivering packets as a Poisson process of rate ``R`` drains or fills the
buffer with drift ``R - 1``. Everything here assumes ``R > 1``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DomainError

_REL_TOL = 1e-13


def gamma(r: float, rate: float) -> float:
    """Exponent function ``r + rate * (exp(-r) - 1)`` whose largest root sets the ruin decay."""
    return r + rate * math.expm1(-r)


def _gamma_prime(r: float, rate: float) -> float:
    return 1.0 - rate * math.exp(-r)


def largest_root(rate: float) -> float:
    """Largest positive root of :func:`gamma` for a server of the given rate.

    ``gamma`` is negative on ``(0, root)`` and positive beyond it, so the
    bracket is grown upwards from a tiny lower point until the sign flips,
    then bisected and finished with one Newton step.
    """
    if not rate > 1.0 or not math.isfinite(rate):
        raise DomainError(f"largest root needs rate R > 1 (got {rate!r})")
    lo = min(1e-12, (rate - 1.0) * 1e-6)
    hi = 2.0 * (rate - 1.0) / rate  # second-order estimate; undershoots for large rate
    while gamma(hi, rate) <= 0.0:
        lo = hi
        hi *= 2.0
    while hi - lo > _REL_TOL * hi:
        mid = 0.5 * (lo + hi)
        if gamma(mid, rate) < 0.0:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    return r - gamma(r, rate) / _gamma_prime(r, rate)


@dataclass(frozen=True)
class ServerRates:
    """Free server rate ``r_free`` (R0) and costly server rate ``r_costly`` (Rc)."""

    r_free: float
    r_costly: float

    def __post_init__(self):
        if not self.r_free > 1.0:
            raise DomainError(f"free rate R0 must exceed the playback rate 1 (got {self.r_free!r})")
        if not self.r_costly > 0.0:
            raise DomainError(f"costly rate Rc must be positive (got {self.r_costly!r})")

    @property
    def r_both(self) -> float:
        return self.r_free + self.r_costly

    def exponents(self) -> "DecayExponents":
        return DecayExponents.from_rates(self)


@dataclass(frozen=True)
class DecayExponents:
    """Ruin decay rates of the free-only (``alpha0``) and combined (``alpha1``) servers.

    ``beta`` is the constant used by the risky-threshold design and ``theta``
    the plain ratio used by the expanded-state value function.
    """

    alpha0: float
    alpha1: float

    @classmethod
    def from_rates(cls, rates: ServerRates) -> "DecayExponents":
        return cls(largest_root(rates.r_free), largest_root(rates.r_both))

    @property
    def beta(self) -> float:
        return self.alpha1 / (self.alpha0 * (1.0 - self.alpha0 / 2.0))

    @property
    def theta(self) -> float:
        return self.alpha1 / self.alpha0

    def d_bar(self, eps: float) -> float:
        """Initial buffer at which the two risky-threshold branches meet."""
        return math.log(self.beta / eps) / self.alpha1


@dataclass(frozen=True)
class QoeTarget:
    """Initial buffer ``d`` (packets) and interruption budget ``eps``.

    ``eps = 1`` is accepted as the degenerate no-constraint target.
    """

    d: float
    eps: float

    def __post_init__(self):
        if not self.d >= 0.0 or not math.isfinite(self.d):
            raise DomainError(f"initial buffer must be finite and >= 0 (got {self.d!r})")
        if not 0.0 < self.eps <= 1.0:
            raise DomainError(f"eps must lie in (0, 1] (got {self.eps!r})")


class Region(enum.Enum):
    FREE_ONLY_SUFFICIENT = "free-only-sufficient"
    INFEASIBLE = "infeasible"
    INTERIOR = "interior"


@dataclass(frozen=True)
class RegionClass:
    region: Region
    d_min: float
    d_max: float


def interruption_prob_infinite(d: float, rate: float) -> float:
    """Ruin probability ``exp(-rbar * d)`` of a single server with an endless file."""
    if d < 0:
        raise DomainError(f"initial buffer must be >= 0 (got {d!r})")
    return math.exp(-largest_root(rate) * d)


def truncation_gap(rate: float, file_size: float) -> float:
    """Width ``2 exp(-(R-1)^2 F / (4 (R+1)))`` between the finite-file bounds."""
    if not rate > 1.0:
        raise DomainError(f"rate must exceed 1 (got {rate!r})")
    if math.isinf(file_size):
        return 0.0
    return 2.0 * math.exp(-((rate - 1.0) ** 2) * file_size / (4.0 * (rate + 1.0)))


def interruption_prob_bounds(d: float, rate: float, file_size: float) -> tuple[float, float]:
    """Lower and upper bounds on the ruin probability for a file of ``file_size`` packets.

    The lower bound is clamped at zero.
    """
    if not file_size > 0:
        raise DomainError(f"file size must be positive (got {file_size!r})")
    upper = interruption_prob_infinite(d, rate)
    lower = max(0.0, upper - truncation_gap(rate, file_size))
    return lower, upper


def truncation_horizon(rate: float, tol: float) -> int:
    """Smallest integer file size whose bound gap is at most ``tol``."""
    if not rate > 1.0:
        raise DomainError(f"truncation horizon needs rate R > 1 (got {rate!r})")
    if not tol > 0.0:
        raise DomainError(f"tolerance must be positive (got {tol!r})")
    if tol >= 2.0:
        return 0
    k = (rate - 1.0) ** 2 / (4.0 * (rate + 1.0))
    f = max(0, math.ceil(math.log(2.0 / tol) / k))
    # guard against the ceil landing one short through rounding
    while truncation_gap(rate, f) > tol:
        f += 1
    while f > 0 and truncation_gap(rate, f - 1) <= tol:
        f -= 1
    return f


def region_bounds(eps: float, exps: DecayExponents) -> tuple[float, float]:
    log_inv = math.log(1.0 / eps)
    return log_inv / exps.alpha1, log_inv / exps.alpha0


def classify(target: QoeTarget, rates: ServerRates, exps: DecayExponents | None = None) -> RegionClass:
    """Place a target relative to the feasibility region (closed boundaries)."""
    exps = exps or rates.exponents()
    d_min, d_max = region_bounds(target.eps, exps)
    if target.d >= d_max:
        region = Region.FREE_ONLY_SUFFICIENT
    elif target.d < d_min:
        region = Region.INFEASIBLE
    else:
        region = Region.INTERIOR
    return RegionClass(region, d_min, d_max)
