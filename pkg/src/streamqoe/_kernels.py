"""Numba kernels for the controlled buffer process.

Two exact simulators share one trajectory routine:

* event stepping draws every inter-arrival time;
* leaping jumps over windows in which no policy or ruin boundary can be hit,
  drawing the Poisson arrival count for the whole window. It falls back to
  event stepping whenever the next boundary is an upward crossing (safe
  before latching, risky below its threshold) and near file completion.
"""

import numpy as np
from numba import njit, prange

from ._rng import exponential, hypergeometric, order_statistic, poisson, seed_stream, uniform

FREE_ONLY = 0
BOTH_ALWAYS = 1
OFFLINE = 2
SAFE = 3
RISKY = 4

_RUIN = 0
_POLICY = 1
# below this many outstanding arrivals the leap kernel steps event by event
_LEAP_MIN_REMAINING = 8


@njit(cache=True)
def trajectory(kind, param, d, r0, rc, needed, s, leap):
    """Return ``(interrupted, stop_time, cost_time, costly_packets)``.

    ``needed`` is the number of arrivals that completes the file.
    """
    r1 = r0 + rc
    p_costly = rc / r1
    t = 0.0
    x = d
    n_arr = 0
    cost = 0.0
    costly = 0
    if needed <= 0:
        return False, 0.0, 0.0, 0
    latched = False  # safe: S reached; offline: switch time passed
    below = False  # risky: buffer under T
    if kind == SAFE:
        latched = x >= param
    elif kind == RISKY:
        below = x < param

    while True:
        if kind == FREE_ONLY:
            u = 0
        elif kind == BOTH_ALWAYS:
            u = 1
        elif kind == OFFLINE or kind == SAFE:
            u = 0 if latched else 1
        else:
            u = 1 if below else 0
        rate = r1 if u == 1 else r0

        # time to the next deterministic boundary if nothing arrives; ruin wins ties
        b = x
        bkind = _RUIN
        if kind == OFFLINE and not latched and param - t < b:
            b = max(param - t, 0.0)
            bkind = _POLICY
        elif kind == RISKY and not below and x - param < b:
            b = x - param
            bkind = _POLICY

        if b <= 0.0:
            if bkind == _RUIN:
                return True, t, cost, costly
            if kind == OFFLINE:
                latched = True
            else:
                x = param
                below = True
            continue

        remaining = needed - n_arr
        upward = (kind == SAFE and not latched) or (kind == RISKY and below)
        if leap and not upward and remaining > _LEAP_MIN_REMAINING:
            cap = 0.5 * remaining / rate
            hit = b <= cap
            delta = b if hit else cap
            kf = poisson(s, r0 * delta)
            kc = poisson(s, rc * delta) if u == 1 else 0
            k = kf + kc
            if k >= remaining:
                tau = delta * order_statistic(s, remaining, k)
                t += tau
                x += remaining - tau
                cost += tau * u
                costly += hypergeometric(s, k, kc, remaining)
                return False, t, cost, costly
            t += delta
            x += k - delta
            cost += delta * u
            costly += kc
            n_arr += k
            if hit:
                if kind == OFFLINE and bkind == _POLICY:
                    # a time boundary is crossed whatever arrived
                    latched = True
                elif k == 0:
                    if bkind == _RUIN:
                        return True, t, cost, costly
                    x = param
                    below = True
            continue

        e = exponential(s, rate)
        if e < b:
            t += e
            x += 1.0 - e
            cost += e * u
            n_arr += 1
            if u == 1 and uniform(s) < p_costly:
                costly += 1
            if n_arr >= needed:
                return False, t, cost, costly
            if kind == SAFE and not latched and x >= param:
                latched = True
            elif kind == RISKY:
                below = x < param
        else:
            t += b
            cost += b * u
            if bkind == _RUIN:
                return True, t, cost, costly
            if kind == OFFLINE:
                x -= b
                latched = True
            else:
                x = param
                below = True


@njit(cache=True, parallel=True)
def run_batch(kind, param, d, r0, rc, needed, master_seed, first_index, n, leap):
    interrupted = np.zeros(n, dtype=np.bool_)
    stop_time = np.empty(n)
    cost_time = np.empty(n)
    costly = np.empty(n, dtype=np.int64)
    for i in prange(n):
        s = np.empty(4, dtype=np.uint64)
        seed_stream(s, master_seed, first_index + i)
        a, b, c, e = trajectory(kind, param, d, r0, rc, needed, s, leap)
        interrupted[i] = a
        stop_time[i] = b
        cost_time[i] = c
        costly[i] = e
    return interrupted, stop_time, cost_time, costly


@njit(cache=True)
def first_passage(d, threshold, rate, s):
    """Single server from ``d`` until ``x >= threshold`` or ruin.

    Returns ``(reached, overshoot, time)``.
    """
    if d >= threshold:
        return True, d - threshold, 0.0
    t = 0.0
    x = d
    while True:
        e = exponential(s, rate)
        if e >= x:
            return False, 0.0, t + x
        t += e
        x += 1.0 - e
        if x >= threshold:
            return True, x - threshold, t


@njit(cache=True, parallel=True)
def run_first_passage(d, threshold, rate, master_seed, n):
    reached = np.zeros(n, dtype=np.bool_)
    overshoot = np.zeros(n)
    time = np.empty(n)
    for i in prange(n):
        s = np.empty(4, dtype=np.uint64)
        seed_stream(s, master_seed, i)
        a, b, c = first_passage(d, threshold, rate, s)
        reached[i] = a
        overshoot[i] = b
        time[i] = c
    return reached, overshoot, time
