"""Per-trial random streams for the numba kernels.

Generator: xoshiro256** (Blackman & Vigna). Each trial owns a stream whose
256-bit state is filled by splitmix64 starting from
``fmix64(master_seed) ^ fmix64(trial_index + GOLDEN)``. A trial's draws
therefore depend only on ``(master_seed, trial_index)``, never on which
thread ran it or in what order.
"""
import math

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True)
def fmix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def seed_stream(s, master_seed, trial_index):
    x = fmix64(np.uint64(master_seed)) ^ fmix64(np.uint64(trial_index) + GOLDEN)
    for i in range(4):
        x = x + GOLDEN
        s[i] = fmix64(x)


@njit(cache=True)
def next_u64(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True)
def uniform(s):
    """Double in [0, 1) with 53 random bits."""
    return float(next_u64(s) >> np.uint64(11)) * _TWO_M53


@njit(cache=True)
def exponential(s, rate):
    return -math.log1p(-uniform(s)) / rate


@njit(cache=True)
def poisson(s, mu):
    if mu <= 0.0:
        return 0
    if mu < 10.0:
        # multiplication method
        limit = math.exp(-mu)
        k = 0
        prod = 1.0 - uniform(s)
        while prod > limit:
            k += 1
            prod *= 1.0 - uniform(s)
        return k
    # PTRS transformed rejection (Hoermann 1993)
    slam = math.sqrt(mu)
    loglam = math.log(mu)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = uniform(s) - 0.5
        v = uniform(s)
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + mu + 0.43)
        if us >= 0.07 and v <= vr:
            return int(k)
        if k < 0.0 or (us < 0.013 and v > us):
            continue
        if v <= 0.0:
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)
                <= -mu + k * loglam - math.lgamma(k + 1.0)):
            return int(k)


@njit(cache=True)
def order_statistic(s, m, k):
    """m-th smallest of k iid uniforms on [0, 1), via exponential spacings."""
    head = 0.0
    for _ in range(m):
        head -= math.log1p(-uniform(s))
    tail = 0.0
    for _ in range(k - m + 1):
        tail -= math.log1p(-uniform(s))
    return head / (head + tail)


@njit(cache=True)
def hypergeometric(s, total, marked, draws):
    """Marked items among ``draws`` taken without replacement from ``total``."""
    got = 0
    for i in range(draws):
        if uniform(s) * (total - i) < marked - got:
            got += 1
    return got
