"""Interval estimators for Monte Carlo summaries."""
from __future__ import annotations

import math

import numpy as np
from scipy import stats


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def mean_interval(values: np.ndarray, confidence: float = 0.95, lower_limit: float = 0.0):
    """Sample mean, standard error and Student-t interval.

    With a single sample the interval is ``[lower_limit, inf)``.
    """
    n = len(values)
    mean = float(np.mean(values)) if n else 0.0
    if n < 2:
        return mean, math.inf, (lower_limit, math.inf)
    se = float(np.std(values, ddof=1)) / math.sqrt(n)
    half = stats.t.ppf(0.5 + confidence / 2.0, n - 1) * se
    return mean, se, (mean - half, mean + half)
