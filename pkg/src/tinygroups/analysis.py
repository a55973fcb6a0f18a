"""Tail calculators used for sizing and as test oracles."""

from dataclasses import dataclass
import math

import numpy as np
from scipy.stats import binom


@dataclass(frozen=True)
class TailPair:
    exact: float
    chernoff: float


def exceed_count(m, threshold_fraction):
    """Largest bad count still tolerated in a group of ``m``: ``floor(thr * m)``."""
    return int(math.floor(threshold_fraction * m + 1e-9))


def chernoff_group_failure(m, p, threshold_fraction):
    """P[Bin(m, p) > threshold * m], exactly and as a Chernoff bound."""
    if m < 1:
        raise ValueError("group size must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    k = exceed_count(m, threshold_fraction)
    exact = float(binom.sf(k, m, p)) if p > 0 else 0.0
    if p == 0:
        return TailPair(0.0, 0.0)
    mu = m * p
    d = threshold_fraction / p - 1.0
    if d <= 0:
        bound = 1.0
    elif d <= 1:
        bound = math.exp(-d * d * mu / 3.0)
    else:
        bound = math.exp(-d * d * mu / (2.0 + d))
    return TailPair(exact, min(1.0, bound))


def bounded_differences_tail(t, c):
    """Two-sided bound 2 exp(-2 t^2 / sum c_i^2) for a function with bounded differences."""
    c = np.asarray(c, dtype=float)
    s = float(np.sum(c * c))
    if s == 0:
        return 0.0 if t > 0 else 1.0
    return min(1.0, 2.0 * math.exp(-2.0 * t * t / s))


def feasible(beta, delta):
    return beta < 0.5 and (1 + delta) * beta < 0.5


@dataclass(frozen=True)
class Sizing:
    d1: float
    m: int
    tail: float


def size_groups_for_target(beta, delta, target_pf, n, slack=0.0, d1_max=1000.0):
    """Smallest ``d1`` whose group size ``ceil(d1 ln ln n)`` has failure tail <= target.

    Sizes are scanned one integer at a time because the tail is not
    monotone in ``m`` (the tolerated bad count is a floor).
    """
    if not feasible(beta, delta):
        raise ValueError(f"infeasible: beta={beta}, (1+delta)beta={(1 + delta) * beta:.3f} must be < 1/2")
    lnln = math.log(math.log(n))
    p = (1 + slack) * beta
    thr = (1 + delta) * beta
    m_min = max(1, math.ceil(3.0 - 1e-9))
    m_max = math.ceil(d1_max * lnln)
    best = None
    for m in range(m_min, m_max + 1):
        tail = chernoff_group_failure(m, p, thr).exact
        if best is None or tail < best[1]:
            best = (m, tail)
        if tail <= target_pf:
            d1 = m / lnln
            if math.ceil(d1 * lnln) != m:
                d1 = math.nextafter(d1, 0.0)
            return Sizing(d1, m, tail)
    raise ValueError(f"target {target_pf:g} unreachable for d1 <= {d1_max:g}; "
                     f"best tail {best[1]:.3g} at m={best[0]}")


def pf_target(n, k):
    """``1 / ln^k n``."""
    return 1.0 / math.log(n) ** k


def fit_through_origin(x, y):
    """Least-squares ``y = a x``; returns (a, residual sum of squares)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    a = float(x @ y / (x @ x))
    return a, float(np.sum((y - a * x) ** 2))


def percentiles(values):
    v = np.asarray(values, dtype=float)
    return {"mean": float(v.mean()), "p5": float(np.percentile(v, 5)),
            "p50": float(np.percentile(v, 50)), "p95": float(np.percentile(v, 95))}
