"""Scalar kernel primitives compiled with numba, keyed by an integer kernel kind.

Parameter pairs ``(a, b)`` are ``(beta, unused)`` for the exponential kernel
and ``(c, p)`` for Lomax.
"""
import math

import numpy as np
from numba import njit

EXPONENTIAL = 0
LOMAX = 1

LOG_2PI = math.log(2.0 * math.pi)


@njit(cache=True)
def log_g(kind, a, b, t):
    if kind == EXPONENTIAL:
        return math.log(a) - a * t
    return math.log(b - 1.0) + (b - 1.0) * math.log(a) - b * math.log(t + a)


@njit(cache=True)
def big_g(kind, a, b, t):
    """Kernel CDF at lag ``t``; zero for ``t <= 0``."""
    if t <= 0.0:
        return 0.0
    if kind == EXPONENTIAL:
        return -math.expm1(-a * t)
    return -math.expm1(-(b - 1.0) * math.log1p(t / a))


@njit(cache=True)
def quantile(kind, a, b, q):
    if kind == EXPONENTIAL:
        return -math.log1p(-q) / a
    return a * math.expm1(-math.log1p(-q) / (b - 1.0))


@njit(cache=True)
def log_window_mass(kind, a, b, lo, hi):
    """log of kernel mass on (max(lo, 0), hi); -inf when empty."""
    if lo < 0.0:
        lo = 0.0
    if hi <= lo:
        return -np.inf
    if kind == EXPONENTIAL:
        # mass = e^{-a lo} (1 - e^{-a (hi-lo)})
        if math.isinf(hi):
            return -a * lo
        return -a * lo + math.log(-math.expm1(-a * (hi - lo)))
    s_lo = -(b - 1.0) * math.log1p(lo / a)
    if math.isinf(hi):
        return s_lo
    s_ratio = -(b - 1.0) * math.log1p((hi - lo) / (a + lo))
    return s_lo + math.log(-math.expm1(s_ratio))


@njit(cache=True)
def sample_window(kind, a, b, lo, hi, u):
    """Inverse-CDF draw of a lag restricted to (max(lo, 0), hi) from uniform ``u``."""
    if lo < 0.0:
        lo = 0.0
    if kind == EXPONENTIAL:
        if math.isinf(hi):
            x = lo - math.log1p(-u) / a
        else:
            x = lo - math.log1p(u * math.expm1(-a * (hi - lo))) / a
    else:
        cs = a + lo
        if math.isinf(hi):
            x = lo + cs * math.expm1(-math.log1p(-u) / (b - 1.0))
        else:
            m = -math.expm1(-(b - 1.0) * math.log1p((hi - lo) / cs))
            x = lo + cs * math.expm1(-math.log1p(-u * m) / (b - 1.0))
    if x < lo:
        x = lo
    if x > hi:
        x = hi
    return x


@njit(cache=True)
def log_g2(gamma, dx, dy):
    g2 = gamma * gamma
    return -LOG_2PI - math.log(g2) - (dx * dx + dy * dy) / (2.0 * g2)


@njit(cache=True)
def sample_window_many(kind, a, b, lo, hi, u):
    out = np.empty(lo.size)
    for i in range(lo.size):
        out[i] = sample_window(kind, a, b, lo[i], hi[i], u[i])
    return out
