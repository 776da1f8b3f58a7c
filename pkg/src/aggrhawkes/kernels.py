"""Excitation kernels: exponential and Lomax lag densities, isotropic Gaussian offsets."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EXPONENTIAL = 0
LOMAX = 1


class KernelDomainError(ValueError):
    pass


def _check_lag(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise KernelDomainError("kernel lag must be non-negative")
    return t


@dataclass(frozen=True)
class Exponential:
    """g(t) = beta * exp(-beta t)."""

    beta: float

    kind = EXPONENTIAL

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    @property
    def params(self) -> tuple[float, float]:
        return (float(self.beta), 0.0)

    def log_density(self, t):
        t = _check_lag(t)
        return math.log(self.beta) - self.beta * t

    def density(self, t):
        return np.exp(self.log_density(t))

    def cdf(self, t):
        t = _check_lag(t)
        return -np.expm1(-self.beta * t)

    def log_survival(self, t):
        return -self.beta * _check_lag(t)

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        return -np.log1p(-q) / self.beta

    def mean(self) -> float:
        return 1.0 / self.beta

    def median(self) -> float:
        return math.log(2.0) / self.beta

    def _excess_cdf(self, lo, width):
        return -math.expm1(-self.beta * width)

    def _sample_tail(self, lo, width, u):
        # memoryless: lag beyond lo is a fresh exponential truncated to width
        if math.isinf(width):
            return lo - np.log1p(-u) / self.beta
        return lo - np.log1p(-u * -np.expm1(-self.beta * width)) / self.beta


@dataclass(frozen=True)
class Lomax:
    """g(t) = (p-1) c^(p-1) / (t+c)^p with scale c and shape p > 1."""

    c: float
    p: float

    kind = LOMAX

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")

    @property
    def params(self) -> tuple[float, float]:
        return (float(self.c), float(self.p))

    def log_density(self, t):
        t = _check_lag(t)
        c, p = self.c, self.p
        return math.log(p - 1.0) + (p - 1.0) * math.log(c) - p * np.log(t + c)

    def density(self, t):
        return np.exp(self.log_density(t))

    def log_survival(self, t):
        t = _check_lag(t)
        return -(self.p - 1.0) * np.log1p(t / self.c)

    def cdf(self, t):
        return -np.expm1(self.log_survival(t))

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        return self.c * np.expm1(-np.log1p(-q) / (self.p - 1.0))

    def mean(self) -> float:
        return self.c / (self.p - 2.0) if self.p > 2 else math.inf

    def median(self) -> float:
        return float(self.quantile(0.5))

    def _excess_cdf(self, lo, width):
        return float(Lomax(self.c + lo, self.p).cdf(width))

    def _sample_tail(self, lo, width, u):
        # conditioned on exceeding lo, the excess is Lomax with scale c + lo
        shifted = Lomax(self.c + lo, self.p)
        if math.isinf(width):
            return lo + shifted.quantile(u)
        return lo + shifted.quantile(u * shifted.cdf(width))


TemporalKernel = Exponential | Lomax


@dataclass(frozen=True)
class Gaussian2D:
    """Isotropic bivariate normal offset density with per-axis std ``gamma``."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def log_density(self, offset):
        offset = np.asarray(offset, dtype=float)
        r2 = np.sum(offset**2, axis=-1)
        g2 = self.gamma**2
        return -math.log(2.0 * math.pi * g2) - r2 / (2.0 * g2)

    def density(self, offset):
        return np.exp(self.log_density(offset))

    def sample(self, rng: np.random.Generator, size=None):
        shape = (2,) if size is None else (size, 2)
        return rng.normal(0.0, self.gamma, size=shape)


SpatialKernel = Gaussian2D


def make_temporal(kind: str, *params: float) -> TemporalKernel:
    kind = kind.lower()
    if kind in ("exp", "exponential"):
        return Exponential(*params)
    if kind == "lomax":
        return Lomax(*params)
    raise ValueError(f"unknown temporal kernel {kind!r}")


def temporal_density(kernel: TemporalKernel, t):
    return kernel.density(t)


def temporal_cdf(kernel: TemporalKernel, t):
    return kernel.cdf(t)


def sample_temporal_truncated(kernel: TemporalKernel, interval, rng: np.random.Generator,
                              size=None):
    """Draw lags from ``kernel`` restricted to ``interval = (lo, hi)``.

    Inverse-CDF on the conditional tail beyond ``lo``, so draws stay exact
    even when ``lo`` sits far in the tail. ``hi`` may be ``inf``.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if lo < 0 or not hi > lo:
        raise KernelDomainError(f"invalid truncation interval ({lo}, {hi})")
    width = hi - lo
    if not math.isinf(width) and kernel._excess_cdf(lo, width) <= 0.0:
        raise KernelDomainError(f"interval ({lo}, {hi}) carries no kernel mass")
    u = rng.random(size)
    out = kernel._sample_tail(lo, width, u)
    return np.clip(out, lo, hi) if size is not None else float(min(max(out, lo), hi))


def spatial_density(kernel: Gaussian2D, offset):
    return kernel.density(offset)


def sample_spatial(kernel: Gaussian2D, rng: np.random.Generator, size=None):
    return kernel.sample(rng, size)
