"""Point patterns, branching structures, parameters, and exact-data likelihoods.

Everything here is plain numpy and deliberately unoptimised: the MCMC module
has its own compiled paths, and these functions act as the reference they are
tested against.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import EXPONENTIAL, LOMAX, Exponential, Gaussian2D, Lomax

IMMIGRANT = -1


class BranchingError(ValueError):
    pass


def _as_window(window):
    if window is None:
        return None
    x0, x1, y0, y1 = (float(v) for v in window)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate window {window}")
    return (x0, x1, y0, y1)


def window_area(window) -> float:
    if window is None:
        return 1.0
    x0, x1, y0, y1 = window
    return (x1 - x0) * (y1 - y0)


@dataclass(frozen=True)
class EventPattern:
    """Exact events on ``[0, T)`` (and optionally a rectangle ``W``).

    Events are stored in global time order. ``process`` holds 0-based
    process labels; ``s`` is ``(n, 2)`` or ``None`` for temporal data.
    ``window`` is ``(x0, x1, y0, y1)``.
    """

    t: np.ndarray
    T: float
    process: np.ndarray = None
    s: np.ndarray | None = None
    window: tuple | None = None
    n_processes: int = 1
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1)
        n = t.size
        proc = (np.zeros(n, dtype=np.int64) if self.process is None
                else np.asarray(self.process, dtype=np.int64).reshape(-1))
        if proc.size != n:
            raise ValueError("process labels and times differ in length")
        L = int(self.n_processes)
        if n and (proc.min() < 0 or proc.max() >= L):
            raise ValueError(f"process labels must lie in 0..{L - 1}")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        s = self.s
        if s is not None:
            s = np.asarray(s, dtype=float).reshape(n, 2)
        window = _as_window(self.window)
        if s is not None and window is None:
            raise ValueError("spatial events need a window")
        order = np.argsort(t, kind="stable")
        if np.any(order != np.arange(n)):
            t, proc = t[order], proc[order]
            if s is not None:
                s = s[order]
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "process", proc)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "window", window)
        object.__setattr__(self, "T", float(self.T))

    @property
    def n(self) -> int:
        return self.t.size

    def __len__(self):
        return self.t.size

    @property
    def spatial(self) -> bool:
        return self.s is not None

    @property
    def area(self) -> float:
        return window_area(self.window)

    def counts_by_process(self) -> np.ndarray:
        return np.bincount(self.process, minlength=self.n_processes)

    def subset(self, mask) -> "EventPattern":
        mask = np.asarray(mask)
        return EventPattern(self.t[mask], self.T, self.process[mask],
                            None if self.s is None else self.s[mask],
                            self.window, self.n_processes, dict(self.metadata))

    def drop_space(self) -> "EventPattern":
        return EventPattern(self.t, self.T, self.process, None, None,
                            self.n_processes, dict(self.metadata))

    def validate(self):
        """Range checks; raises ValueError naming the first bad event."""
        bad = np.flatnonzero((self.t < 0) | (self.t >= self.T))
        if bad.size:
            raise ValueError(f"event {bad[0]} at t={self.t[bad[0]]} outside [0, {self.T})")
        for l in range(self.n_processes):
            tl = self.t[self.process == l]
            if np.any(np.diff(tl) <= 0):
                raise ValueError(f"tied times within process {l}; jitter before use")
        if self.s is not None:
            x0, x1, y0, y1 = self.window
            x, y = self.s[:, 0], self.s[:, 1]
            bad = np.flatnonzero((x < x0) | (x >= x1) | (y < y0) | (y >= y1))
            if bad.size:
                raise ValueError(f"event {bad[0]} at s={self.s[bad[0]]} outside window")
        return self


@dataclass(frozen=True)
class BranchingStructure:
    """Parent pointers into the pattern's global event order (-1 for immigrants)."""

    parent: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "parent", np.asarray(self.parent, dtype=np.int64).reshape(-1))

    @classmethod
    def all_immigrants(cls, n: int) -> "BranchingStructure":
        return cls(np.full(n, IMMIGRANT, dtype=np.int64))

    @property
    def immigrants(self) -> np.ndarray:
        return np.flatnonzero(self.parent == IMMIGRANT)

    def offspring(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.parent == i)

    def generations(self) -> np.ndarray:
        gen = np.zeros(self.parent.size, dtype=np.int64)
        for j, p in enumerate(self.parent):
            if p >= 0:
                gen[j] = gen[p] + 1
        return gen

    def check(self, pattern: EventPattern):
        if self.parent.size != pattern.n:
            raise BranchingError("branching length differs from pattern size")
        kids = np.flatnonzero(self.parent >= 0)
        if kids.size:
            par = self.parent[kids]
            if np.any(par >= pattern.n):
                raise BranchingError("parent index out of range")
            late = kids[pattern.t[par] >= pattern.t[kids]]
            if late.size:
                j = late[0]
                raise BranchingError(
                    f"event {j} (t={pattern.t[j]}) has parent {self.parent[j]} "
                    f"at t={pattern.t[self.parent[j]]}, not earlier")
        return self


def _matrix(x, L, name):
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = np.full((L, L), float(a))
    if a.shape != (L, L):
        raise ValueError(f"{name} must be {L}x{L}")
    return a


@dataclass(frozen=True)
class ModelParams:
    """Hawkes parameters for ``L`` processes.

    ``alpha[m, l]`` is the mean number of direct process-``l`` children per
    process-``m`` event. ``kernel_params[m, l]`` holds ``(beta, 0)`` for the
    exponential kernel or ``(c, p)`` for Lomax. ``gamma`` is ``None`` for a
    purely temporal model.
    """

    mu: np.ndarray
    alpha: np.ndarray
    kernel_params: np.ndarray
    kernel: str = "exponential"
    gamma: np.ndarray | None = None

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        L = mu.size
        alpha = _matrix(self.alpha, L, "alpha")
        kp = np.asarray(self.kernel_params, dtype=float)
        if kp.shape == (2,):
            kp = np.broadcast_to(kp, (L, L, 2)).copy()
        if kp.shape != (L, L, 2):
            raise ValueError(f"kernel_params must be {L}x{L}x2")
        kernel = self.kernel.lower()
        if kernel in ("exp", "exponential"):
            kernel = "exponential"
            if np.any(kp[..., 0] <= 0):
                raise ValueError("beta must be positive")
        elif kernel == "lomax":
            if np.any(kp[..., 0] <= 0) or np.any(kp[..., 1] <= 1):
                raise ValueError("Lomax needs c > 0 and p > 1")
        else:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if np.any(mu < 0):
            raise ValueError("mu must be non-negative")
        if np.any(alpha < 0) or np.any(alpha >= 1):
            raise ValueError("alpha entries must lie in [0, 1)")
        gamma = None if self.gamma is None else _matrix(self.gamma, L, "gamma")
        if gamma is not None and np.any(gamma <= 0):
            raise ValueError("gamma must be positive")
        for name, v in (("mu", mu), ("alpha", alpha), ("kernel_params", kp), ("gamma", gamma)):
            object.__setattr__(self, name, v)
        object.__setattr__(self, "kernel", kernel)
        if L > 1:
            rho = np.max(np.abs(np.linalg.eigvals(alpha)))
            if rho >= 1:
                warnings.warn(f"branching matrix spectral radius {rho:.3f} >= 1; "
                              "process is explosive", RuntimeWarning, stacklevel=3)

    @classmethod
    def exponential(cls, mu, alpha, beta, gamma=None) -> "ModelParams":
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        L = mu.size
        beta = _matrix(beta, L, "beta")
        kp = np.stack([beta, np.zeros_like(beta)], axis=-1)
        return cls(mu, alpha, kp, "exponential", gamma)

    @classmethod
    def lomax(cls, mu, alpha, c, p, gamma=None) -> "ModelParams":
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        L = mu.size
        kp = np.stack([_matrix(c, L, "c"), _matrix(p, L, "p")], axis=-1)
        return cls(mu, alpha, kp, "lomax", gamma)

    @property
    def L(self) -> int:
        return self.mu.size

    @property
    def kind(self) -> int:
        return EXPONENTIAL if self.kernel == "exponential" else LOMAX

    @property
    def spatial(self) -> bool:
        return self.gamma is not None

    @property
    def beta(self) -> np.ndarray:
        if self.kernel != "exponential":
            raise AttributeError("beta is only defined for the exponential kernel")
        return self.kernel_params[..., 0]

    def temporal_kernel(self, m: int, l: int):
        a, b = self.kernel_params[m, l]
        return Exponential(a) if self.kernel == "exponential" else Lomax(a, b)

    def spatial_kernel(self, m: int, l: int) -> Gaussian2D:
        if self.gamma is None:
            raise AttributeError("temporal model has no spatial kernel")
        return Gaussian2D(self.gamma[m, l])

    def without_space(self) -> "ModelParams":
        return ModelParams(self.mu, self.alpha, self.kernel_params, self.kernel, None)

    def expected_counts(self, T: float) -> np.ndarray:
        """Mean events per process on a horizon long enough to ignore edge loss."""
        L = self.L
        return np.linalg.solve(np.eye(L) - self.alpha.T, self.mu * T)

    def flat(self) -> dict[str, float]:
        """Named scalar view used for posterior tables."""
        out = {}
        L = self.L
        idx = (lambda *k: "") if L == 1 else (lambda *k: "[" + ",".join(str(i) for i in k) + "]")
        for l in range(L):
            out["mu" + idx(l)] = float(self.mu[l])
        for m in range(L):
            for l in range(L):
                out["alpha" + idx(m, l)] = float(self.alpha[m, l])
                if self.kernel == "exponential":
                    out["beta" + idx(m, l)] = float(self.kernel_params[m, l, 0])
                else:
                    out["c" + idx(m, l)] = float(self.kernel_params[m, l, 0])
                    out["p" + idx(m, l)] = float(self.kernel_params[m, l, 1])
                if self.gamma is not None:
                    out["gamma" + idx(m, l)] = float(self.gamma[m, l])
        return out


def _check_compatible(pattern: EventPattern, params: ModelParams):
    if pattern.n_processes != params.L:
        raise ValueError(f"pattern has {pattern.n_processes} processes, params {params.L}")
    if params.spatial and not pattern.spatial:
        raise ValueError("spatial parameters need a spatial pattern")


def _background_log(pattern: EventPattern, params: ModelParams, idx) -> np.ndarray:
    mu = params.mu[pattern.process[idx]]
    with np.errstate(divide="ignore"):
        out = np.log(mu)
    if params.spatial:
        x0, x1, y0, y1 = pattern.window
        s = pattern.s[idx]
        inside = (s[:, 0] >= x0) & (s[:, 0] < x1) & (s[:, 1] >= y0) & (s[:, 1] < y1)
        out = np.where(inside, out - math.log(pattern.area), -np.inf)
    return out


def _pair_log_excitation(pattern, params, parents, children) -> np.ndarray:
    """log(alpha g1 g2) for each (parent, child) index pair."""
    out = np.empty(len(children))
    pm = pattern.process[parents]
    cl = pattern.process[children]
    for m in range(params.L):
        for l in range(params.L):
            sel = (pm == m) & (cl == l)
            if not np.any(sel):
                continue
            lag = pattern.t[children[sel]] - pattern.t[parents[sel]]
            with np.errstate(divide="ignore"):
                v = np.log(params.alpha[m, l]) + params.temporal_kernel(m, l).log_density(lag)
            if params.spatial:
                off = pattern.s[children[sel]] - pattern.s[parents[sel]]
                v = v + params.spatial_kernel(m, l).log_density(off)
            out[sel] = v
    return out


def compensator_terms(pattern: EventPattern, params: ModelParams) -> np.ndarray:
    """Per-event expected offspring inside the horizon, sum_l alpha G(T - t_i)."""
    out = np.zeros(pattern.n)
    rem = pattern.T - pattern.t
    for m in range(params.L):
        sel = pattern.process == m
        for l in range(params.L):
            out[sel] += params.alpha[m, l] * params.temporal_kernel(m, l).cdf(rem[sel])
    return out


def joint_loglik(pattern: EventPattern, branching: BranchingStructure,
                 params: ModelParams) -> float:
    """log p(x, Y | theta) under the large-window approximation for spatial data."""
    _check_compatible(pattern, params)
    branching.check(pattern)
    T = pattern.T
    ll = -float(np.sum(params.mu)) * T
    imm = branching.immigrants
    ll += float(np.sum(_background_log(pattern, params, imm)))
    ll -= float(np.sum(compensator_terms(pattern, params)))
    kids = np.flatnonzero(branching.parent >= 0)
    if kids.size:
        ll += float(np.sum(_pair_log_excitation(pattern, params, branching.parent[kids], kids)))
    return ll


def conditional_intensity(params: ModelParams, pattern: EventPattern, process: int, t: float,
                          s=None) -> float:
    """lambda*_l(t, s) given the events of ``pattern`` strictly before ``t``."""
    _check_compatible(pattern, params)
    if not (0 <= t < pattern.T):
        raise ValueError(f"t={t} outside [0, {pattern.T})")
    l = int(process)
    base = params.mu[l]
    if params.spatial:
        if s is None:
            raise ValueError("spatial model needs a location")
        s = np.asarray(s, dtype=float)
        x0, x1, y0, y1 = pattern.window
        inside = x0 <= s[0] < x1 and y0 <= s[1] < y1
        base = base / pattern.area if inside else 0.0
    hist = np.flatnonzero(pattern.t < t)
    total = float(base)
    for m in range(params.L):
        h = hist[pattern.process[hist] == m]
        if not h.size:
            continue
        v = params.alpha[m, l] * params.temporal_kernel(m, l).density(t - pattern.t[h])
        if params.spatial:
            v = v * params.spatial_kernel(m, l).density(s - pattern.s[h])
        total += float(np.sum(v))
    return total


def marginal_loglik_classic(pattern: EventPattern, params: ModelParams) -> float:
    """Branching-free log-likelihood: sum log lambda*(x_i) minus the compensator."""
    _check_compatible(pattern, params)
    ll = -float(np.sum(params.mu)) * pattern.T - float(np.sum(compensator_terms(pattern, params)))
    for i in range(pattern.n):
        s = None if pattern.s is None else pattern.s[i]
        # history strictly before t_i: restrict to earlier indices
        sub = pattern.subset(np.arange(pattern.n) < i)
        lam = conditional_intensity(params, sub, pattern.process[i], pattern.t[i], s)
        if lam <= 0:
            return -math.inf
        ll += math.log(lam)
    return ll
