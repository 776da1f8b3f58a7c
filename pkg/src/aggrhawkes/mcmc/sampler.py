"""Latent-variable MCMC for Hawkes parameters given binned counts.

One sweep imputes exact times (and locations), redraws the branching
structure, draws mu, alpha and gamma^2 from their conjugate conditionals,
and updates the temporal kernel by random-walk Metropolis-Hastings.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .. import _jit
from ..aggregate import AggregatedCounts
from ..process import EventPattern, ModelParams
from . import _core
from .config import Priors, SamplerConfig

log = logging.getLogger(__name__)


class ConstraintViolation(RuntimeError):
    pass


@dataclass
class LatentData:
    """Per-event bin bounds of the latent pattern (zero width means observed exactly)."""

    proc: np.ndarray
    tlo: np.ndarray
    thi: np.ndarray
    xlo: np.ndarray
    xhi: np.ndarray
    ylo: np.ndarray
    yhi: np.ndarray
    T: float
    L: int
    window: tuple | None
    source: AggregatedCounts | EventPattern

    @property
    def n(self) -> int:
        return self.proc.size

    @property
    def spatial(self) -> bool:
        return self.window is not None

    @property
    def area(self) -> float:
        if self.window is None:
            return 1.0
        x0, x1, y0, y1 = self.window
        return (x1 - x0) * (y1 - y0)

    @classmethod
    def from_counts(cls, counts: AggregatedCounts) -> "LatentData":
        spec = counts.spec
        proc, tlo, thi, xlo, xhi, ylo, yhi = ([] for _ in range(7))
        for l, c in enumerate(counts.counts):
            te = spec.time_edges(l)
            if spec.spatial:
                ex, ey = spec.space_edges(l)
                it, ix, iy = np.nonzero(c)
                k = c[it, ix, iy]
                it, ix, iy = np.repeat(it, k), np.repeat(ix, k), np.repeat(iy, k)
                xlo.append(ex[ix])
                xhi.append(ex[ix + 1])
                ylo.append(ey[iy])
                yhi.append(ey[iy + 1])
            else:
                it = np.repeat(np.arange(c.size), c)
            proc.append(np.full(it.size, l, dtype=np.int64))
            tlo.append(te[it])
            thi.append(te[it + 1])
        cat = lambda parts: np.concatenate(parts) if parts else np.empty(0)
        proc = cat(proc).astype(np.int64)
        n = proc.size
        zeros = np.zeros(n)
        return cls(proc, cat(tlo), cat(thi),
                   cat(xlo) if spec.spatial else zeros, cat(xhi) if spec.spatial else zeros,
                   cat(ylo) if spec.spatial else zeros, cat(yhi) if spec.spatial else zeros,
                   spec.T, spec.n_processes, spec.window if spec.spatial else None, counts)

    @classmethod
    def from_pattern(cls, pattern: EventPattern) -> "LatentData":
        pattern.validate()
        x = pattern.s[:, 0] if pattern.spatial else np.zeros(pattern.n)
        y = pattern.s[:, 1] if pattern.spatial else np.zeros(pattern.n)
        return cls(pattern.process.copy(), pattern.t.copy(), pattern.t.copy(),
                   x.copy(), x.copy(), y.copy(), y.copy(), pattern.T, pattern.n_processes,
                   pattern.window if pattern.spatial else None, pattern)

    def restrict_to_time(self) -> "LatentData":
        """Same data with locations discarded."""
        z = np.zeros(self.n)
        src = self.source
        return LatentData(self.proc, self.tlo, self.thi, z, z, z, z, self.T, self.L, None, src)


@dataclass
class ChainState:
    """Mutable sampler state; arrays are kept in current time order between sweeps."""

    data: LatentData
    kind: int
    mu: np.ndarray
    alpha: np.ndarray
    kp: np.ndarray
    gamma: np.ndarray
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    proc: np.ndarray
    tlo: np.ndarray
    thi: np.ndarray
    xlo: np.ndarray
    xhi: np.ndarray
    ylo: np.ndarray
    yhi: np.ndarray
    parent: np.ndarray
    sigma: np.ndarray
    stats: dict = field(default_factory=dict)
    rate_prop: np.ndarray = None
    rate_acc: np.ndarray = None
    iteration: int = 0

    def __post_init__(self):
        L = self.mu.size
        if self.rate_prop is None:
            self.rate_prop = np.zeros((L, L, 3), dtype=np.int64)
            self.rate_acc = np.zeros((L, L, 3), dtype=np.int64)
        for k in ("time", "space", "cluster", "generation"):
            self.stats.setdefault(k, np.zeros(3, dtype=np.int64))

    @property
    def spatial(self) -> bool:
        return self.data.spatial

    @property
    def kernel(self) -> str:
        return "exponential" if self.kind == _jit.EXPONENTIAL else "lomax"

    @property
    def T(self) -> float:
        return self.data.T

    def params(self) -> ModelParams:
        return ModelParams(self.mu.copy(), self.alpha.copy(), self.kp.copy(), self.kernel,
                           self.gamma.copy() if self.spatial else None)

    def pattern(self) -> EventPattern:
        d = self.data
        s = np.column_stack([self.x, self.y]) if self.spatial else None
        return EventPattern(self.t.copy(), d.T, self.proc.copy(), s, d.window, d.L)

    def branching(self):
        from ..process import BranchingStructure
        return BranchingStructure(self.parent.copy())

    def resort(self):
        """Restore global time order, remapping parent pointers."""
        order = np.argsort(self.t, kind="stable")
        if np.all(order[1:] > order[:-1]):
            return
        inv = np.empty_like(order)
        inv[order] = np.arange(order.size)
        for name in ("t", "x", "y", "proc", "tlo", "thi", "xlo", "xhi", "ylo", "yhi"):
            setattr(self, name, getattr(self, name)[order])
        par = self.parent[order]
        self.parent = np.where(par >= 0, inv[np.maximum(par, 0)], -1)

    def check(self):
        bad = _core.check_state(self.t, self.x, self.y, self.tlo, self.thi, self.xlo, self.xhi,
                                self.ylo, self.yhi, self.parent, self.spatial)
        if bad >= 0:
            raise ConstraintViolation(
                f"event {bad} (t={self.t[bad]}) broke its bin or parent constraint")

    def csr(self):
        return _core.children_csr(self.parent, self.t.size)


def sample_trunc_gamma(shape: float, rate: float, rng: np.random.Generator,
                       upper: float = 1.0) -> float:
    """Gamma(shape, rate) restricted to (0, upper)."""
    mass = special.gammainc(shape, rate * upper)
    if mass > 1e-12:
        x = special.gammaincinv(shape, rng.random() * mass) / rate
        if 0.0 < x < upper:
            return float(x)
    # all mass piled against the bound: rejection from the tangent envelope of
    # the (log-concave) density at the bound
    slope = (shape - 1.0) / upper - rate
    while True:
        e = rng.exponential(1.0 / slope) if slope > 0 else rng.random() * upper
        x = upper - e
        if x <= 0.0:
            continue
        gap = (shape - 1.0) * math.log(x / upper) - rate * (x - upper) - slope * (x - upper)
        if math.log(rng.random()) < gap:
            return float(x)


def _initial_params(data: LatentData, kernel: str, rng: np.random.Generator):
    """Over-dispersed start scaled to the data (see README: the priors are too vague to draw from)."""
    L, T = data.L, data.T
    n_l = np.bincount(data.proc, minlength=L).astype(float)
    rate = max(data.n, 1) / T
    mu = np.maximum(n_l, 1.0) / T * rng.uniform(0.4, 0.9, L)
    alpha = rng.uniform(0.2, 0.6, (L, L)) / L
    kp = np.zeros((L, L, 2))
    if kernel == "exponential":
        kp[..., 0] = rate * rng.uniform(0.5, 2.0, (L, L))
    else:
        kp[..., 0] = rng.uniform(0.5, 2.0, (L, L)) / rate
        kp[..., 1] = 1.0 + rng.uniform(1.5, 2.5, (L, L))
    if data.spatial:
        gamma = math.sqrt(data.area / max(data.n, 1)) * rng.uniform(0.2, 0.6, (L, L))
    else:
        gamma = np.ones((L, L))
    return mu, alpha, kp, gamma


def init_state(data, priors: Priors, config: SamplerConfig,
               rng: np.random.Generator, init: ModelParams | None = None) -> ChainState:
    """Uniform latent coordinates inside each occupied bin, every event an immigrant."""
    if isinstance(data, (AggregatedCounts, EventPattern)):
        data = latent_data(data, config)
    n = data.n
    width = data.thi - data.tlo
    t = data.tlo + width * rng.random(n)
    t = np.where(t >= data.thi, data.tlo, t)
    if data.spatial:
        x = data.xlo + (data.xhi - data.xlo) * rng.random(n)
        y = data.ylo + (data.yhi - data.ylo) * rng.random(n)
    else:
        x = np.zeros(n)
        y = np.zeros(n)
    if init is not None:
        mu, alpha = init.mu.copy(), init.alpha.copy()
        kp = init.kernel_params.copy()
        gamma = init.gamma.copy() if init.gamma is not None else np.ones((data.L, data.L))
    else:
        mu, alpha, kp, gamma = _initial_params(data, config.kernel, rng)
    L = data.L
    sigma = np.zeros((L, L, 3))
    if config.kernel == "exponential":
        sigma[..., 0] = config.sigma_init or 0.1 * kp[..., 0]
    else:
        sigma[...] = config.sigma_init or 0.1
    state = ChainState(data, _jit.EXPONENTIAL if config.kernel == "exponential" else _jit.LOMAX,
                       mu, alpha, kp, gamma, t, x, y, data.proc.copy(), data.tlo.copy(),
                       data.thi.copy(), data.xlo.copy(), data.xhi.copy(), data.ylo.copy(),
                       data.yhi.copy(), np.full(n, -1, dtype=np.int64), sigma)
    state.resort()
    return state


def latent_data(obs, config: SamplerConfig | None = None) -> LatentData:
    if isinstance(obs, LatentData):
        data = obs
    elif isinstance(obs, AggregatedCounts):
        data = LatentData.from_counts(obs)
    elif isinstance(obs, EventPattern):
        data = LatentData.from_pattern(obs)
    else:
        raise TypeError(f"cannot fit {type(obs).__name__}; pass counts or an event pattern")
    if config is not None and config.spatial is False and data.spatial:
        data = data.restrict_to_time()
    if config is not None and config.spatial and not data.spatial:
        raise ValueError("spatial model requested for temporal data")
    return data


def _generation_blocks(parent):
    n = parent.size
    gen = np.zeros(n, dtype=np.int64)
    # parents precede children in time order, so one forward pass suffices
    for j in range(n):
        p = parent[j]
        if p >= 0:
            gen[j] = gen[p] + 1
    gorder = np.argsort(gen, kind="stable")
    gptr = np.concatenate([[0], np.cumsum(np.bincount(gen, minlength=1))])
    return gorder, gptr


def update_latent(state: ChainState, config: SamplerConfig, rng: np.random.Generator):
    """Impute exact times (strategy-dispatched) then locations, respecting every bin."""
    if state.t.size == 0:
        return state
    cptr, cidx = state.csr()
    args = (state.T, state.kind, state.alpha, state.kp, state.t, state.proc, state.tlo,
            state.thi, state.parent, cptr, cidx)
    if config.strategy == "one":
        _core.sweep_times_single(rng, *args, state.stats["time"])
    elif config.strategy == "generation":
        # arrays are time-sorted here (branching resorts), so parents precede children
        gorder, gptr = _generation_blocks(state.parent)
        _core.sweep_times_generation(rng, *args, gorder, gptr, np.empty(state.t.size),
                                     state.stats["generation"])
    else:
        roots = np.flatnonzero(state.parent < 0)
        _core.sweep_times_cluster(rng, *args, roots, np.empty(state.t.size, dtype=np.int64),
                                  np.empty(state.t.size), state.stats["cluster"])
    if state.spatial:
        _core.sweep_locations(rng, state.x, state.y, state.proc, state.xlo, state.xhi,
                              state.ylo, state.yhi, state.parent, cptr, cidx, state.gamma,
                              state.stats["space"])
    return state


def truncation_lags(state: ChainState, q_trunc: float):
    L = state.mu.size
    cut = np.empty((L, L))
    for m in range(L):
        for l in range(L):
            cut[m, l] = _jit.quantile(state.kind, state.kp[m, l, 0], state.kp[m, l, 1], q_trunc)
    return cut, cut.max(axis=0)


def update_branching(state: ChainState, config: SamplerConfig, rng: np.random.Generator):
    """Parent update: truncated multinomial proposals, with a periodic exact full scan.

    An event whose current parent lies beyond the truncation lag keeps it, so
    each truncated sweep leaves the posterior invariant. The full scan every
    ``config.full_scan_every`` sweeps lets long-lag parents be reached again.
    """
    state.resort()
    n = state.t.size
    if n == 0:
        return state
    if state.iteration % config.full_scan_every == 0:
        L = state.mu.size
        cut, maxcut = np.full((L, L), np.inf), np.full(L, np.inf)
    else:
        cut, maxcut = truncation_lags(state, config.q_trunc)
    _core.sweep_branching(rng, state.t, state.x, state.y, state.proc, state.parent, state.mu,
                          state.alpha, state.kp, state.kind, state.gamma, state.spatial,
                          state.data.area, cut, maxcut, np.empty(n), np.empty(n, dtype=np.int64))
    return state


def conjugate_parameters(state: ChainState, priors: Priors):
    """Shape/rate pairs of the full conditionals of mu, alpha (pre-truncation) and gamma^2."""
    L = state.mu.size
    n_imm, n_off, sum_g, ss = _core.suff_stats(state.T, state.kind, state.kp, state.t, state.x,
                                               state.y, state.proc, state.parent, L,
                                               state.spatial)
    mu = (priors.mu[0] + n_imm, priors.mu[1] + state.T)
    alpha = (priors.alpha[0] + n_off, priors.alpha[1] + sum_g)
    gamma2 = (priors.gamma2[0] + n_off, priors.gamma2[1] + 0.5 * ss)
    return mu, alpha, gamma2


def update_conjugate(state: ChainState, priors: Priors, rng: np.random.Generator):
    (mu_a, mu_b), (al_a, al_b), (g_a, g_b) = conjugate_parameters(state, priors)
    L = state.mu.size
    state.mu = rng.gamma(mu_a, 1.0 / mu_b)
    alpha = np.empty((L, L))
    for m in range(L):
        for l in range(L):
            alpha[m, l] = sample_trunc_gamma(al_a[m, l], al_b[m, l], rng)
    state.alpha = alpha
    if state.spatial:
        # the vague prior's Gamma(a4) draw can underflow to zero without offspring
        state.gamma = np.sqrt(g_b / np.maximum(rng.gamma(g_a, 1.0), np.finfo(float).tiny))
    return state


def update_rate_mh(state: ChainState, priors: Priors, config: SamplerConfig,
                   rng: np.random.Generator):
    L = state.mu.size
    prior = priors.kernel_prior_array(state.kernel, L)
    _core.mh_rates(rng, state.kind, state.kp, state.sigma, prior, state.alpha, state.T,
                   state.t, state.proc, state.parent, state.rate_prop, state.rate_acc)
    return state


def rate_log_accept(state: ChainState, priors: Priors, m: int, l: int, new_a: float,
                    new_b: float | None = None) -> float:
    """log acceptance ratio used by the kernel MH step for proposal (new_a, new_b)."""
    a, b = state.kp[m, l]
    nb = b if new_b is None else new_b
    args = (state.alpha[m, l], state.T, state.t, state.proc, state.parent, m, l)
    d = (_core.pair_rate_loglik(state.kind, new_a, nb, *args)
         - _core.pair_rate_loglik(state.kind, a, b, *args))
    pr = priors.kernel_prior_array(state.kernel, state.mu.size)[m, l]
    if state.kind == _jit.EXPONENTIAL:
        return d + _core.gamma_logpdf(new_a, pr[0], pr[1]) - _core.gamma_logpdf(a, pr[0], pr[1])
    d += _core.gamma_logpdf(new_a, pr[0], pr[1]) - _core.gamma_logpdf(a, pr[0], pr[1])
    d += _core.gamma_logpdf(nb - 1, pr[2], pr[3]) - _core.gamma_logpdf(b - 1, pr[2], pr[3])
    return d + math.log(new_a / a) + math.log((nb - 1) / (b - 1))


def _adapt(state: ChainState, prev_acc: np.ndarray, prev_prop: np.ndarray, k: int, target: float):
    took = state.rate_prop - prev_prop
    hit = (state.rate_acc - prev_acc) / np.maximum(took, 1)
    step = (k + 1) ** -0.6
    state.sigma = np.where(took > 0, state.sigma * np.exp(step * (hit - target)), state.sigma)


def param_values(params: ModelParams) -> dict[str, float]:
    """Named scalars recorded per draw, including Lomax median and mean lag."""
    out = params.flat()
    if params.kernel == "lomax":
        L = params.L
        for m in range(L):
            for l in range(L):
                k = params.temporal_kernel(m, l)
                sfx = "" if L == 1 else f"[{m},{l}]"
                out["median" + sfx] = float(k.median())
                out["mean_lag" + sfx] = float(k.mean())
    return out


def parameter_names(L: int, kernel: str, spatial: bool) -> list[str]:
    dummy = ModelParams(np.ones(L), np.zeros((L, L)), np.full((L, L, 2), 3.0), kernel,
                        np.ones((L, L)) if spatial else None)
    return list(param_values(dummy))


def _row(state: ChainState) -> np.ndarray:
    return np.fromiter(param_values(state.params()).values(), dtype=float)


@dataclass
class PosteriorSamples:
    """Post-burn-in draws: ``draws[c]`` is ``(n_keep, n_params)`` for chain ``c``."""

    names: list[str]
    draws: list[np.ndarray]
    T: float
    window: tuple | None
    n_processes: int
    kernel: str
    spatial: bool
    acceptance: list[dict]
    runtime: list[float]
    snapshots: list[list[tuple[ModelParams, EventPattern]]] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def n_chains(self) -> int:
        return len(self.draws)

    def chains(self, name: str) -> np.ndarray:
        j = self.names.index(name)
        return np.stack([d[:, j] for d in self.draws])

    def pooled(self, name: str) -> np.ndarray:
        return self.chains(name).reshape(-1)

    def all_snapshots(self):
        return [s for chain in self.snapshots for s in chain]

    def merge(self, other: "PosteriorSamples") -> "PosteriorSamples":
        if other.names != self.names:
            raise ValueError("cannot merge samples with different parameters")
        return PosteriorSamples(self.names, self.draws + other.draws, self.T, self.window,
                                self.n_processes, self.kernel, self.spatial,
                                self.acceptance + other.acceptance, self.runtime + other.runtime,
                                self.snapshots + other.snapshots, self.config)


def _acceptance(state: ChainState) -> dict:
    out = {}
    for k, v in state.stats.items():
        if v[0]:
            out[k] = float(v[1] / v[0])
        if v[2]:
            out[k + "_skipped"] = int(v[2])
    L = state.mu.size
    label = "beta" if state.kernel == "exponential" else "c"
    for m in range(L):
        for l in range(L):
            sfx = "" if L == 1 else f"[{m},{l}]"
            pr, ac = state.rate_prop[m, l], state.rate_acc[m, l]
            if pr[0]:
                out[label + sfx] = float(ac[0] / pr[0])
            if state.kernel == "lomax" and pr[1]:
                out["p" + sfx] = float(ac[1] / pr[1])
            if state.kernel == "lomax" and pr[2]:
                out["c,p" + sfx] = float(ac[2] / pr[2])
    return out


def sweep(state: ChainState, priors: Priors, config: SamplerConfig, rng: np.random.Generator):
    update_latent(state, config, rng)
    update_branching(state, config, rng)
    update_conjugate(state, priors, rng)
    update_rate_mh(state, priors, config, rng)
    state.iteration += 1
    return state


def run_chain(obs, priors: Priors | None = None, config: SamplerConfig | None = None,
              rng: np.random.Generator | None = None, init: ModelParams | None = None,
              debug: bool = False) -> PosteriorSamples:
    """Run one chain; records thinned post-burn-in draws and optional latent snapshots."""
    priors = priors or Priors()
    config = config or SamplerConfig()
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    data = latent_data(obs, config)
    start = time.perf_counter()
    state = init_state(data, priors, config, rng, init)
    rows, snaps = [], []
    for k in range(config.n_iter):
        if k == config.burn_in:
            # acceptance rates are reported over the retained draws only
            state.rate_acc[:] = 0
            state.rate_prop[:] = 0
            for v in state.stats.values():
                v[:] = 0
        prev_acc, prev_prop = state.rate_acc.copy(), state.rate_prop.copy()
        sweep(state, priors, config, rng)
        if k < config.burn_in:
            _adapt(state, prev_acc, prev_prop, k, config.target_accept)
        if debug or (k + 1) % config.check_every == 0:
            state.check()
        if k >= config.burn_in and (k - config.burn_in) % config.thin == 0:
            rows.append(_row(state))
            if config.keep_snapshots and \
                    (k - config.burn_in) % (config.thin * config.snapshot_stride) == 0:
                state.resort()
                snaps.append((state.params(), state.pattern()))
    state.check()
    names = parameter_names(data.L, config.kernel, data.spatial)
    draws = np.array(rows).reshape(len(rows), len(names))
    return PosteriorSamples(names, [draws], data.T, data.window, data.L, config.kernel,
                            data.spatial, [_acceptance(state)], [time.perf_counter() - start],
                            [snaps], config.to_dict())


def _chain_job(args):
    obs, priors, config, seed_seq, init = args
    return run_chain(obs, priors, config, np.random.default_rng(seed_seq), init)


def chain_seeds(seed: int, n: int):
    return np.random.SeedSequence(seed).spawn(n)


def sample_posterior(obs, priors: Priors | None = None, config: SamplerConfig | None = None,
                     init: ModelParams | None = None) -> PosteriorSamples:
    """Run ``config.n_chains`` independent chains on streams spawned from ``config.seed``."""
    priors = priors or Priors()
    config = config or SamplerConfig()
    jobs = [(obs, priors, config, s, init) for s in chain_seeds(config.seed, config.n_chains)]
    if config.jobs > 1 and config.n_chains > 1:
        with ProcessPoolExecutor(min(config.jobs, config.n_chains)) as ex:
            results = list(ex.map(_chain_job, jobs))
    else:
        results = [_chain_job(j) for j in jobs]
    out = results[0]
    for r in results[1:]:
        out = out.merge(r)
    return out
