"""Hawkes simulation through the Poisson-cluster (immigrant/offspring) construction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _jit
from .process import IMMIGRANT, BranchingStructure, EventPattern, ModelParams


@dataclass(frozen=True)
class SimulationRequest:
    params: ModelParams
    horizon: tuple[float, float]
    window: tuple | None = None
    seed: int = 0
    history: EventPattern | None = None

    def __post_init__(self):
        t0, t1 = (float(v) for v in self.horizon)
        if not t1 > t0:
            raise ValueError(f"empty horizon {self.horizon}")
        object.__setattr__(self, "horizon", (t0, t1))
        if self.params.spatial and self.window is None:
            raise ValueError("spatial parameters need a window")
        if self.history is not None and self.history.n and self.history.t.max() >= t0:
            raise ValueError("history events must precede the simulation horizon")


@dataclass(frozen=True)
class SimulatedBranching(BranchingStructure):
    """Branching of simulated events; ``history_parent`` indexes the conditioning history."""

    history_parent: np.ndarray | None = None


def _spawn(params, rng, t_par, p_par, s_par, lo, t_end):
    """One generation of children for the given parents.

    ``lo`` is the per-parent lower bound on the child lag (0 for parents
    inside the horizon). Returns child (times, processes, locations, parent rows).
    """
    L = params.L
    kind = params.kind
    rem = t_end - t_par
    out_t, out_p, out_s, out_par = [], [], [], []
    for m in range(L):
        rows = np.flatnonzero(p_par == m)
        if not rows.size:
            continue
        for l in range(L):
            a_ml = params.alpha[m, l]
            if a_ml == 0:
                continue
            k = params.temporal_kernel(m, l)
            mass = k.cdf(rem[rows]) - k.cdf(lo[rows])
            counts = rng.poisson(a_ml * np.maximum(mass, 0.0))
            total = int(counts.sum())
            if not total:
                continue
            par = np.repeat(rows, counts)
            a, b = params.kernel_params[m, l]
            lags = _jit.sample_window_many(kind, a, b, lo[par], rem[par], rng.random(total))
            out_t.append(t_par[par] + lags)
            out_p.append(np.full(total, l, dtype=np.int64))
            out_par.append(par)
            if s_par is not None:
                out_s.append(s_par[par] + rng.normal(0.0, params.gamma[m, l], size=(total, 2)))
    if not out_t:
        return (np.empty(0), np.empty(0, dtype=np.int64),
                None if s_par is None else np.empty((0, 2)), np.empty(0, dtype=np.int64))
    return (np.concatenate(out_t), np.concatenate(out_p),
            None if s_par is None else np.concatenate(out_s), np.concatenate(out_par))


def _simulate(params: ModelParams, t0: float, t1: float, window, rng: np.random.Generator,
              history: EventPattern | None = None):
    spatial = params.spatial
    L = params.L
    # generation 0: immigrants, then residual offspring of the history
    ts, ps, ss = [], [], []
    for l in range(L):
        k = rng.poisson(params.mu[l] * (t1 - t0))
        ts.append(t0 + (t1 - t0) * rng.random(k))
        ps.append(np.full(k, l, dtype=np.int64))
        if spatial:
            x0, x1, y0, y1 = window
            u = rng.random((k, 2))
            ss.append(np.column_stack([x0 + (x1 - x0) * u[:, 0], y0 + (y1 - y0) * u[:, 1]]))
    t_all = [np.concatenate(ts)]
    p_all = [np.concatenate(ps)]
    s_all = [np.concatenate(ss).reshape(-1, 2)] if spatial else None
    par_all = [np.full(t_all[0].size, IMMIGRANT, dtype=np.int64)]
    hpar_all = [np.full(t_all[0].size, IMMIGRANT, dtype=np.int64)]

    if history is not None and history.n:
        hs = history.s if spatial else None
        if spatial and hs is None:
            raise ValueError("spatial simulation needs a spatial history")
        ct, cp, cs, crow = _spawn(params, rng, history.t, history.process, hs,
                                  t0 - history.t, t1)
        t_all.append(ct)
        p_all.append(cp)
        if spatial:
            s_all.append(cs)
        par_all.append(np.full(ct.size, IMMIGRANT, dtype=np.int64))
        hpar_all.append(crow)

    offset = 0
    gen_t, gen_p = np.concatenate(t_all), np.concatenate(p_all)
    gen_s = np.concatenate(s_all) if spatial else None
    t_all, p_all = [gen_t], [gen_p]
    s_all = [gen_s] if spatial else None
    par_all = [np.concatenate(par_all)]
    hpar_all = [np.concatenate(hpar_all)]
    # breadth-first over generations until extinction
    while gen_t.size:
        ct, cp, cs, crow = _spawn(params, rng, gen_t, gen_p, gen_s, np.zeros(gen_t.size), t1)
        par_all.append(crow + offset)
        hpar_all.append(np.full(ct.size, IMMIGRANT, dtype=np.int64))
        offset += gen_t.size
        gen_t, gen_p, gen_s = ct, cp, cs
        t_all.append(ct)
        p_all.append(cp)
        if spatial:
            s_all.append(cs)

    t = np.concatenate(t_all)
    p = np.concatenate(p_all)
    s = np.concatenate(s_all) if spatial else None
    par = np.concatenate(par_all)
    hpar = np.concatenate(hpar_all)
    order = np.argsort(t, kind="stable")
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    par = par[order]
    par = np.where(par >= 0, inv[np.maximum(par, 0)], IMMIGRANT)
    pattern = EventPattern(t[order], t1, p[order], None if s is None else s[order],
                           window if spatial else None, L)
    return pattern, SimulatedBranching(par, history_parent=hpar[order])


def simulate(request: SimulationRequest) -> tuple[EventPattern, SimulatedBranching]:
    """Simulate on ``request.horizon``; offspring outside the window are kept."""
    rng = np.random.default_rng(request.seed)
    t0, t1 = request.horizon
    return _simulate(request.params, t0, t1, request.window, rng, request.history)


def simulate_hawkes(params: ModelParams, T: float, window=None, seed=0):
    """Shorthand for a fresh simulation on ``[0, T)``."""
    return simulate(SimulationRequest(params, (0.0, T), window, seed))


def simulate_forward(params: ModelParams, history: EventPattern, horizon: float,
                     rng: np.random.Generator) -> EventPattern:
    """Forecast events on ``(T, T + horizon]`` given the complete history on ``[0, T)``."""
    T = history.T
    if horizon <= 0:
        return EventPattern(np.empty(0), T, np.empty(0, dtype=np.int64),
                            np.empty((0, 2)) if params.spatial else None,
                            history.window if params.spatial else None, history.n_processes)
    pattern, _ = _simulate(params, T, T + horizon, history.window, rng, history)
    return pattern
