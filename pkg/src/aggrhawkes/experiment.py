"""Simulation studies: simulate, aggregate, fit and summarize over replicates."""
from __future__ import annotations

import logging
import platform
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aggregate import BinSpec, aggregate
from .diagnostics import summarize
from .mcmc.config import Priors, SamplerConfig
from .mcmc.sampler import param_values, sample_posterior
from .process import EventPattern, ModelParams
from .simulate import simulate_hawkes

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Grid:
    """One aggregation level; ``dt == 0`` fits the exact pattern.

    ``spatial`` chooses a spatio-temporal or temporal-only fit (default: spatial
    whenever the simulation is).
    """

    dt: float
    ds: float | None = None
    spatial: bool | None = None

    @property
    def label(self) -> str:
        out = f"dt={self.dt:g}"
        if self.ds is not None:
            out += f",ds={self.ds:g}"
        if self.spatial is False:
            out += ",temporal"
        return out


@dataclass(frozen=True)
class ParameterSet:
    name: str
    params: ModelParams

    def to_dict(self) -> dict:
        p = self.params
        d = {"name": self.name, "kernel": p.kernel, "mu": p.mu.tolist(), "alpha": p.alpha.tolist()}
        if p.kernel == "exponential":
            d["beta"] = p.kernel_params[..., 0].tolist()
        else:
            d["c"] = p.kernel_params[..., 0].tolist()
            d["p"] = p.kernel_params[..., 1].tolist()
        if p.gamma is not None:
            d["gamma"] = p.gamma.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ParameterSet":
        unknown = set(d) - {"name", "kernel", "mu", "alpha", "beta", "c", "p", "gamma"}
        if unknown:
            raise ValueError(f"unknown parameter-set keys {sorted(unknown)}")
        kernel = d.get("kernel", "exponential")
        mu = np.atleast_1d(np.asarray(d["mu"], dtype=float))
        L = mu.size
        shape = lambda v: np.asarray(v, dtype=float).reshape(L, L)
        gamma = shape(d["gamma"]) if d.get("gamma") is not None else None
        if kernel == "exponential":
            params = ModelParams.exponential(mu, shape(d["alpha"]), shape(d["beta"]), gamma)
        elif kernel == "lomax":
            params = ModelParams.lomax(mu, shape(d["alpha"]), shape(d["c"]), shape(d["p"]), gamma)
        else:
            raise ValueError(f"unknown kernel {kernel!r}")
        return cls(d.get("name", "set"), params)


@dataclass(frozen=True)
class ExperimentConfig:
    parameter_sets: tuple[ParameterSet, ...]
    T: float
    grids: tuple[Grid, ...]
    replicates: int = 1
    window: tuple | None = None
    units: str = "absolute"
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    priors: Priors = field(default_factory=Priors)
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicate count must be at least 1")
        if self.units not in ("absolute", "kernel"):
            raise ValueError("units must be 'absolute' or 'kernel'")
        if not self.parameter_sets or not self.grids:
            raise ValueError("need at least one parameter set and one grid")
        for ps in self.parameter_sets:
            if ps.params.spatial and self.window is None:
                raise ValueError(f"parameter set {ps.name} is spatial but no window is given")
        for g in self.grids:
            if g.ds is not None and g.spatial is False:
                raise ValueError(f"grid {g.label}: spatial cells with a temporal-only fit")

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "parameter_sets": [p.to_dict() for p in self.parameter_sets],
            "T": self.T,
            "window": list(self.window) if self.window else None,
            "grids": [{"dt": g.dt, "ds": g.ds, "spatial": g.spatial} for g in self.grids],
            "replicates": self.replicates,
            "units": self.units,
            "sampler": self.sampler.to_dict(),
            "priors": self.priors.to_dict(),
            "seed": self.seed,
            "jobs": self.jobs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"schema_version", "parameter_sets", "T", "window", "grids", "replicates",
                 "units", "sampler", "priors", "seed", "jobs"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown experiment keys {sorted(unknown)}")
        if d.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {d['schema_version']}")
        grids = []
        for g in d["grids"]:
            bad = set(g) - {"dt", "ds", "spatial"}
            if bad:
                raise ValueError(f"unknown grid keys {sorted(bad)}")
            grids.append(Grid(float(g["dt"]), g.get("ds"), g.get("spatial")))
        return cls(
            tuple(ParameterSet.from_dict(p) for p in d["parameter_sets"]),
            float(d["T"]), tuple(grids), int(d.get("replicates", 1)),
            tuple(d["window"]) if d.get("window") else None, d.get("units", "absolute"),
            SamplerConfig.from_dict(d.get("sampler", {})), Priors.from_dict(d.get("priors", {})),
            int(d.get("seed", 0)), int(d.get("jobs", 1)))


def _scaled(grid: Grid, params: ModelParams, units: str) -> tuple[float, float | None]:
    if units == "absolute":
        return grid.dt, grid.ds
    time_scale = params.temporal_kernel(0, 0).mean()
    space_scale = params.gamma[0, 0] if params.gamma is not None else 1.0
    return grid.dt * time_scale, None if grid.ds is None else grid.ds * space_scale


def observe(pattern: EventPattern, grid: Grid, params: ModelParams, units: str = "absolute"):
    """Fit input for one grid: the exact pattern when ``dt == 0``, else binned counts."""
    spatial = pattern.spatial if grid.spatial is None else grid.spatial
    pat = pattern if spatial else pattern.drop_space()
    dt, ds = _scaled(grid, params, units)
    if spatial and ds is None and dt > 0:
        raise ValueError(f"grid {grid.label}: a spatial fit on binned data needs ds")
    if dt == 0:
        return pat
    spec = BinSpec.uniform(dt, pat.T, ds if spatial else None,
                           pat.window if spatial else None, pat.n_processes)
    return aggregate(pat, spec)


def replicate_seeds(seed: int, n_sets: int, replicates: int):
    """Named streams: one SeedSequence per (parameter set, replicate)."""
    root = np.random.SeedSequence(seed)
    return [s.spawn(replicates) for s in root.spawn(n_sets)]


def _unit(args):
    cfg, set_idx, rep, seq = args
    ps = cfg.parameter_sets[set_idx]
    sim_seed, fit_seed = (int(s.generate_state(1)[0]) for s in seq.spawn(2))
    rows, failures = [], []
    try:
        pattern, _ = simulate_hawkes(ps.params, cfg.T, cfg.window if ps.params.spatial else None,
                                     seed=sim_seed)
    except Exception as e:  # recorded, never silently dropped
        return rows, [{"set": ps.name, "replicate": rep, "grid": None, "error": repr(e)}]
    n_dropped = 0
    if pattern.spatial:
        # offspring may land outside the window; binned data can only hold events inside it
        x0, x1, y0, y1 = cfg.window
        x, y = pattern.s[:, 0], pattern.s[:, 1]
        keep = (x >= x0) & (x < x1) & (y >= y0) & (y < y1)
        n_dropped = int((~keep).sum())
        pattern = pattern.subset(keep)
    truth = param_values(ps.params)
    for g in cfg.grids:
        try:
            spatial_fit = pattern.spatial if g.spatial is None else g.spatial
            obs = observe(pattern, g, ps.params, cfg.units)
            sc = SamplerConfig.from_dict({**cfg.sampler.to_dict(), "seed": fit_seed,
                                          "kernel": ps.params.kernel, "spatial": spatial_fit,
                                          "jobs": 1})
            start = time.perf_counter()
            samples = sample_posterior(obs, cfg.priors, sc)
            runtime = time.perf_counter() - start
            summ = summarize(samples)
        except Exception as e:
            log.warning("replicate %d grid %s failed: %s", rep, g.label, e)
            failures.append({"set": ps.name, "replicate": rep, "grid": g.label, "error": repr(e),
                             "traceback": traceback.format_exc()})
            continue
        for name, s in summ.items():
            tv = truth.get(name, float("nan"))
            rows.append({
                "set": ps.name, "grid": g.label, "replicate": rep, "param": name, "truth": tv,
                "mean": s["mean"], "sd": s["sd"], "q2.5": s["q2.5"], "q50": s["q50"],
                "q97.5": s["q97.5"], "ci_length": s["ci_length"],
                "covered": int(s["q2.5"] <= tv <= s["q97.5"]) if np.isfinite(tv) else "",
                "rhat": s["rhat"], "ess": s["ess"], "runtime": runtime, "n_events": pattern.n,
                "n_dropped": n_dropped, "sim_seed": sim_seed, "fit_seed": fit_seed,
                "acceptance": samples.acceptance,
            })
    return rows, failures


FIT_COLUMNS = ["set", "grid", "replicate", "param", "truth", "mean", "sd", "q2.5", "q50",
               "q97.5", "ci_length", "covered", "rhat", "ess", "runtime", "n_events",
               "n_dropped", "sim_seed", "fit_seed"]
TABLE_COLUMNS = ["set", "grid", "param", "truth", "estimate", "ci_length", "coverage", "bias",
                 "rhat", "ess_per_second", "runtime", "n_fits"]


def table(rows: list[dict]) -> list[dict]:
    """Per (set, grid, param): average estimate, CI length, coverage, bias."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["set"], r["grid"], r["param"]), []).append(r)
    out = []
    for (s, g, p), rs in groups.items():
        truth = rs[0]["truth"]
        est = float(np.mean([r["mean"] for r in rs]))
        cov = [r["covered"] for r in rs if r["covered"] != ""]
        rh = [r["rhat"] for r in rs if r["rhat"] is not None]
        out.append({
            "set": s, "grid": g, "param": p, "truth": truth, "estimate": est,
            "ci_length": float(np.mean([r["ci_length"] for r in rs])),
            "coverage": float(np.mean(cov)) if cov else float("nan"),
            "bias": est - truth,
            "rhat": float(np.mean(rh)) if rh else float("nan"),
            "ess_per_second": float(np.mean([r["ess"] / r["runtime"] for r in rs])),
            "runtime": float(np.mean([r["runtime"] for r in rs])),
            "n_fits": len(rs),
        })
    return out


@dataclass
class ExperimentReport:
    rows: list[dict]
    table: list[dict]
    failures: list[dict]
    manifest: dict

    def lookup(self, grid: str, param: str, set_name: str | None = None) -> dict:
        for r in self.table:
            if r["grid"] == grid and r["param"] == param and (set_name in (None, r["set"])):
                return r
        raise KeyError((grid, param))

    def write(self, out_dir):
        from .io import write_json, write_rows
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_rows(self.rows, out / "fits.csv", FIT_COLUMNS)
        write_rows(self.table, out / "table.csv", TABLE_COLUMNS)
        write_json(self.manifest, out / "manifest.json")


def _versions() -> dict:
    import numba
    import scipy

    from . import __version__
    return {"aggrhawkes": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    seeds = replicate_seeds(cfg.seed, len(cfg.parameter_sets), cfg.replicates)
    units = [(cfg, i, r, seeds[i][r]) for i in range(len(cfg.parameter_sets))
             for r in range(cfg.replicates)]
    start = time.perf_counter()
    if cfg.jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(cfg.jobs) as ex:
            results = list(ex.map(_unit, units))
    else:
        results = []
        for u in units:
            results.append(_unit(u))
            log.info("set %s replicate %d done", cfg.parameter_sets[u[1]].name, u[2])
    rows = [r for res in results for r in res[0]]
    failures = [f for res in results for f in res[1]]
    manifest = {
        "config": cfg.to_dict(),
        "versions": _versions(),
        "seeds": sorted({(r["set"], r["replicate"], r["sim_seed"], r["fit_seed"]) for r in rows}),
        "failures": failures,
        "n_fits": len({(r["set"], r["grid"], r["replicate"]) for r in rows}),
        "wall_time": time.perf_counter() - start,
    }
    return ExperimentReport(rows, table(rows), failures, manifest)
