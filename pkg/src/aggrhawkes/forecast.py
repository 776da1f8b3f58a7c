"""Posterior-predictive forecasts from stored (parameters, latent pattern) snapshots."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .process import EventPattern
from .simulate import simulate_forward


class MissingSnapshots(ValueError):
    pass


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle ``[x0, x1) x [y0, y1)``; all None means the whole window.

    Forecast offspring may land outside the window; they count only toward
    regions that contain them.
    """

    name: str
    x0: float | None = None
    x1: float | None = None
    y0: float | None = None
    y1: float | None = None

    @property
    def everywhere(self) -> bool:
        return self.x0 is None

    def contains(self, s: np.ndarray, window=None) -> np.ndarray:
        if self.everywhere:
            if window is None:
                return np.ones(len(s), dtype=bool)
            return Region(self.name, *window).contains(s)
        return (s[:, 0] >= self.x0) & (s[:, 0] < self.x1) & (s[:, 1] >= self.y0) & (s[:, 1] < self.y1)


WHOLE = Region("all")


def posterior_predictive(samples, horizon: float, draws: int = 1,
                         rng: np.random.Generator | int | None = None) -> list[EventPattern]:
    """Simulate ``draws`` futures on ``(T, T + horizon]`` from every stored snapshot."""
    snaps = samples.all_snapshots() if hasattr(samples, "all_snapshots") else list(samples)
    if not snaps:
        raise MissingSnapshots("posterior has no latent snapshots; refit with "
                               "keep_snapshots=True to forecast")
    if draws < 1:
        raise ValueError("draws must be at least 1")
    seed = rng if isinstance(rng, (int, np.integer)) or rng is None else \
        int(rng.integers(2 ** 63))
    streams = np.random.SeedSequence(seed).spawn(len(snaps))
    out = []
    for (params, latent), ss in zip(snaps, streams):
        r = np.random.default_rng(ss)
        for _ in range(draws):
            out.append(simulate_forward(params, latent, horizon, r))
    return out


def counts_in(forecasts: list[EventPattern], region: Region = WHOLE,
              window: tuple[float, float] | None = None, process: int | None = None) -> np.ndarray:
    """Per-forecast number of events in ``region`` and time window ``(a, b]``."""
    out = np.empty(len(forecasts), dtype=np.int64)
    for k, f in enumerate(forecasts):
        keep = np.ones(f.n, dtype=bool)
        if window is not None:
            keep &= (f.t > window[0]) & (f.t <= window[1])
        if f.spatial:
            keep &= region.contains(f.s, f.window)
        elif not region.everywhere:
            raise ValueError("spatial region given for a temporal forecast")
        if process is not None:
            keep &= f.process == process
        out[k] = int(keep.sum())
    return out


def count_in(forecasts: list[EventPattern], region: Region = WHOLE,
             window: tuple[float, float] | None = None, process: int | None = None) -> dict:
    """Summary of the predictive count distribution: mean, quantiles, histogram."""
    c = counts_in(forecasts, region, window, process)
    if c.size == 0:
        return {"mean": float("nan"), "q2.5": float("nan"), "q50": float("nan"),
                "q97.5": float("nan"), "histogram": [], "counts": c}
    q = np.percentile(c, [2.5, 50, 97.5])
    return {"mean": float(c.mean()), "q2.5": float(q[0]), "q50": float(q[1]),
            "q97.5": float(q[2]), "histogram": np.bincount(c).tolist(), "counts": c}


def region_table(forecasts, regions, windows) -> list[dict]:
    """Rows ``region, window, mean, q2.5, q50, q97.5`` for every region/window pair."""
    rows = []
    for reg in regions:
        for win in windows:
            s = count_in(forecasts, reg, win)
            label = "all" if win is None else f"({win[0]:g},{win[1]:g}]"
            rows.append({"region": reg.name, "window": label, "mean": s["mean"],
                         "q2.5": s["q2.5"], "q50": s["q50"], "q97.5": s["q97.5"]})
    return rows
