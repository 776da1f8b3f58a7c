"""Binning exact patterns into time (and space) counts."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .process import EventPattern


class AggregationError(ValueError):
    pass


def _edges(lo: float, hi: float, width: float) -> np.ndarray:
    # half-open bins of equal width; the last one absorbs any remainder
    k = int(math.floor((hi - lo) / width + 1e-9))
    edges = lo + width * np.arange(k + 1)
    if hi - edges[-1] > 1e-9 * width:
        edges = np.append(edges, hi)
    else:
        edges[-1] = hi
    return edges


@dataclass(frozen=True)
class ProcessBins:
    dt: float
    ds: float | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"time bin width must be positive, got {self.dt}")
        if self.ds is not None and not self.ds > 0:
            raise ValueError(f"cell side must be positive, got {self.ds}")


@dataclass(frozen=True)
class BinSpec:
    """Per-process bin widths on ``[0, T)`` and, when spatial, on the window."""

    bins: tuple[ProcessBins, ...]
    T: float
    window: tuple | None = None

    def __post_init__(self):
        bins = tuple(b if isinstance(b, ProcessBins) else ProcessBins(*b) for b in self.bins)
        object.__setattr__(self, "bins", bins)
        spatial = {b.ds is not None for b in bins}
        if len(spatial) > 1:
            raise ValueError("either every process has spatial cells or none does")
        if spatial == {True} and self.window is None:
            raise ValueError("spatial bins need a window")
        if self.window is not None:
            object.__setattr__(self, "window", tuple(float(v) for v in self.window))

    @classmethod
    def uniform(cls, dt: float, T: float, ds: float | None = None, window=None,
                n_processes: int = 1) -> "BinSpec":
        return cls(tuple(ProcessBins(dt, ds) for _ in range(n_processes)), T,
                   window if ds is not None else None)

    @property
    def n_processes(self) -> int:
        return len(self.bins)

    @property
    def spatial(self) -> bool:
        return self.bins[0].ds is not None

    def time_edges(self, l: int) -> np.ndarray:
        return _edges(0.0, self.T, self.bins[l].dt)

    def space_edges(self, l: int) -> tuple[np.ndarray, np.ndarray]:
        x0, x1, y0, y1 = self.window
        ds = self.bins[l].ds
        return _edges(x0, x1, ds), _edges(y0, y1, ds)

    def shape(self, l: int) -> tuple[int, ...]:
        nt = self.time_edges(l).size - 1
        if not self.spatial:
            return (nt,)
        ex, ey = self.space_edges(l)
        return (nt, ex.size - 1, ey.size - 1)

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "window": list(self.window) if self.window is not None else None,
            "processes": [{"dt": b.dt, "ds": b.ds} for b in self.bins],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BinSpec":
        unknown = set(d) - {"T", "window", "processes", "schema_version"}
        if unknown:
            raise ValueError(f"unknown binspec keys {sorted(unknown)}")
        return cls(tuple(ProcessBins(p["dt"], p.get("ds")) for p in d["processes"]),
                   float(d["T"]), d.get("window"))


@dataclass(frozen=True)
class AggregatedCounts:
    """Per-process count arrays indexed ``[time_bin]`` or ``[time_bin, x_cell, y_cell]``."""

    counts: tuple[np.ndarray, ...]
    spec: BinSpec

    def __post_init__(self):
        counts = tuple(np.asarray(c, dtype=np.int64) for c in self.counts)
        if len(counts) != self.spec.n_processes:
            raise ValueError("one count array per process is required")
        for l, c in enumerate(counts):
            if c.shape != self.spec.shape(l):
                raise ValueError(f"process {l}: counts shape {c.shape} does not match "
                                 f"bin spec {self.spec.shape(l)}")
            if np.any(c < 0):
                raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def totals(self) -> np.ndarray:
        return np.array([int(c.sum()) for c in self.counts])

    @property
    def n(self) -> int:
        return int(self.totals.sum())

    def __eq__(self, other):
        if not isinstance(other, AggregatedCounts):
            return NotImplemented
        return self.spec == other.spec and all(
            np.array_equal(a, b) for a, b in zip(self.counts, other.counts))

    def __hash__(self):
        return id(self)


def bin_index(edges: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Half-open bin membership; -1 (or len-1) marks values outside the edges."""
    idx = np.searchsorted(edges, v, side="right") - 1
    idx[(v < edges[0]) | (v >= edges[-1])] = -1
    return idx


def event_bins(pattern: EventPattern, spec: BinSpec):
    """Bin indices per event: ``(time_idx, x_idx, y_idx)``; spatial ones are None when temporal."""
    n = pattern.n
    it = np.empty(n, dtype=np.int64)
    ix = np.zeros(n, dtype=np.int64) if spec.spatial else None
    iy = np.zeros(n, dtype=np.int64) if spec.spatial else None
    for l in range(spec.n_processes):
        sel = np.flatnonzero(pattern.process == l)
        it[sel] = bin_index(spec.time_edges(l), pattern.t[sel])
        if spec.spatial:
            ex, ey = spec.space_edges(l)
            ix[sel] = bin_index(ex, pattern.s[sel, 0])
            iy[sel] = bin_index(ey, pattern.s[sel, 1])
    return it, ix, iy


def inside_bins(pattern: EventPattern, spec: BinSpec) -> np.ndarray:
    it, ix, iy = event_bins(pattern, spec)
    ok = it >= 0
    if spec.spatial:
        ok &= (ix >= 0) & (iy >= 0)
    return ok


def aggregate(pattern: EventPattern, spec: BinSpec) -> AggregatedCounts:
    if pattern.n_processes != spec.n_processes:
        raise AggregationError("pattern and bin spec disagree on the number of processes")
    if spec.spatial and not pattern.spatial:
        raise AggregationError("spatial bins need a spatial pattern")
    it, ix, iy = event_bins(pattern, spec)
    ok = inside_bins(pattern, spec)
    if not ok.all():
        j = int(np.flatnonzero(~ok)[0])
        where = f"t={pattern.t[j]}" + (f", s={pattern.s[j].tolist()}" if spec.spatial else "")
        raise AggregationError(f"event {j} ({where}) lies outside every bin")
    out = []
    for l in range(spec.n_processes):
        sel = pattern.process == l
        c = np.zeros(spec.shape(l), dtype=np.int64)
        if spec.spatial:
            np.add.at(c, (it[sel], ix[sel], iy[sel]), 1)
        else:
            np.add.at(c, it[sel], 1)
        out.append(c)
    return AggregatedCounts(tuple(out), spec)


def is_consistent(pattern: EventPattern, counts: AggregatedCounts) -> bool:
    try:
        return aggregate(pattern, counts.spec) == counts
    except AggregationError:
        return False
