"""CSV/JSON formats for events, branching, counts, posterior draws and summaries."""
from __future__ import annotations

import csv
import json
import logging
import warnings
from pathlib import Path

import numpy as np

from .aggregate import AggregatedCounts, BinSpec
from .process import BranchingStructure, EventPattern

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TIME_JITTER = 1.0 / 120.0
SPACE_JITTER = 5e-6


class FormatError(ValueError):
    """Malformed input file; the message names the offending line."""


def _rows(path, required):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise FormatError(f"{path}: line 1: missing columns {missing}")
        for row in reader:
            yield reader.line_num, row


def _num(path, line, row, key, kind=float, optional=False):
    v = row.get(key)
    if v is None or v.strip() == "":
        if optional:
            return None
        raise FormatError(f"{path}: line {line}: empty {key!r}")
    try:
        out = kind(v)
    except ValueError:
        raise FormatError(f"{path}: line {line}: bad {key} value {v!r}") from None
    if kind is float and not np.isfinite(out):
        raise FormatError(f"{path}: line {line}: non-finite {key}")
    return out


def _jitter_ties(values, groups, width, rng, lo, hi):
    """Move every member of a tie group by U(0, width), reflecting at ``hi``.

    ``values`` is ``(n,)`` or ``(n, d)``; ``lo``/``hi`` broadcast against one row.
    """
    v2 = values.reshape(len(values), -1)
    _, inv, cnt = np.unique(np.column_stack([groups, v2]), axis=0, return_inverse=True,
                            return_counts=True)
    tied = cnt[inv.reshape(-1)] > 1
    if not tied.any():
        return values, 0
    out = v2.copy()
    u = rng.uniform(0.0, width, size=out[tied].shape)
    moved = out[tied] + u
    moved = np.where(moved >= hi, out[tied] - u, moved)
    out[tied] = np.maximum(moved, lo)
    return out.reshape(values.shape), int(tied.sum())


def read_events(path, T: float, window=None, n_processes: int | None = None,
                jitter: bool = False, seed: int = 0) -> EventPattern:
    """Read ``process,t[,x,y]`` rows (0-based processes) into a validated pattern.

    Tied times within a process (and tied locations) are jittered with
    U(0, 1/120) and U(0, 5e-6) noise; without ``jitter`` this happens with a warning.
    """
    path = Path(path)
    spatial = window is not None
    proc, t, xy = [], [], []
    x0 = x1 = y0 = y1 = None
    if spatial:
        x0, x1, y0, y1 = (float(v) for v in window)
    for line, row in _rows(path, ["process", "t"] + (["x", "y"] if spatial else [])):
        p = _num(path, line, row, "process", int)
        tt = _num(path, line, row, "t")
        if p < 0 or (n_processes is not None and p >= n_processes):
            raise FormatError(f"{path}: line {line}: process {p} out of range")
        if not 0 <= tt < T:
            raise FormatError(f"{path}: line {line}: t={tt} outside [0, {T})")
        if spatial:
            x, y = _num(path, line, row, "x"), _num(path, line, row, "y")
            if not (x0 <= x < x1 and y0 <= y < y1):
                raise FormatError(f"{path}: line {line}: location ({x}, {y}) outside window")
            xy.append((x, y))
        proc.append(p)
        t.append(tt)
    proc = np.array(proc, dtype=np.int64)
    t = np.array(t, dtype=float)
    L = n_processes or (int(proc.max()) + 1 if proc.size else 1)
    rng = np.random.default_rng(seed)
    t, nt = _jitter_ties(t, proc, TIME_JITTER, rng, 0.0, T)
    s = np.array(xy, dtype=float).reshape(-1, 2) if spatial else None
    ns = 0
    if spatial:
        s, ns = _jitter_ties(s, proc, SPACE_JITTER, rng, np.array([x0, y0]),
                              np.array([x1, y1]))
    if (nt or ns) and not jitter:
        warnings.warn(f"{path}: {nt} tied times and {ns} tied locations jittered", stacklevel=2)
    pattern = EventPattern(t, T, proc, s, window, L,
                           metadata={"source": str(path), "jittered": nt + ns})
    return pattern.validate()


def write_events(pattern: EventPattern, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["process", "t", "x", "y"] if pattern.spatial else ["process", "t"])
        for i in range(pattern.n):
            row = [int(pattern.process[i]), repr(float(pattern.t[i]))]
            if pattern.spatial:
                row += [repr(float(pattern.s[i, 0])), repr(float(pattern.s[i, 1]))]
            w.writerow(row)


def _within_index(pattern: EventPattern) -> np.ndarray:
    idx = np.empty(pattern.n, dtype=np.int64)
    for l in range(pattern.n_processes):
        sel = np.flatnonzero(pattern.process == l)
        idx[sel] = np.arange(sel.size)
    return idx


def write_branching(pattern: EventPattern, branching: BranchingStructure, path):
    """Rows ``child_process,child_index,parent_process,parent_index``; -1,-1 for immigrants."""
    within = _within_index(pattern)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["child_process", "child_index", "parent_process", "parent_index"])
        for i, p in enumerate(branching.parent):
            pp, pi = (-1, -1) if p < 0 else (int(pattern.process[p]), int(within[p]))
            w.writerow([int(pattern.process[i]), int(within[i]), pp, pi])


def read_branching(pattern: EventPattern, path) -> BranchingStructure:
    within = _within_index(pattern)
    lookup = {(int(pattern.process[i]), int(within[i])): i for i in range(pattern.n)}
    parent = np.full(pattern.n, -1, dtype=np.int64)
    seen = 0
    for line, row in _rows(path, ["child_process", "child_index", "parent_process",
                                  "parent_index"]):
        key = (_num(path, line, row, "child_process", int),
               _num(path, line, row, "child_index", int))
        pkey = (_num(path, line, row, "parent_process", int),
                _num(path, line, row, "parent_index", int))
        if key not in lookup:
            raise FormatError(f"{path}: line {line}: unknown child {key}")
        if pkey != (-1, -1):
            if pkey not in lookup:
                raise FormatError(f"{path}: line {line}: unknown parent {pkey}")
            parent[lookup[key]] = lookup[pkey]
        seen += 1
    if seen != pattern.n:
        raise FormatError(f"{path}: {seen} rows for {pattern.n} events")
    return BranchingStructure(parent).check(pattern)


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: line {e.lineno}: {e.msg}") from None


def check_schema(d: dict, path) -> dict:
    v = d.get("schema_version", SCHEMA_VERSION)
    if v != SCHEMA_VERSION:
        raise FormatError(f"{path}: unsupported schema_version {v}")
    return d


def write_binspec(spec: BinSpec, path):
    write_json({"schema_version": SCHEMA_VERSION, **spec.to_dict()}, path)


def read_binspec(path) -> BinSpec:
    try:
        return BinSpec.from_dict(check_schema(read_json(path), path))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"{path}: invalid bin spec: {e}") from None


def write_counts(counts: AggregatedCounts, path):
    """Sparse rows ``process,bin_t,bin_x,bin_y,count`` (non-zero bins only)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["process", "bin_t", "bin_x", "bin_y", "count"])
        for l, c in enumerate(counts.counts):
            if c.ndim == 1:
                for it in np.flatnonzero(c):
                    w.writerow([l, int(it), "", "", int(c[it])])
            else:
                for it, ix, iy in zip(*np.nonzero(c)):
                    w.writerow([l, int(it), int(ix), int(iy), int(c[it, ix, iy])])


def read_counts(path, spec: BinSpec) -> AggregatedCounts:
    arrays = [np.zeros(spec.shape(l), dtype=np.int64) for l in range(spec.n_processes)]
    for line, row in _rows(path, ["process", "bin_t", "count"]):
        l = _num(path, line, row, "process", int)
        if not 0 <= l < spec.n_processes:
            raise FormatError(f"{path}: line {line}: process {l} not in bin spec")
        idx = [_num(path, line, row, "bin_t", int)]
        if spec.spatial:
            idx += [_num(path, line, row, "bin_x", int), _num(path, line, row, "bin_y", int)]
        elif _num(path, line, row, "bin_x", int, optional=True) is not None:
            raise FormatError(f"{path}: line {line}: spatial cell given for temporal bins")
        shape = spec.shape(l)
        if any(not 0 <= i < n for i, n in zip(idx, shape)):
            raise FormatError(f"{path}: line {line}: bin {tuple(idx)} outside shape {shape}")
        k = _num(path, line, row, "count", int)
        if k < 0:
            raise FormatError(f"{path}: line {line}: negative count")
        arrays[l][tuple(idx)] += k
    return AggregatedCounts(tuple(arrays), spec)


def write_posterior(samples, path):
    """Long format ``chain,iteration,param,value``; iteration counts sweeps from 0."""
    cfg = samples.config
    start, thin = cfg.get("burn_in", 0), cfg.get("thin", 1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["chain", "iteration", "param", "value"])
        for c, d in enumerate(samples.draws):
            for r in range(d.shape[0]):
                it = start + r * thin
                for j, name in enumerate(samples.names):
                    w.writerow([c, it, name, repr(float(d[r, j]))])


def read_posterior(path) -> tuple[list[str], list[np.ndarray], list[np.ndarray]]:
    """Returns ``(names, per-chain draw matrices, per-chain iteration numbers)``."""
    data: dict[int, dict[int, dict[str, float]]] = {}
    names: list[str] = []
    for line, row in _rows(path, ["chain", "iteration", "param", "value"]):
        c = _num(path, line, row, "chain", int)
        it = _num(path, line, row, "iteration", int)
        name = row["param"]
        if name not in names:
            names.append(name)
        data.setdefault(c, {}).setdefault(it, {})[name] = _num(path, line, row, "value")
    draws, iters = [], []
    for c in sorted(data):
        its = sorted(data[c])
        try:
            draws.append(np.array([[data[c][i][n] for n in names] for i in its]))
        except KeyError as e:
            raise FormatError(f"{path}: chain {c} lacks parameter {e}") from None
        iters.append(np.array(its))
    return names, draws, iters


def write_summary(summary: dict, path, extra: dict | None = None):
    write_json({"schema_version": SCHEMA_VERSION, "parameters": summary, **(extra or {})}, path)


def read_regions(path) -> list:
    """Rows ``name,x0,x1,y0,y1`` (blank coordinates mean the whole window)."""
    from .forecast import Region
    out = []
    for line, row in _rows(path, ["name"]):
        vals = [_num(path, line, row, k, optional=True) for k in ("x0", "x1", "y0", "y1")]
        if any(v is None for v in vals) and any(v is not None for v in vals):
            raise FormatError(f"{path}: line {line}: give all four corners or none")
        if vals[0] is not None and (vals[1] <= vals[0] or vals[3] <= vals[2]):
            raise FormatError(f"{path}: line {line}: empty rectangle")
        out.append(Region(row["name"], *vals))
    return out


def write_rows(rows: list[dict], path, columns: list[str]):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def write_snapshots(samples, path):
    """Store latent (parameters, pattern) snapshots in one compressed ``.npz``."""
    arrays = {"T": np.array(samples.T), "L": np.array(samples.n_processes),
              "kernel": np.array(samples.kernel),
              "window": np.array(samples.window if samples.window else [], dtype=float)}
    k = 0
    for chain in samples.snapshots:
        for params, pat in chain:
            arrays[f"mu_{k}"] = params.mu
            arrays[f"alpha_{k}"] = params.alpha
            arrays[f"kp_{k}"] = params.kernel_params
            if params.gamma is not None:
                arrays[f"gamma_{k}"] = params.gamma
            arrays[f"t_{k}"] = pat.t
            arrays[f"proc_{k}"] = pat.process
            if pat.spatial:
                arrays[f"s_{k}"] = pat.s
            k += 1
    arrays["count"] = np.array(k)
    np.savez_compressed(path, **arrays)


def read_snapshots(path) -> list:
    from .process import ModelParams
    with np.load(path) as z:
        T, L, kernel = float(z["T"]), int(z["L"]), str(z["kernel"])
        window = tuple(z["window"]) if z["window"].size else None
        out = []
        for k in range(int(z["count"])):
            gamma = z[f"gamma_{k}"] if f"gamma_{k}" in z else None
            params = ModelParams(z[f"mu_{k}"], z[f"alpha_{k}"], z[f"kp_{k}"], kernel, gamma)
            s = z[f"s_{k}"] if f"s_{k}" in z else None
            pat = EventPattern(z[f"t_{k}"], T, z[f"proc_{k}"], s, window if s is not None else None, L)
            out.append((params, pat))
    return out
