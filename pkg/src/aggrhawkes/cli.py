"""Command-line interface: simulate, aggregate, fit, diagnose, forecast, experiment."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .aggregate import AggregationError, BinSpec, aggregate
from .diagnostics import summarize, summarize_draws
from .experiment import ExperimentConfig, ParameterSet, run_experiment
from .forecast import WHOLE, posterior_predictive, region_table
from .mcmc.config import Priors, SamplerConfig
from .mcmc.sampler import sample_posterior
from .process import BranchingError, BranchingStructure
from .simulate import SimulationRequest, simulate

log = logging.getLogger("aggrhawkes")

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3


class UsageError(ValueError):
    pass


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _window(values):
    return tuple(values) if values else None


def cmd_simulate(args):
    d = io.check_schema(io.read_json(args.params), args.params)
    d = {k: v for k, v in d.items() if k != "schema_version"}
    ps = ParameterSet.from_dict(d)
    window = _window(args.window)
    pattern, branching = simulate(SimulationRequest(ps.params, (0.0, args.T), window, args.seed))
    if window is not None and not args.keep_outside:
        x0, x1, y0, y1 = window
        x, y = pattern.s[:, 0], pattern.s[:, 1]
        keep = (x >= x0) & (x < x1) & (y >= y0) & (y < y1)
        dropped = int((~keep).sum())
        if dropped:
            log.info("dropping %d offspring outside the window", dropped)
            # parents of kept events stay valid only if kept too; re-root orphans
            idx = np.cumsum(keep) - 1
            par = branching.parent[keep]
            ok = par >= 0
            par[ok] = np.where(keep[par[ok]], idx[par[ok]], -1)
            pattern, branching = pattern.subset(keep), BranchingStructure(par)
    out = _out_dir(args.out)
    io.write_events(pattern, out / "events.csv")
    io.write_branching(pattern, branching, out / "branching.csv")
    log.info("simulated %d events to %s", pattern.n, out)


def cmd_aggregate(args):
    window = _window(args.window)
    pattern = io.read_events(args.events, args.T, window, args.processes, args.jitter, args.seed)
    if args.ds is not None and window is None:
        raise UsageError("--ds needs --window")
    if args.ds is None and pattern.spatial:
        pattern = pattern.drop_space()
    spec = BinSpec.uniform(args.dt, args.T, args.ds, window, pattern.n_processes)
    counts = aggregate(pattern, spec)
    out = _out_dir(args.out)
    io.write_counts(counts, out / "counts.csv")
    io.write_binspec(spec, out / "binspec.json")
    log.info("%d events into %s bins", counts.n, [spec.shape(l) for l in range(spec.n_processes)])


def _fit_config(args) -> tuple[SamplerConfig, Priors]:
    base, priors = {}, {}
    if args.config:
        d = io.check_schema(io.read_json(args.config), args.config)
        unknown = set(d) - {"schema_version", "sampler", "priors"}
        if unknown:
            raise UsageError(f"{args.config}: unknown keys {sorted(unknown)}")
        base, priors = dict(d.get("sampler", {})), d.get("priors", {})
    flags = {"n_chains": args.chains, "n_iter": args.iters, "burn_in": args.burnin,
             "thin": args.thin, "seed": args.seed, "strategy": args.strategy,
             "kernel": args.kernel, "jobs": args.jobs}
    base.update({k: v for k, v in flags.items() if v is not None})
    if args.snapshots:
        base["keep_snapshots"] = True
    if args.temporal:
        base["spatial"] = False
    return SamplerConfig.from_dict(base), Priors.from_dict(priors)


def cmd_fit(args):
    config, priors = _fit_config(args)
    if args.counts:
        if not args.binspec:
            raise UsageError("--counts needs --binspec")
        spec = io.read_binspec(args.binspec)
        obs = io.read_counts(args.counts, spec)
    elif args.events:
        if args.T is None:
            raise UsageError("--events needs --T")
        obs = io.read_events(args.events, args.T, _window(args.window), args.processes,
                             seed=config.seed)
    else:
        raise UsageError("give --counts/--binspec or --events")
    samples = sample_posterior(obs, priors, config)
    out = _out_dir(args.out)
    io.write_posterior(samples, out / "posterior.csv")
    summary = summarize(samples)
    io.write_summary(summary, out / "summary.json", {
        "model": {"T": samples.T, "window": samples.window, "n_processes": samples.n_processes,
                  "kernel": samples.kernel, "spatial": samples.spatial},
        "sampler": config.to_dict(), "priors": priors.to_dict(), "runtime": samples.runtime,
    })
    if config.keep_snapshots:
        io.write_snapshots(samples, out / "snapshots.npz")
    _print_summary(summary)


def _print_summary(summary: dict):
    print(f"{'param':<14}{'mean':>10}{'q2.5':>10}{'q97.5':>10}{'rhat':>8}{'ess':>9}")
    for name, s in summary.items():
        rh = "-" if s["rhat"] is None else f"{s['rhat']:.3f}"
        print(f"{name:<14}{s['mean']:>10.4f}{s['q2.5']:>10.4f}{s['q97.5']:>10.4f}"
              f"{rh:>8}{s['ess']:>9.1f}")


def cmd_diagnose(args):
    path = Path(args.posterior)
    if path.is_dir():
        path = path / "posterior.csv"
    names, draws, _ = io.read_posterior(path)
    n = min(d.shape[0] for d in draws)
    summary = {}
    for j, name in enumerate(names):
        summary[name] = summarize_draws(np.stack([d[:n, j] for d in draws]))
    if args.out:
        io.write_summary(summary, _out_dir(args.out) / "diagnostics.json")
    _print_summary(summary)
    bad = [k for k, s in summary.items() if s["rhat"] is not None and s["rhat"] > args.rhat_max]
    if bad:
        log.warning("Rhat above %.2f for %s", args.rhat_max, ", ".join(bad))


def cmd_forecast(args):
    path = Path(args.posterior)
    snap = path / "snapshots.npz" if path.is_dir() else path
    if not snap.exists():
        raise UsageError(f"{snap} not found; refit with --snapshots to enable forecasting")
    snaps = io.read_snapshots(snap)
    forecasts = posterior_predictive(snaps, args.horizon, args.draws, args.seed)
    regions = io.read_regions(args.regions) if args.regions else [WHOLE]
    T = snaps[0][1].T if snaps else 0.0
    windows = [None] + ([(T + a, T + b) for a, b in args.window_offsets] if args.window_offsets
                        else [])
    out = _out_dir(args.out)
    with open(out / "forecast_events.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        spatial = bool(forecasts) and forecasts[0].spatial
        w.writerow(["draw", "process", "t"] + (["x", "y"] if spatial else []))
        for k, f in enumerate(forecasts):
            for i in range(f.n):
                row = [k, int(f.process[i]), repr(float(f.t[i]))]
                if spatial:
                    row += [repr(float(f.s[i, 0])), repr(float(f.s[i, 1]))]
                w.writerow(row)
    rows = region_table(forecasts, regions, windows)
    io.write_rows(rows, out / "region_counts.csv", ["region", "window", "mean", "q2.5", "q50",
                                                    "q97.5"])
    for r in rows:
        print(f"{r['region']:<12}{r['window']:<16}{r['mean']:>9.2f}"
              f"{r['q2.5']:>8.1f}{r['q97.5']:>8.1f}")


def cmd_experiment(args):
    d = io.read_json(args.config)
    if args.replicates is not None:
        d["replicates"] = args.replicates
    if args.seed is not None:
        d["seed"] = args.seed
    if args.jobs is not None:
        d["jobs"] = args.jobs
    cfg = ExperimentConfig.from_dict(d)
    report = run_experiment(cfg)
    report.write(args.out)
    for f in report.failures:
        log.error("replicate %s grid %s failed: %s", f["replicate"], f["grid"], f["error"])
    print(f"{'set':<10}{'grid':<22}{'param':<12}{'truth':>8}{'estimate':>10}{'ci':>8}{'cover':>7}")
    for r in report.table:
        print(f"{r['set']:<10}{r['grid']:<22}{r['param']:<12}{r['truth']:>8.4f}"
              f"{r['estimate']:>10.4f}{r['ci_length']:>8.4f}{r['coverage']:>7.3f}")


def _pair(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a,b got {text!r}") from None
    return a, b


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aggrhawkes", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, jobs=True):
        sp.add_argument("--seed", type=int, default=None)
        if jobs:
            sp.add_argument("--jobs", type=int, default=None)
        sp.add_argument("--out", required=True)

    s = sub.add_parser("simulate", help="simulate events from a parameter JSON")
    s.add_argument("--params", required=True)
    s.add_argument("--T", type=float, required=True)
    s.add_argument("--window", type=float, nargs=4, metavar=("X0", "X1", "Y0", "Y1"))
    s.add_argument("--keep-outside", action="store_true",
                   help="keep offspring that fall outside the window")
    common(s, jobs=False)
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("aggregate", help="bin an event CSV into counts")
    a.add_argument("--events", required=True)
    a.add_argument("--T", type=float, required=True)
    a.add_argument("--window", type=float, nargs=4, metavar=("X0", "X1", "Y0", "Y1"))
    a.add_argument("--dt", type=float, required=True)
    a.add_argument("--ds", type=float)
    a.add_argument("--processes", type=int)
    a.add_argument("--jitter", action="store_true", help="jitter tied coordinates silently")
    common(a, jobs=False)
    a.set_defaults(func=cmd_aggregate)

    f = sub.add_parser("fit", help="sample the posterior from counts or exact events")
    f.add_argument("--counts")
    f.add_argument("--binspec")
    f.add_argument("--events")
    f.add_argument("--T", type=float)
    f.add_argument("--window", type=float, nargs=4, metavar=("X0", "X1", "Y0", "Y1"))
    f.add_argument("--processes", type=int)
    f.add_argument("--config")
    f.add_argument("--chains", type=int)
    f.add_argument("--iters", type=int)
    f.add_argument("--burnin", type=int)
    f.add_argument("--thin", type=int)
    f.add_argument("--strategy", choices=["one", "generation", "cluster"])
    f.add_argument("--kernel", choices=["exponential", "lomax"])
    f.add_argument("--temporal", action="store_true", help="ignore spatial cells")
    f.add_argument("--snapshots", action="store_true", help="store latent snapshots")
    common(f)
    f.set_defaults(func=cmd_fit)

    d = sub.add_parser("diagnose", help="Rhat/ESS summary of a posterior CSV")
    d.add_argument("--posterior", required=True)
    d.add_argument("--rhat-max", type=float, default=1.1)
    d.add_argument("--out")
    d.set_defaults(func=cmd_diagnose)

    fc = sub.add_parser("forecast", help="posterior-predictive forecasts")
    fc.add_argument("--posterior", required=True)
    fc.add_argument("--horizon", type=float, required=True)
    fc.add_argument("--draws", type=int, default=1)
    fc.add_argument("--regions")
    fc.add_argument("--window-offsets", type=_pair, nargs="*",
                    help="sub-windows a,b measured from the end of the data")
    common(fc, jobs=False)
    fc.set_defaults(func=cmd_forecast)

    e = sub.add_parser("experiment", help="run a simulation study from a JSON config")
    e.add_argument("--config", required=True)
    e.add_argument("--replicates", type=int)
    common(e)
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
                        level=logging.WARNING - 10 * min(args.verbose, 2))
    if getattr(args, "seed", None) is None and args.command in ("simulate", "aggregate",
                                                                  "forecast"):
        args.seed = 0
    try:
        args.func(args)
    except (UsageError, io.FormatError, AggregationError, BranchingError, ValueError,
            FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:  # noqa: BLE001
        log.exception("failed: %s", e)
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
