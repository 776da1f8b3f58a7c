"""Convergence diagnostics and posterior summaries."""
from __future__ import annotations

import numpy as np


def _as_chains(chains) -> np.ndarray:
    x = np.asarray(chains, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError("expected a (chains, draws) array")
    return x


def rhat(chains, split: bool = False) -> float:
    """Gelman-Rubin potential scale reduction factor, floored at 1.

    ``split=True`` halves every chain first (split-Rhat).
    """
    x = _as_chains(chains)
    if split:
        h = x.shape[1] // 2
        x = np.concatenate([x[:, :h], x[:, x.shape[1] - h:]])
    m, n = x.shape
    if m < 2:
        raise ValueError("Rhat needs at least two chains")
    if n < 10:
        raise ValueError("Rhat needs at least 10 draws per chain")
    means = x.mean(axis=1)
    B = n * means.var(ddof=1)
    W = x.var(axis=1, ddof=1).mean()
    if W == 0:
        return 1.0 if B == 0 else float("inf")
    return float(max(np.sqrt(((n - 1) / n * W + B / n) / W), 1.0))


def autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance at every lag, via FFT."""
    n = x.size
    f = np.fft.rfft(x - x.mean(), 2 * n)
    return np.fft.irfft(f * np.conj(f))[:n] / n


def ess(chains) -> float:
    """Effective sample size with Geyer's initial monotone sequence truncation.

    Several chains are combined by summing their within-chain ESS values.
    A constant chain has ESS 0.
    """
    x = _as_chains(chains)
    return float(sum(_ess_one(c) for c in x))


def _ess_one(x: np.ndarray) -> float:
    n = x.size
    if n < 4:
        return float(n)
    acov = autocovariance(x)
    if acov[0] <= 0:
        return 0.0
    rho = acov / acov[0]
    # Geyer: pair sums Gamma_k = rho_{2k} + rho_{2k+1}, cut at the first
    # non-positive one and forced to be non-increasing
    k = (n - 1) // 2
    pairs = rho[0:2 * k:2] + rho[1:2 * k:2]
    pos = np.flatnonzero(pairs <= 0)
    pairs = pairs[:pos[0]] if pos.size else pairs
    pairs = np.minimum.accumulate(pairs)
    tau = -1.0 + 2.0 * pairs.sum()
    # antithetic chains would exceed n; report at most the draw count
    return float(n / max(tau, 1.0))


QUANTILES = (2.5, 50.0, 97.5)


def summarize_draws(chains) -> dict:
    x = _as_chains(chains)
    flat = x.reshape(-1)
    if not np.isfinite(flat).all():
        # derived quantities such as the Lomax mean lag can be infinite
        q = np.percentile(flat, QUANTILES, method="closest_observation")
        return {"mean": float(flat.mean()), "sd": float("nan"), "q2.5": float(q[0]),
                "q50": float(q[1]), "q97.5": float(q[2]), "ci_length": float(q[2] - q[0]),
                "ess": float("nan"), "rhat": None}
    q = np.percentile(flat, QUANTILES)
    out = {
        "mean": float(flat.mean()),
        "sd": float(flat.std(ddof=1)) if np.ptp(flat) > 0 else 0.0,
        "q2.5": float(q[0]),
        "q50": float(q[1]),
        "q97.5": float(q[2]),
        "ci_length": float(q[2] - q[0]),
        "ess": ess(x),
    }
    out["rhat"] = rhat(x) if x.shape[0] >= 2 and x.shape[1] >= 10 else None
    return out


def summarize(samples) -> dict[str, dict]:
    """Per-parameter summary of a ``PosteriorSamples``, pooled over chains."""
    if not samples.draws or samples.draws[0].shape[0] == 0:
        raise ValueError("no posterior draws to summarize")
    acc = {}
    for c, a in enumerate(samples.acceptance):
        for k, v in a.items():
            acc.setdefault(k, []).append(v)
    rates = {k: float(np.mean(v)) for k, v in acc.items() if not k.endswith("_skipped")}
    out = {}
    for name in samples.names:
        s = summarize_draws(samples.chains(name))
        s["acceptance_rates"] = rates
        out[name] = s
    return out


def covers(summary: dict, truth: float) -> bool:
    return summary["q2.5"] <= truth <= summary["q97.5"]


def coverage(summaries: list[dict], truth: float) -> float:
    """Fraction of replicate summaries whose 95% interval contains ``truth``."""
    if not summaries:
        return float("nan")
    return float(np.mean([covers(s, truth) for s in summaries]))
