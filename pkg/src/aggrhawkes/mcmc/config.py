from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

STRATEGIES = ("one", "generation", "cluster")
_STRATEGY_ALIASES = {
    "one": "one", "one-at-a-time": "one", "single": "one",
    "generation": "generation", "by-generation": "generation",
    "cluster": "cluster", "by-cluster": "cluster",
}


@dataclass(frozen=True)
class Priors:
    """Gamma (shape, rate) priors; ``gamma2`` is inverse-gamma (shape, scale).

    ``alpha`` is truncated to (0, 1). Lomax kernels use ``lomax_c`` for c and
    ``lomax_pm1`` for p - 1.
    """

    mu: tuple[float, float] = (1.0, 0.01)
    alpha: tuple[float, float] = (1.0, 0.01)
    beta: tuple[float, float] = (1.0, 0.01)
    gamma2: tuple[float, float] = (0.001, 0.001)
    lomax_c: tuple[float, float] = (1.0, 0.01)
    lomax_pm1: tuple[float, float] = (1.0, 0.01)

    def __post_init__(self):
        for f in fields(self):
            v = tuple(float(x) for x in getattr(self, f.name))
            if len(v) != 2 or min(v) <= 0:
                raise ValueError(f"prior {f.name} needs two positive hyperparameters")
            object.__setattr__(self, f.name, v)

    def kernel_prior_array(self, kernel: str, L: int) -> np.ndarray:
        out = np.zeros((L, L, 4))
        if kernel == "exponential":
            out[..., 0:2] = self.beta
        else:
            out[..., 0:2] = self.lomax_c
            out[..., 2:4] = self.lomax_pm1
        return out

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "Priors":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown prior keys {sorted(unknown)}")
        return cls(**{k: tuple(v) for k, v in d.items()})


@dataclass(frozen=True)
class SamplerConfig:
    n_iter: int = 4000
    burn_in: int = 2000
    thin: int = 1
    n_chains: int = 2
    seed: int = 0
    strategy: str = "one"
    kernel: str = "exponential"
    spatial: bool | None = None
    target_accept: float = 0.3
    sigma_init: float | None = None
    q_trunc: float = 0.999
    full_scan_every: int = 50
    keep_snapshots: bool = False
    snapshot_stride: int = 10
    check_every: int = 100
    jobs: int = 1

    def __post_init__(self):
        strategy = _STRATEGY_ALIASES.get(self.strategy)
        if strategy is None:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        object.__setattr__(self, "strategy", strategy)
        kernel = {"exp": "exponential"}.get(self.kernel, self.kernel)
        if kernel not in ("exponential", "lomax"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        object.__setattr__(self, "kernel", kernel)
        if self.n_iter < 1 or not 0 <= self.burn_in < self.n_iter:
            raise ValueError("need 0 <= burn_in < n_iter")
        if min(self.thin, self.n_chains, self.snapshot_stride, self.full_scan_every) < 1:
            raise ValueError("thin, n_chains, snapshot_stride and full_scan_every must be "
                             "positive")
        if not 0.9 < self.q_trunc < 1:
            raise ValueError("q_trunc must lie in (0.9, 1)")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")

    @property
    def n_keep(self) -> int:
        return len(range(self.burn_in, self.n_iter, self.thin))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown sampler keys {sorted(unknown)}")
        return cls(**d)
