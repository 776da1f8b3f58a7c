"""scikit-learn style wrappers around binning and posterior sampling."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._validation import check_observations, check_pattern, check_positive, check_window
from .aggregate import BinSpec, aggregate
from .diagnostics import summarize
from .forecast import WHOLE, count_in, posterior_predictive
from .mcmc.config import Priors, SamplerConfig
from .mcmc.sampler import sample_posterior


class Aggregator(BaseEstimator, TransformerMixin):
    """Bin exact patterns into counts with uniform bins of width ``dt`` (and side ``ds``)."""

    def __init__(self, dt=1.0, ds=None):
        self.dt = dt
        self.ds = ds

    def fit(self, X, y=None):
        X = check_pattern(X)
        check_positive(self.dt, "dt")
        if self.ds is not None:
            check_positive(self.ds, "ds")
            if not X.spatial:
                raise ValueError("ds given for a temporal pattern")
        self.spec_ = BinSpec.uniform(self.dt, X.T, self.ds,
                                     check_window(X.window) if self.ds is not None else None,
                                     X.n_processes)
        return self

    def transform(self, X):
        if not hasattr(self, "spec_"):
            raise NotFittedError("call fit before transform")
        X = check_pattern(X)
        if self.spec_.spatial:
            return aggregate(X, self.spec_)
        return aggregate(X.drop_space() if X.spatial else X, self.spec_)


class HawkesMCMC(BaseEstimator):
    """Posterior sampler for Hawkes parameters from binned counts or exact events.

    After ``fit``: ``samples_`` (PosteriorSamples), ``summary_`` (per-parameter dict)
    and ``params_`` (posterior-mean scalars).
    """

    def __init__(self, kernel="exponential", strategy="one", n_iter=4000, burn_in=2000,
                 thin=1, n_chains=2, spatial=None, priors=None, keep_snapshots=False,
                 q_trunc=0.999, random_state=0, n_jobs=1):
        self.kernel = kernel
        self.strategy = strategy
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.thin = thin
        self.n_chains = n_chains
        self.spatial = spatial
        self.priors = priors
        self.keep_snapshots = keep_snapshots
        self.q_trunc = q_trunc
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _config(self) -> SamplerConfig:
        return SamplerConfig(n_iter=self.n_iter, burn_in=self.burn_in, thin=self.thin,
                             n_chains=self.n_chains, seed=int(self.random_state or 0),
                             strategy=self.strategy, kernel=self.kernel, spatial=self.spatial,
                             q_trunc=self.q_trunc, keep_snapshots=self.keep_snapshots,
                             jobs=self.n_jobs)

    def fit(self, X, y=None):
        X = check_observations(X)
        priors = self.priors if isinstance(self.priors, Priors) else \
            Priors.from_dict(self.priors or {})
        self.samples_ = sample_posterior(X, priors, self._config())
        self.summary_ = summarize(self.samples_)
        self.params_ = {k: v["mean"] for k, v in self.summary_.items()}
        return self

    def _check_fitted(self):
        if not hasattr(self, "samples_"):
            raise NotFittedError("call fit first")

    def forecast(self, horizon, draws=1, random_state=None):
        """Posterior-predictive event patterns on ``(T, T + horizon]``."""
        self._check_fitted()
        seed = self.random_state if random_state is None else random_state
        return posterior_predictive(self.samples_, horizon, draws, seed)

    def predict(self, horizon, draws=1, region=WHOLE, random_state=None) -> dict:
        """Predictive distribution of the event count in ``region`` over the next ``horizon``."""
        fc = self.forecast(horizon, draws, random_state)
        return count_in(fc, region)

    def posterior(self, name: str) -> np.ndarray:
        self._check_fitted()
        return self.samples_.pooled(name)
