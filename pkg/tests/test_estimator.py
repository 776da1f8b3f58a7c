import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from aggrhawkes import EventPattern, ModelParams, simulate_hawkes
from aggrhawkes.estimator import Aggregator, HawkesMCMC
from aggrhawkes.forecast import Region


@pytest.fixture(scope="module")
def spatial_pattern():
    params = ModelParams.exponential([0.1], [[0.5]], [[1.0]], gamma=[[0.5]])
    pat, _ = simulate_hawkes(params, 80.0, (0, 10, 0, 10), seed=3)
    inside = (pat.s >= 0).all(axis=1) & (pat.s < 10).all(axis=1)
    return pat.subset(inside)


def test_get_set_params_and_clone():
    est = HawkesMCMC(strategy="cluster", n_iter=50, burn_in=10)
    assert est.get_params()["strategy"] == "cluster"
    est.set_params(n_chains=3)
    c = clone(est)
    assert c.get_params() == est.get_params()


def test_aggregator_transform(spatial_pattern):
    counts = Aggregator(dt=2.0, ds=2.5).fit_transform(spatial_pattern)
    assert counts.n == spatial_pattern.n and counts.spec.spatial
    temporal = Aggregator(dt=2.0).fit_transform(spatial_pattern)
    assert not temporal.spec.spatial and temporal.n == spatial_pattern.n


def test_aggregator_validation():
    with pytest.raises(ValueError):
        Aggregator(dt=0).fit(EventPattern([1.0], 2.0))
    with pytest.raises(ValueError):
        Aggregator(dt=1, ds=1).fit(EventPattern([1.0], 2.0))
    with pytest.raises(NotFittedError):
        Aggregator().transform(EventPattern([1.0], 2.0))
    with pytest.raises(TypeError):
        Aggregator().fit([1.0, 2.0])


def test_pipeline_fit_predict(spatial_pattern):
    pipe = make_pipeline(Aggregator(dt=1.0, ds=2.0),
                         HawkesMCMC(n_iter=120, burn_in=60, keep_snapshots=True,
                                    random_state=4))
    pipe.fit(spatial_pattern)
    est = pipe[-1]
    assert set(est.params_) == {"mu", "alpha", "beta", "gamma"}
    assert est.posterior("alpha").size == 2 * 60
    pred = est.predict(5.0, draws=3, region=Region("a", 0, 5, 0, 5))
    assert pred["q2.5"] <= pred["q50"] <= pred["q97.5"]
    assert len(est.forecast(2.0, draws=2)) == 2 * len(est.samples_.all_snapshots())


def test_fit_exact_events_deterministic(spatial_pattern):
    est = HawkesMCMC(n_iter=60, burn_in=20, spatial=False, random_state=1)
    a = est.fit(spatial_pattern).posterior("beta")
    b = clone(est).fit(spatial_pattern).posterior("beta")
    assert np.array_equal(a, b)


def test_not_fitted():
    with pytest.raises(NotFittedError):
        HawkesMCMC().predict(1.0)


def test_invalid_config_raises_on_fit():
    with pytest.raises(ValueError):
        HawkesMCMC(strategy="nope").fit(EventPattern([1.0], 2.0))
