import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aggrhawkes.diagnostics import coverage, ess, rhat, summarize, summarize_draws


def ar1(rng, phi, n):
    e = rng.normal(size=n)
    x = np.empty(n)
    x[0] = e[0] / np.sqrt(1 - phi ** 2)
    for k in range(1, n):
        x[k] = phi * x[k - 1] + e[k]
    return x


def test_rhat_identical_chains():
    x = np.random.default_rng(0).normal(size=500)
    assert rhat([x, x]) == 1.0
    assert rhat([x, x], split=True) >= 1.0


def test_rhat_separated_chains():
    rng = np.random.default_rng(1)
    r = rhat([rng.normal(0, 1, 10_000), rng.normal(5, 1, 10_000)])
    # sqrt(((N-1)/N W + B/N) / W) with W = 1, B/N = 12.5
    assert r > 2
    assert r == pytest.approx(np.sqrt(1 + 12.5), rel=0.02)


def test_rhat_mixed_chains_near_one():
    rng = np.random.default_rng(2)
    assert rhat(rng.normal(size=(4, 2000))) < 1.01


def test_rhat_errors():
    with pytest.raises(ValueError):
        rhat(np.zeros(100))
    with pytest.raises(ValueError):
        rhat(np.zeros((2, 5)))


@settings(max_examples=30, deadline=None)
@given(st.floats(-50, 50), st.floats(0.01, 100), st.integers(0, 2**31))
def test_rhat_affine_invariant(shift, scale, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(3, 60)) + rng.normal(size=(3, 1))
    assert rhat(shift + scale * x) == pytest.approx(rhat(x), rel=1e-8)


def test_ess_white_noise():
    x = np.random.default_rng(3).normal(size=10_000)
    assert abs(ess(x) - 10_000) < 1000


def test_ess_ar1():
    rng = np.random.default_rng(4)
    n = 10_000
    vals = [ess(ar1(rng, 0.9, n)) for _ in range(5)]
    assert np.mean(vals) == pytest.approx(n / 19, rel=0.15)


def test_ess_constant_and_trend():
    assert ess(np.full(200, 3.0)) == 0.0
    assert ess(np.linspace(0, 1, 1000)) < 50


@settings(max_examples=40, deadline=None)
@given(arrays(float, st.integers(100, 400), elements=st.floats(-1e3, 1e3)))
def test_ess_at_most_n(x):
    assert 0 <= ess(x) <= x.size


def test_ess_sums_chains():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(2, 3000))
    assert ess(x) == pytest.approx(ess(x[0]) + ess(x[1]))


def test_summary_constant():
    s = summarize_draws(np.full((2, 50), 0.4))
    assert s["sd"] == 0 and s["ci_length"] == 0 and s["mean"] == pytest.approx(0.4)


@pytest.mark.filterwarnings("error")
def test_summary_infinite_draws():
    x = np.linspace(1.0, 2.0, 100).reshape(2, 50)
    x[1, -5:] = np.inf
    s = summarize_draws(x)
    assert s["mean"] == np.inf and np.isnan(s["sd"]) and s["rhat"] is None
    assert s["q2.5"] == pytest.approx(np.percentile(x[np.isfinite(x)], 2.5), rel=0.02)
    assert s["q97.5"] == np.inf


def test_summary_uniform_interval():
    s = summarize_draws(np.random.default_rng(6).uniform(size=100_000))
    assert s["ci_length"] == pytest.approx(0.95, abs=0.01)
    assert s["rhat"] is None


@settings(max_examples=40, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 3), st.integers(10, 60)),
              elements=st.floats(-1e6, 1e6)))
def test_quantiles_monotone(x):
    s = summarize_draws(x)
    assert s["q2.5"] <= s["q50"] <= s["q97.5"]


def test_coverage_counts_replicates():
    sums = [{"q2.5": 0.1, "q97.5": 0.5}, {"q2.5": 0.4, "q97.5": 0.9}, {"q2.5": 0.2, "q97.5": 0.3}]
    assert coverage(sums, 0.45) == pytest.approx(2 / 3)
    assert np.isnan(coverage([], 1.0))


def test_summarize_samples():
    from aggrhawkes.mcmc import PosteriorSamples
    rng = np.random.default_rng(7)
    samples = PosteriorSamples(["mu", "alpha"], [rng.normal(size=(40, 2)), rng.normal(size=(40, 2))],
                               10.0, None, 1, "exponential", False,
                               [{"beta": 0.3}, {"beta": 0.35}], [1.0, 1.0])
    out = summarize(samples)
    assert set(out) == {"mu", "alpha"}
    assert out["mu"]["acceptance_rates"]["beta"] == pytest.approx(0.325)
    assert out["mu"]["rhat"] is not None
