import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aggrhawkes import BinSpec, EventPattern, ModelParams, aggregate, simulate_hawkes
from aggrhawkes.aggregate import is_consistent
from aggrhawkes.diagnostics import rhat
from aggrhawkes.mcmc import (Priors, SamplerConfig, init_state, latent_data, run_chain,
                             sample_posterior, sweep)
from aggrhawkes.mcmc.sampler import ConstraintViolation


@pytest.fixture(scope="module")
def set1_data():
    params = ModelParams.exponential([0.3], [[0.7]], [[1.0]])
    pattern, _ = simulate_hawkes(params, 500.0, seed=2024)
    return pattern, aggregate(pattern, BinSpec.uniform(1.0, 500.0))


def test_init_fills_bins():
    pat = EventPattern([0.2, 0.7, 1.4], 2.0)
    counts = aggregate(pat, BinSpec.uniform(1.0, 2.0))
    state = init_state(counts, Priors(), SamplerConfig(), np.random.default_rng(0))
    assert state.t.size == 3
    assert np.sum(state.t < 1) == 2 and np.sum((state.t >= 1) & (state.t < 2)) == 1
    assert np.all(state.parent == -1)
    assert is_consistent(state.pattern(), counts)


def test_init_deterministic():
    counts = aggregate(EventPattern([0.2, 0.7, 1.4], 2.0), BinSpec.uniform(1.0, 2.0))
    a = init_state(counts, Priors(), SamplerConfig(), np.random.default_rng(4))
    b = init_state(counts, Priors(), SamplerConfig(), np.random.default_rng(4))
    assert np.array_equal(a.t, b.t) and np.array_equal(a.mu, b.mu) and np.array_equal(a.kp, b.kp)


def test_empty_counts_only_background_moves():
    counts = aggregate(EventPattern([], 10.0), BinSpec.uniform(1.0, 10.0))
    cfg = SamplerConfig(n_iter=300, burn_in=100, n_chains=1, seed=1)
    samples = run_chain(counts, Priors(), cfg)
    mu = samples.pooled("mu")
    # Gamma(1, 10.01) posterior
    assert mu.mean() == pytest.approx(1 / 10.01, rel=0.3)
    assert samples.draws[0].shape[0] == cfg.n_keep


@pytest.mark.parametrize("thin", [1, 3])
def test_row_count(thin):
    counts = aggregate(EventPattern([0.2, 0.7, 1.4, 5.5], 8.0), BinSpec.uniform(1.0, 8.0))
    cfg = SamplerConfig(n_iter=100, burn_in=40, thin=thin, n_chains=2, seed=0)
    samples = sample_posterior(counts, config=cfg)
    assert [d.shape[0] for d in samples.draws] == [cfg.n_keep] * 2
    assert cfg.n_keep == (100 - 40) // thin


def test_seeded_runs_identical():
    counts = aggregate(EventPattern([0.2, 0.7, 1.4, 5.5, 5.6], 8.0), BinSpec.uniform(2.0, 8.0))
    cfg = SamplerConfig(n_iter=200, burn_in=50, seed=9, strategy="cluster")
    a, b = sample_posterior(counts, config=cfg), sample_posterior(counts, config=cfg)
    assert all(np.array_equal(x, y) for x, y in zip(a.draws, b.draws))
    c = sample_posterior(counts, config=SamplerConfig(n_iter=200, burn_in=50, seed=10))
    assert not np.array_equal(a.draws[0], c.draws[0])


def test_exact_data_latent_moves_are_noops():
    params = ModelParams.exponential([0.5], [[0.5]], [[2.0]])
    pat, _ = simulate_hawkes(params, 40.0, seed=3)
    for strategy in ("one", "generation", "cluster"):
        cfg = SamplerConfig(strategy=strategy)
        state = init_state(pat, Priors(), cfg, np.random.default_rng(0))
        before = state.t.copy()
        rng = np.random.default_rng(1)
        for _ in range(20):
            sweep(state, Priors(), cfg, rng)
        state.resort()
        assert np.array_equal(np.sort(state.t), np.sort(before))


def test_check_rejects_broken_state():
    counts = aggregate(EventPattern([0.2, 0.7, 1.4], 2.0), BinSpec.uniform(1.0, 2.0))
    state = init_state(counts, Priors(), SamplerConfig(), np.random.default_rng(0))
    state.t[0] = 1.5
    with pytest.raises(ConstraintViolation):
        state.check()


@st.composite
def _small_problem(draw):
    spatial = draw(st.booleans())
    L = draw(st.integers(1, 2))
    n = draw(st.integers(0, 12))
    T = 6.0
    t = draw(st.lists(st.floats(0, T, exclude_max=True), min_size=n, max_size=n))
    proc = draw(st.lists(st.integers(0, L - 1), min_size=n, max_size=n))
    if spatial:
        xy = draw(st.lists(st.tuples(st.floats(0, 4, exclude_max=True),
                                     st.floats(0, 4, exclude_max=True)),
                           min_size=n, max_size=n))
        pat = EventPattern(t, T, proc, np.array(xy).reshape(n, 2), (0, 4, 0, 4), L)
    else:
        pat = EventPattern(t, T, proc, n_processes=L)
    dt = draw(st.sampled_from([0.5, 1.0, 2.5]))
    spec = BinSpec.uniform(dt, T, 2.0 if spatial else None, (0, 4, 0, 4) if spatial else None, L)
    return aggregate(pat, spec), draw(st.sampled_from(["one", "generation", "cluster"])), \
        draw(st.sampled_from(["exponential", "lomax"]))


@settings(max_examples=40, deadline=None)
@given(_small_problem(), st.integers(0, 2**31))
def test_sweeps_preserve_constraints(problem, seed):
    counts, strategy, kernel = problem
    cfg = SamplerConfig(strategy=strategy, kernel=kernel)
    rng = np.random.default_rng(seed)
    state = init_state(counts, Priors(), cfg, rng)
    for _ in range(15):
        sweep(state, Priors(), cfg, rng)
        state.check()
        state.resort()
        assert is_consistent(state.pattern(), counts)
        state.branching().check(state.pattern())


def test_temporal_only_fit_of_spatial_counts():
    pat = EventPattern([0.5, 1.5, 2.5], 4.0, s=[[1, 1], [2, 2], [3, 3]], window=(0, 4, 0, 4))
    counts = aggregate(pat, BinSpec.uniform(1.0, 4.0, 2.0, (0, 4, 0, 4)))
    data = latent_data(counts, SamplerConfig(spatial=False))
    assert not data.spatial and data.n == 3
    with pytest.raises(ValueError):
        latent_data(aggregate(EventPattern([0.5], 4.0), BinSpec.uniform(1.0, 4.0)),
                    SamplerConfig(spatial=True))


@pytest.mark.parametrize("bad", [dict(burn_in=10, n_iter=10), dict(q_trunc=0.5),
                                 dict(strategy="gibbs"), dict(kernel="power"), dict(thin=0),
                                 dict(full_scan_every=0)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        SamplerConfig(**bad)


def test_config_round_trip():
    cfg = SamplerConfig(strategy="by-cluster", kernel="lomax", thin=2, full_scan_every=7)
    assert SamplerConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        SamplerConfig.from_dict({"iters": 3})
    pri = Priors(beta=(1.0, 1.0))
    assert Priors.from_dict(pri.to_dict()) == pri
    with pytest.raises(ValueError):
        Priors(mu=(0.0, 1.0))


@pytest.mark.slow
def test_converged_run_parameter_set_1(set1_data):
    _, counts = set1_data
    samples = sample_posterior(counts, config=SamplerConfig(n_iter=4000, burn_in=2000, seed=5))
    for name in samples.names:
        assert rhat(samples.chains(name)) < 1.1
    for acc in samples.acceptance:
        assert 0.2 <= acc["beta"] <= 0.4
    assert abs(samples.pooled("alpha").mean() - 0.7) < 0.15
