import itertools
import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import logsumexp

from aggrhawkes.process import (
    BranchingError,
    BranchingStructure,
    EventPattern,
    ModelParams,
    compensator_terms,
    conditional_intensity,
    joint_loglik,
    marginal_loglik_classic,
)
from conftest import WINDOW, random_branching, random_params, random_pattern


def all_branchings(n):
    return itertools.product(*[range(-1, i) for i in range(n)])


def marginalization_error(pattern, params):
    """|log sum_Y exp(joint) - marginal| by enumerating every branching structure."""
    joint = [joint_loglik(pattern, BranchingStructure(np.array(y, dtype=np.int64)), params)
             for y in all_branchings(pattern.n)]
    return abs(logsumexp(joint) - marginal_loglik_classic(pattern, params))


def oracle_cases(count=100, seed=7):
    """Mix of univariate/bivariate, exponential/Lomax, temporal/spatial patterns with n <= 8."""
    rng = np.random.default_rng(seed)
    cases = []
    for k in range(count):
        n = {0: 8, 1: 7, 2: 7}.get(k, 1 + k % 6)
        L = 1 + (k % 3 == 2)
        kernel = "lomax" if k % 4 == 1 else "exponential"
        spatial = k % 5 in (3, 4)
        cases.append((random_pattern(rng, n, L=L, spatial=spatial),
                      random_params(rng, L, kernel, spatial)))
    return cases


def test_branching_marginalization_identity():
    worst = 0.0
    for pattern, params in oracle_cases():
        # log-scale error below 1e-10 bounds the relative error of the sums
        worst = max(worst, marginalization_error(pattern, params))
    assert worst < 1e-10


def test_joint_loglik_hand_computed():
    p = ModelParams.exponential([0.3], [[0.7]], [[1.0]])
    pat = EventPattern([0.5, 1.0], 2.0)
    G = lambda t: 1 - math.exp(-t)
    comp = -0.3 * 2.0 - 0.7 * (G(1.5) + G(1.0))
    both_imm = comp + 2 * math.log(0.3)
    child = comp + math.log(0.3) + math.log(0.7) - 0.5
    assert joint_loglik(pat, BranchingStructure([-1, -1]), p) == pytest.approx(both_imm, abs=1e-14)
    assert joint_loglik(pat, BranchingStructure([-1, 0]), p) == pytest.approx(child, abs=1e-14)


def test_compensator_matches_integrated_intensity(rng):
    params = random_params(rng, 2, "lomax")
    pat = random_pattern(rng, 6, T=4.0, L=2)
    knots = np.concatenate([[0.0], pat.t, [pat.T]])
    total = 0.0
    for l in range(2):
        for a, b in zip(knots[:-1], knots[1:]):
            if b > a:
                val, _ = integrate.quad(lambda u: conditional_intensity(params, pat, l, u), a, b,
                                        epsabs=1e-13, epsrel=1e-12)
                total += val
    expected = params.mu.sum() * pat.T + compensator_terms(pat, params).sum()
    assert total == pytest.approx(expected, rel=1e-9)


def test_spatial_intensity_zero_outside_window():
    p = ModelParams.exponential([0.3], [[0.0]], [[1.0]], gamma=[[1.0]])
    pat = EventPattern([1.0], 5.0, s=[[5, 5]], window=WINDOW)
    assert conditional_intensity(p, pat, 0, 2.0, [50, 50]) == 0.0
    assert conditional_intensity(p, pat, 0, 2.0, [5, 5]) == pytest.approx(0.3 / 100)


def test_pattern_sorted_and_validated():
    pat = EventPattern([2.0, 1.0, 3.0], 5.0, [0, 1, 0], n_processes=2)
    assert pat.t.tolist() == [1.0, 2.0, 3.0]
    assert pat.process.tolist() == [1, 0, 0]
    assert pat.counts_by_process().tolist() == [2, 1]
    with pytest.raises(ValueError, match="outside"):
        EventPattern([5.0], 5.0).validate()
    with pytest.raises(ValueError, match="tied"):
        EventPattern([1.0, 1.0], 5.0).validate()
    EventPattern([1.0, 1.0], 5.0, [0, 1], n_processes=2).validate()
    with pytest.raises(ValueError):
        EventPattern([1.0], 5.0, [2], n_processes=2)
    with pytest.raises(ValueError, match="window"):
        EventPattern([1.0], 5.0, s=[[0.0, 0.0]])


def test_branching_checks():
    pat = EventPattern([0.5, 1.0, 1.5], 2.0)
    b = BranchingStructure([-1, 0, 0])
    assert b.check(pat) is b
    assert b.immigrants.tolist() == [0]
    assert b.offspring(0).tolist() == [1, 2]
    assert b.generations().tolist() == [0, 1, 1]
    with pytest.raises(BranchingError):
        BranchingStructure([-1, 2, -1]).check(pat)
    with pytest.raises(BranchingError):
        BranchingStructure([-1, -1]).check(pat)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams.exponential([0.3], [[1.0]], [[1.0]])
    with pytest.raises(ValueError):
        ModelParams.exponential([-0.3], [[0.5]], [[1.0]])
    with pytest.warns(RuntimeWarning):
        ModelParams.exponential([0.3, 0.3], [[0.9, 0.9], [0.9, 0.9]], np.ones((2, 2)))
    p = ModelParams.lomax([0.3], [[0.7]], [[1.0]], [[3.0]])
    assert p.kind == 1 and not p.spatial
    assert list(p.flat()) == ["mu", "alpha", "c", "p"]


def test_expected_counts():
    p = ModelParams.exponential([0.3, 0.5], [[0.7, 0.15], [0.3, 0.5]], np.ones((2, 2)))
    n = p.expected_counts(500.0)
    # stationary rates solve n = mu T + alpha^T n
    np.testing.assert_allclose(n, 500 * p.mu + p.alpha.T @ n, rtol=1e-12)
    assert ModelParams.exponential([0.3], [[0.7]], [[1.0]]).expected_counts(500)[0] == \
        pytest.approx(500.0)


def test_random_branching_loglik_finite(rng):
    for _ in range(20):
        pat = random_pattern(rng, 6, spatial=True)
        params = random_params(rng, 1, spatial=True)
        assert np.isfinite(joint_loglik(pat, BranchingStructure(random_branching(rng, 6)), params))
