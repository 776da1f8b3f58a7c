import numpy as np
import pytest

from aggrhawkes.process import EventPattern, ModelParams

WINDOW = (0.0, 10.0, 0.0, 10.0)


def random_params(rng, L=1, kernel="exponential", spatial=False):
    mu = rng.uniform(0.2, 1.0, L)
    alpha = rng.uniform(0.05, 0.9, (L, L)) / L
    gamma = rng.uniform(0.5, 2.0, (L, L)) if spatial else None
    if kernel == "exponential":
        return ModelParams.exponential(mu, alpha, rng.uniform(0.5, 3.0, (L, L)), gamma)
    return ModelParams.lomax(mu, alpha, rng.uniform(0.3, 2.0, (L, L)),
                             rng.uniform(2.2, 4.0, (L, L)), gamma)


def random_pattern(rng, n, T=5.0, L=1, spatial=False):
    t = np.sort(rng.uniform(0, T, n))
    proc = rng.integers(0, L, n)
    s = rng.uniform(0, 10, (n, 2)) if spatial else None
    return EventPattern(t, T, proc, s, WINDOW if spatial else None, L)


def random_branching(rng, n):
    """Parent of event i drawn uniformly from {immigrant, 0..i-1}."""
    return np.array([rng.integers(-1, i) for i in range(n)], dtype=np.int64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def make_state(pattern, params, parent, tlo=None, thi=None, xlo=None, xhi=None, ylo=None,
               yhi=None):
    """ChainState over ``pattern`` with the given bins (default: exact, zero width)."""
    from aggrhawkes.mcmc.sampler import ChainState, LatentData

    data = LatentData.from_pattern(pattern)
    n = pattern.n
    pick = lambda v, d: d.copy() if v is None else np.asarray(v, dtype=float)
    data.tlo, data.thi = pick(tlo, pattern.t), pick(thi, pattern.t)
    if pattern.spatial:
        data.xlo, data.xhi = pick(xlo, pattern.s[:, 0]), pick(xhi, pattern.s[:, 0])
        data.ylo, data.yhi = pick(ylo, pattern.s[:, 1]), pick(yhi, pattern.s[:, 1])
    L = params.L
    gamma = params.gamma.copy() if params.gamma is not None else np.ones((L, L))
    x = pattern.s[:, 0].copy() if pattern.spatial else np.zeros(n)
    y = pattern.s[:, 1].copy() if pattern.spatial else np.zeros(n)
    return ChainState(data, params.kind, params.mu.copy(), params.alpha.copy(),
                      params.kernel_params.copy(), gamma, pattern.t.copy(), x, y,
                      pattern.process.copy(), data.tlo.copy(), data.thi.copy(), data.xlo.copy(),
                      data.xhi.copy(), data.ylo.copy(), data.yhi.copy(),
                      np.asarray(parent, dtype=np.int64).copy(), np.full((L, L, 3), 0.1))


def state_joint(state, t=None, x=None, y=None, params=None):
    """joint_loglik of a state's arrays, allowing out-of-order times."""
    from aggrhawkes.process import BranchingStructure, EventPattern, joint_loglik

    t = state.t if t is None else t
    x = state.x if x is None else x
    y = state.y if y is None else y
    order = np.argsort(t, kind="stable")
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    par = state.parent[order]
    par = np.where(par >= 0, inv[np.maximum(par, 0)], -1)
    d = state.data
    s = np.column_stack([x, y])[order] if d.spatial else None
    pat = EventPattern(t[order], d.T, state.proc[order], s, d.window, d.L)
    return joint_loglik(pat, BranchingStructure(par), params or state.params())


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def record():
    """Register the pass/fail line of an acceptance criterion; printed at session end."""
    def _record(number: int, ok: bool, detail: str):
        _CRITERIA[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_CRITERIA[number])
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
