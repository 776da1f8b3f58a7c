"""Compiled sweeps over the latent pattern, branching, and excitation-kernel parameters.

Per-event arrays are indexed by the chain's current event order. ``parent``
holds indices into the same arrays (-1 for immigrants); ``cptr``/``cidx`` is
the CSR child list derived from it. Exact coordinates are events whose bin
has zero width: every move leaves them untouched.
"""
import math

import numpy as np
from numba import njit

from .._jit import EXPONENTIAL, big_g, log_g, log_g2, log_window_mass, sample_window

NEG_INF = -np.inf


@njit(cache=True)
def children_csr(parent, n):
    cptr = np.zeros(n + 1, dtype=np.int64)
    for j in range(n):
        p = parent[j]
        if p >= 0:
            cptr[p + 1] += 1
    for i in range(n):
        cptr[i + 1] += cptr[i]
    fill = cptr[:-1].copy()
    cidx = np.empty(max(cptr[n], 1), dtype=np.int64)
    for j in range(n):
        p = parent[j]
        if p >= 0:
            cidx[fill[p]] = j
            fill[p] += 1
    return cptr, cidx


@njit(cache=True)
def time_terms(i, ti, T, kind, alpha, kp, t, proc, parent, cptr, cidx):
    """Joint log-density terms that involve the time of event ``i`` (set to ``ti``)."""
    m = proc[i]
    L = alpha.shape[0]
    v = 0.0
    for l in range(L):
        v -= alpha[m, l] * big_g(kind, kp[m, l, 0], kp[m, l, 1], T - ti)
    p = parent[i]
    if p >= 0:
        q = proc[p]
        v += log_g(kind, kp[q, m, 0], kp[q, m, 1], ti - t[p])
    for k in range(cptr[i], cptr[i + 1]):
        c = cidx[k]
        l = proc[c]
        v += log_g(kind, kp[m, l, 0], kp[m, l, 1], t[c] - ti)
    return v


@njit(cache=True)
def space_terms(i, xi, yi, x, y, proc, parent, cptr, cidx, gamma):
    m = proc[i]
    v = 0.0
    p = parent[i]
    if p >= 0:
        v += log_g2(gamma[proc[p], m], xi - x[p], yi - y[p])
    for k in range(cptr[i], cptr[i + 1]):
        c = cidx[k]
        v += log_g2(gamma[m, proc[c]], x[c] - xi, y[c] - yi)
    return v


@njit(cache=True)
def time_interval(i, t, tlo, thi, parent, cptr, cidx):
    """Feasible open interval for t_i: inside its bin, after its parent, before its children."""
    lo = tlo[i]
    hi = thi[i]
    p = parent[i]
    if p >= 0 and t[p] > lo:
        lo = t[p]
    for k in range(cptr[i], cptr[i + 1]):
        tc = t[cidx[k]]
        if tc < hi:
            hi = tc
    return lo, hi


@njit(cache=True)
def _log_u(rng):
    u = rng.random()
    return math.log(u) if u > 0.0 else NEG_INF


@njit(cache=True)
def sweep_times_single(rng, T, kind, alpha, kp, t, proc, tlo, thi, parent, cptr, cidx, stats):
    """One-at-a-time uniform proposals. stats: [proposed, accepted, skipped]."""
    for i in range(t.size):
        if thi[i] <= tlo[i]:
            continue
        lo, hi = time_interval(i, t, tlo, thi, parent, cptr, cidx)
        if hi <= lo:
            stats[2] += 1
            continue
        tn = lo + (hi - lo) * rng.random()
        stats[0] += 1
        if tn <= lo or tn >= hi:
            continue
        d = (time_terms(i, tn, T, kind, alpha, kp, t, proc, parent, cptr, cidx)
             - time_terms(i, t[i], T, kind, alpha, kp, t, proc, parent, cptr, cidx))
        if _log_u(rng) < d:
            t[i] = tn
            stats[1] += 1


@njit(cache=True)
def sweep_times_generation(rng, T, kind, alpha, kp, t, proc, tlo, thi, parent, cptr, cidx,
                           gorder, gptr, newt, stats):
    """Block proposals over each generation; stats count blocks, skipped counts events."""
    for g in range(gptr.size - 1):
        d = 0.0
        moved = 0
        for k in range(gptr[g], gptr[g + 1]):
            i = gorder[k]
            newt[k] = t[i]
            if thi[i] <= tlo[i]:
                continue
            lo, hi = time_interval(i, t, tlo, thi, parent, cptr, cidx)
            if hi <= lo:
                stats[2] += 1
                continue
            tn = lo + (hi - lo) * rng.random()
            if tn <= lo or tn >= hi:
                continue
            newt[k] = tn
            moved += 1
            d += (time_terms(i, tn, T, kind, alpha, kp, t, proc, parent, cptr, cidx)
                  - time_terms(i, t[i], T, kind, alpha, kp, t, proc, parent, cptr, cidx))
        if moved == 0:
            continue
        stats[0] += 1
        if _log_u(rng) < d:
            stats[1] += 1
            for k in range(gptr[g], gptr[g + 1]):
                t[gorder[k]] = newt[k]


@njit(cache=True)
def cluster_members(root, cptr, cidx, members):
    members[0] = root
    nm = 1
    head = 0
    while head < nm:
        j = members[head]
        head += 1
        for k in range(cptr[j], cptr[j + 1]):
            members[nm] = cidx[k]
            nm += 1
    return nm


@njit(cache=True)
def cluster_proposal(rng, root, T, kind, alpha, kp, t, proc, tlo, thi, parent, cptr, cidx,
                     members, newt):
    """Draw cluster times from the offspring law restricted to each event's bin.

    Root uniform on its bin, then each child's lag from the kernel truncated to
    ``bin - t_parent`` in breadth-first order. Returns ``(n_members, log_ratio, ok)``;
    the ratio is the independence-sampler MH ratio, in which the offspring
    densities cancel and only compensators and truncation masses remain.
    """
    nm = cluster_members(root, cptr, cidx, members)
    r = root
    if thi[r] > tlo[r]:
        tr = tlo[r] + (thi[r] - tlo[r]) * rng.random()
        if tr >= thi[r]:
            return nm, NEG_INF, False
    else:
        tr = t[r]
    newt[r] = tr
    logr = 0.0
    for h in range(1, nm):
        j = members[h]
        p = parent[j]
        q = proc[p]
        m = proc[j]
        a = kp[q, m, 0]
        b = kp[q, m, 1]
        if thi[j] > tlo[j]:
            lz_new = log_window_mass(kind, a, b, tlo[j] - newt[p], thi[j] - newt[p])
            if lz_new == NEG_INF:
                return nm, NEG_INF, False
            lag = sample_window(kind, a, b, tlo[j] - newt[p], thi[j] - newt[p], rng.random())
            tj = newt[p] + lag
            if tj <= newt[p] or tj < tlo[j] or tj >= thi[j]:
                return nm, NEG_INF, False
            logr += lz_new - log_window_mass(kind, a, b, tlo[j] - t[p], thi[j] - t[p])
        else:
            tj = t[j]
            if tj <= newt[p]:
                return nm, NEG_INF, False
            logr += log_g(kind, a, b, tj - newt[p]) - log_g(kind, a, b, tj - t[p])
        newt[j] = tj
    L = alpha.shape[0]
    for h in range(nm):
        j = members[h]
        m = proc[j]
        for l in range(L):
            a = kp[m, l, 0]
            b = kp[m, l, 1]
            logr -= alpha[m, l] * (big_g(kind, a, b, T - newt[j]) - big_g(kind, a, b, T - t[j]))
    return nm, logr, True


@njit(cache=True)
def sweep_times_cluster(rng, T, kind, alpha, kp, t, proc, tlo, thi, parent, cptr, cidx,
                        roots, members, newt, stats):
    for root in roots:
        nm, logr, ok = cluster_proposal(rng, root, T, kind, alpha, kp, t, proc, tlo, thi,
                                        parent, cptr, cidx, members, newt)
        stats[0] += 1
        if not ok:
            stats[2] += 1
            continue
        if _log_u(rng) < logr:
            stats[1] += 1
            for h in range(nm):
                j = members[h]
                t[j] = newt[j]


@njit(cache=True)
def sweep_locations(rng, x, y, proc, xlo, xhi, ylo, yhi, parent, cptr, cidx, gamma, stats):
    for i in range(x.size):
        wx = xhi[i] - xlo[i]
        wy = yhi[i] - ylo[i]
        if wx <= 0.0 or wy <= 0.0:
            continue
        xn = xlo[i] + wx * rng.random()
        yn = ylo[i] + wy * rng.random()
        stats[0] += 1
        if xn >= xhi[i] or yn >= yhi[i]:
            continue
        d = (space_terms(i, xn, yn, x, y, proc, parent, cptr, cidx, gamma)
             - space_terms(i, x[i], y[i], x, y, proc, parent, cptr, cidx, gamma))
        if _log_u(rng) < d:
            x[i] = xn
            y[i] = yn
            stats[1] += 1


@njit(cache=True)
def parent_weights(i, t, x, y, proc, mu, alpha, kp, kind, gamma, spatial, area, cut, maxcut,
                   w, cand):
    """Unnormalised parent weights of event ``i``; events must be in time order.

    Candidates are earlier events within the kernel's truncation lag
    ``cut[m, l]``, written to ``cand``/``w``. Returns ``(n_candidates,
    immigrant_weight)`` where the immigrant option has weight ``mu_l / |W|``.
    """
    l = proc[i]
    nc = 0
    j = i - 1
    while j >= 0:
        dt = t[i] - t[j]
        if dt > maxcut[l]:
            break
        m = proc[j]
        if dt > 0.0 and dt <= cut[m, l] and alpha[m, l] > 0.0:
            lw = math.log(alpha[m, l]) + log_g(kind, kp[m, l, 0], kp[m, l, 1], dt)
            if spatial:
                lw += log_g2(gamma[m, l], x[i] - x[j], y[i] - y[j])
            w[nc] = math.exp(lw)
            cand[nc] = j
            nc += 1
        j -= 1
    return nc, mu[l] / area


@njit(cache=True)
def sweep_branching(rng, t, x, y, proc, parent, mu, alpha, kp, kind, gamma, spatial, area,
                    cut, maxcut, w, cand):
    """Update every parent pointer using its multinomial truncated at lags ``cut``.

    The truncated multinomial acts as an MH proposal: an event whose current
    parent lies beyond the cut keeps it (the reverse move has zero proposal
    mass), every other event is drawn from the truncated weights and always
    accepted. Passing infinite cuts gives the exact Gibbs update.
    """
    for i in range(t.size):
        p = parent[i]
        if p >= 0 and t[i] - t[p] > cut[proc[p], proc[i]]:
            continue
        nc, w0 = parent_weights(i, t, x, y, proc, mu, alpha, kp, kind, gamma, spatial, area,
                                cut, maxcut, w, cand)
        tot = w0
        for k in range(nc):
            tot += w[k]
        u = rng.random() * tot
        if nc == 0 or u < w0:
            parent[i] = -1
            continue
        acc = w0
        pick = cand[nc - 1]
        for k in range(nc):
            acc += w[k]
            if u < acc:
                pick = cand[k]
                break
        parent[i] = pick


@njit(cache=True)
def suff_stats(T, kind, kp, t, x, y, proc, parent, L, spatial):
    """Immigrant counts, pair offspring counts, compensator sums, squared offsets."""
    n_imm = np.zeros(L)
    n_off = np.zeros((L, L))
    sum_g = np.zeros((L, L))
    ss = np.zeros((L, L))
    for i in range(t.size):
        m = proc[i]
        for l in range(L):
            sum_g[m, l] += big_g(kind, kp[m, l, 0], kp[m, l, 1], T - t[i])
        p = parent[i]
        if p < 0:
            n_imm[m] += 1.0
        else:
            q = proc[p]
            n_off[q, m] += 1.0
            if spatial:
                dx = x[i] - x[p]
                dy = y[i] - y[p]
                ss[q, m] += dx * dx + dy * dy
    return n_imm, n_off, sum_g, ss


@njit(cache=True)
def pair_rate_loglik(kind, a, b, alpha_ml, T, t, proc, parent, m, l):
    """Terms of the joint log-density that depend on kernel (m, l)."""
    v = 0.0
    for i in range(t.size):
        if proc[i] == m:
            v -= alpha_ml * big_g(kind, a, b, T - t[i])
        p = parent[i]
        if p >= 0 and proc[i] == l and proc[p] == m:
            v += log_g(kind, a, b, t[i] - t[p])
    return v


@njit(cache=True)
def gamma_logpdf(x, shape, rate):
    return (shape - 1.0) * math.log(x) - rate * x


@njit(cache=True)
def mh_rates(rng, kind, kp, sigma, prior, alpha, T, t, proc, parent, prop, acc):
    """Random-walk MH on each kernel's parameters.

    Exponential: Gaussian walk on beta with a Gamma(prior[...,0], prior[...,1]) prior.
    Lomax: log-scale walks on c and p - 1 with Gamma priors
    (prior[...,0:2] for c, prior[...,2:4] for p - 1) and Jacobian terms, then a
    joint walk shifting both logs by the same amount (slot 2 of sigma/prop/acc).
    """
    L = alpha.shape[0]
    for m in range(L):
        for l in range(L):
            a = kp[m, l, 0]
            b = kp[m, l, 1]
            cur = pair_rate_loglik(kind, a, b, alpha[m, l], T, t, proc, parent, m, l)
            if kind == EXPONENTIAL:
                prop[m, l, 0] += 1
                an = a + sigma[m, l, 0] * rng.normal()
                if an <= 0.0:
                    continue
                new = pair_rate_loglik(kind, an, b, alpha[m, l], T, t, proc, parent, m, l)
                lr = (new - cur + gamma_logpdf(an, prior[m, l, 0], prior[m, l, 1])
                      - gamma_logpdf(a, prior[m, l, 0], prior[m, l, 1]))
                if _log_u(rng) < lr:
                    kp[m, l, 0] = an
                    acc[m, l, 0] += 1
            else:
                prop[m, l, 0] += 1
                an = a * math.exp(sigma[m, l, 0] * rng.normal())
                new = pair_rate_loglik(kind, an, b, alpha[m, l], T, t, proc, parent, m, l)
                lr = (new - cur + gamma_logpdf(an, prior[m, l, 0], prior[m, l, 1])
                      - gamma_logpdf(a, prior[m, l, 0], prior[m, l, 1]) + math.log(an / a))
                if _log_u(rng) < lr:
                    kp[m, l, 0] = an
                    a = an
                    cur = new
                    acc[m, l, 0] += 1
                prop[m, l, 1] += 1
                pm1 = b - 1.0
                pn = pm1 * math.exp(sigma[m, l, 1] * rng.normal())
                new = pair_rate_loglik(kind, a, pn + 1.0, alpha[m, l], T, t, proc, parent, m, l)
                lr = (new - cur + gamma_logpdf(pn, prior[m, l, 2], prior[m, l, 3])
                      - gamma_logpdf(pm1, prior[m, l, 2], prior[m, l, 3]) + math.log(pn / pm1))
                if _log_u(rng) < lr:
                    kp[m, l, 1] = pn + 1.0
                    pm1 = pn
                    cur = new
                    acc[m, l, 1] += 1
                # joint move along the ridge of near-constant (p - 1) / c
                prop[m, l, 2] += 1
                e = sigma[m, l, 2] * rng.normal()
                an = a * math.exp(e)
                pn = pm1 * math.exp(e)
                new = pair_rate_loglik(kind, an, pn + 1.0, alpha[m, l], T, t, proc, parent, m, l)
                lr = (new - cur + gamma_logpdf(an, prior[m, l, 0], prior[m, l, 1])
                      - gamma_logpdf(a, prior[m, l, 0], prior[m, l, 1])
                      + gamma_logpdf(pn, prior[m, l, 2], prior[m, l, 3])
                      - gamma_logpdf(pm1, prior[m, l, 2], prior[m, l, 3]) + 2.0 * e)
                if _log_u(rng) < lr:
                    kp[m, l, 0] = an
                    kp[m, l, 1] = pn + 1.0
                    acc[m, l, 2] += 1


@njit(cache=True)
def check_state(t, x, y, tlo, thi, xlo, xhi, ylo, yhi, parent, spatial):
    """Index of the first event violating its bin or parent order, else -1."""
    for i in range(t.size):
        if thi[i] > tlo[i]:
            if t[i] < tlo[i] or t[i] >= thi[i]:
                return i
        elif t[i] != tlo[i]:
            return i
        if spatial and xhi[i] > xlo[i]:
            if x[i] < xlo[i] or x[i] >= xhi[i] or y[i] < ylo[i] or y[i] >= yhi[i]:
                return i
        p = parent[i]
        if p >= 0 and t[p] >= t[i]:
            return i
    return -1
