"""Independent reference implementations used only to check the package.

Everything here is deliberately written from scratch against the raw case
data, sharing no code path with the implementations under test:

* Gauss-Seidel power flow (its own admittance assembly, its own iteration)
* O(T^2) double-loop advantage estimator
* finite-difference gradients
* exhaustive minimal-controller-set search
"""

from __future__ import annotations

import itertools

import numpy as np


# -- Gauss-Seidel power flow -------------------------------------------------


def _gs_admittance(net):
    """Admittance matrix assembled independently of the package solver."""
    ids = [b.id for b in net.buses]
    pos = {bid: k for k, bid in enumerate(ids)}
    n = len(ids)
    y = np.zeros((n, n), dtype=complex)
    ratios = {}
    for t in net.transformers:
        ratios[t.branch] = 1.0 + t.tap * t.step
    for k, br in enumerate(net.branches):
        if not br.in_service:
            continue
        i = pos[br.from_bus]
        j = pos[br.to_bus]
        z = complex(br.r, br.x)
        ys = 1.0 / z
        half_b = 1j * br.b / 2.0
        a = ratios.get(k, 1.0)
        y[i, i] += (ys + half_b) / a**2
        y[j, j] += ys + half_b
        y[i, j] -= ys / a
        y[j, i] -= ys / a
    for sh in net.shunts:
        y[pos[sh.bus], pos[sh.bus]] += 1j * sh.q_mvar / net.base_mva
    for c in net.capacitors:
        if c.on:
            y[pos[c.bus], pos[c.bus]] += 1j * (c.rated_kvar / 1000.0) / net.base_mva
    return y, pos


def gauss_seidel_power_flow(net, load_scale=None, tol=1e-9, max_sweeps=30000, accel=1.6):
    """Reference AC power flow. Returns (v_mag, v_ang, converged, sweeps)."""
    y, pos = _gs_admittance(net)
    n = len(net.buses)
    scale = np.ones(len(net.loads)) if load_scale is None else np.asarray(load_scale, float)
    if scale.ndim == 0:
        scale = np.full(len(net.loads), float(scale))

    p = np.zeros(n)
    q = np.zeros(n)
    for g in net.generators:
        if g.in_service:
            p[pos[g.bus]] += g.p_mw / net.base_mva
    for b in net.batteries:
        p[pos[b.bus]] += b.power * b.p_max_mw / net.base_mva
    for s, ld in zip(scale, net.loads):
        p[pos[ld.bus]] -= s * ld.p_mw / net.base_mva
        q[pos[ld.bus]] -= s * ld.q_mvar / net.base_mva

    kinds = [b.type for b in net.buses]
    vset = {pos[g.bus]: g.v_set for g in net.generators if g.in_service}
    slack = kinds.index("slack")

    v = np.ones(n, dtype=complex)
    v[slack] = vset.get(slack, 1.0)
    for i in range(n):
        if kinds[i] == "pv":
            v[i] = vset[i]

    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        for i in range(n):
            if kinds[i] == "slack":
                continue
            row = y[i]
            if kinds[i] == "pv":
                qi = -np.imag(np.conj(v[i]) * (row @ v))
                s_i = complex(p[i], qi)
            else:
                s_i = complex(p[i], q[i])
            sigma = row @ v - row[i] * v[i]
            v_new = (np.conj(s_i / v[i]) - sigma) / row[i]
            if kinds[i] == "pv":
                v_new = vset[i] * v_new / abs(v_new)
                v[i] = v_new
            else:
                v[i] = v[i] + accel * (v_new - v[i])
        s_calc = v * np.conj(y @ v)
        dp = np.abs(s_calc.real - p)
        dq = np.abs(s_calc.imag - q)
        worst = 0.0
        for i in range(n):
            if kinds[i] == "slack":
                continue
            worst = max(worst, dp[i])
            if kinds[i] == "pq":
                worst = max(worst, dq[i])
        if worst < tol:
            converged = True
            break
    order = [pos[b.id] for b in net.buses]
    return np.abs(v)[order], np.angle(v)[order], converged, sweeps


# -- RL / numerics oracles ----------------------------------------------------


def advantages_double_loop(rewards, values, bootstrap, gamma, lam):
    """O(T^2) lambda-weighted advantage estimate for a single episode."""
    t_max = len(rewards)
    vals = list(values) + [bootstrap]
    deltas = [rewards[t] + gamma * vals[t + 1] - vals[t] for t in range(t_max)]
    adv = np.zeros(t_max)
    for t in range(t_max):
        total = 0.0
        for k in range(t, t_max):
            total += (gamma * lam) ** (k - t) * deltas[k]
        adv[t] = total
    return adv


def finite_difference_gradient(f, x, eps=1e-6):
    """Central-difference gradient of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = eps
        grad[i] = (f(x + step) - f(x - step)) / (2 * eps)
    return grad


def matrix_rank_tol(m, tol):
    """Rank by singular values with an absolute cutoff."""
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > tol))


def minimal_set_critical(matrix, tol=1e-10):
    """Exhaustive oracle: controllers present in every minimal full-rank subset.

    ``matrix`` rows are controllers. A minimal set has cardinality equal to
    the matrix rank and full row rank. Only feasible for <= ~8 rows.
    """
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    r = matrix_rank_tol(m, tol)
    if r == 0:
        return set()
    critical = set(range(n))
    for combo in itertools.combinations(range(n), r):
        if matrix_rank_tol(m[list(combo)], tol) == r:
            critical &= set(combo)
            if not critical:
                break
    return critical
