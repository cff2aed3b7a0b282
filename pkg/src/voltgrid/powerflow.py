"""Steady-state AC power flow by Newton-Raphson in polar form.

The solver is a pure function of (network, per-bus load multipliers). A
non-converged case is returned as a degenerate solution carrying the last
iterate so callers can treat it as a voltage-collapse state instead of an
exception. ``prepare_case`` factors out the load-independent structure so
repeated solves of the same network (e.g. several stochastic load draws in
one environment step) skip re-assembly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import PowerNetwork

__all__ = [
    "PowerFlowSolution",
    "PreparedCase",
    "build_ybus",
    "prepare_case",
    "solve_power_flow",
    "solve_prepared",
    "violated_buses",
    "overloaded_branches",
]

TOLERANCE = 1e-8
MAX_ITERATIONS = 50
V_LOWER = 0.95
V_UPPER = 1.05


@dataclass(frozen=True)
class PowerFlowSolution:
    v_mag: np.ndarray           # p.u., in bus order
    v_ang: np.ndarray           # rad
    branch_current: np.ndarray  # p.u. sending-end magnitude, in branch order
    branch_flow_mw: np.ndarray  # sending-end real power, MW
    p_loss_mw: float
    p_total_mw: float           # total real demand
    converged: bool
    iterations: int
    max_mismatch: float

    @property
    def loss_ratio(self) -> float:
        """P_loss / P_total with the zero-demand case defined as 0."""
        if self.p_total_mw <= 0.0:
            return 0.0
        return self.p_loss_mw / self.p_total_mw


def _branch_admittances(net: PowerNetwork):
    """Per-branch two-port admittances (yff, yft, ytf, ytt).

    Off-nominal tap ratio t on the from side:
        [ (y_s + jb/2)/t^2   -y_s/t    ]
        [ -y_s/t              y_s + jb/2 ]
    """
    nb = len(net.branches)
    yff = np.zeros(nb, dtype=complex)
    yft = np.zeros(nb, dtype=complex)
    ytf = np.zeros(nb, dtype=complex)
    ytt = np.zeros(nb, dtype=complex)
    ratio = np.ones(nb)
    for t in net.transformers:
        ratio[t.branch] = t.ratio
    for k, br in enumerate(net.branches):
        if not br.in_service:
            continue
        ys = 1.0 / complex(br.r, br.x)
        bc = 1j * br.b / 2.0
        t = ratio[k]
        yff[k] = (ys + bc) / (t * t)
        yft[k] = -ys / t
        ytf[k] = -ys / t
        ytt[k] = ys + bc
    return yff, yft, ytf, ytt


def build_ybus(net: PowerNetwork) -> np.ndarray:
    """Dense bus admittance matrix including switched-on capacitor shunts."""
    n = len(net.buses)
    index = {b.id: i for i, b in enumerate(net.buses)}
    y = np.zeros((n, n), dtype=complex)
    yff, yft, ytf, ytt = _branch_admittances(net)
    for k, br in enumerate(net.branches):
        if not br.in_service:
            continue
        i, j = index[br.from_bus], index[br.to_bus]
        y[i, i] += yff[k]
        y[i, j] += yft[k]
        y[j, i] += ytf[k]
        y[j, j] += ytt[k]
    for sh in net.shunts:
        y[index[sh.bus], index[sh.bus]] += 1j * sh.q_mvar / net.base_mva
    for cap in net.capacitors:
        if cap.on:
            # shunt susceptance sized to deliver rated kVAr at 1.0 p.u.
            y[index[cap.bus], index[cap.bus]] += 1j * cap.rated_kvar / 1000.0 / net.base_mva
    return y


@dataclass
class PreparedCase:
    net: PowerNetwork
    ybus: np.ndarray
    slack: int
    pv: np.ndarray
    pq: np.ndarray
    pvpq: np.ndarray
    v_set: np.ndarray
    base_inj: np.ndarray       # complex p.u. from generators + batteries
    load_pos: np.ndarray       # bus position of each load
    load_s: np.ndarray         # complex p.u. at multiplier 1
    # branch quantities for post-processing
    yff: np.ndarray
    yft: np.ndarray
    ytf: np.ndarray
    ytt: np.ndarray
    br_from: np.ndarray
    br_to: np.ndarray
    # jacobian gather indices
    j_rows: np.ndarray
    j_cols: np.ndarray


def prepare_case(net: PowerNetwork) -> PreparedCase:
    n = len(net.buses)
    index = {b.id: i for i, b in enumerate(net.buses)}
    types = np.array([b.type for b in net.buses])
    slack = int(np.flatnonzero(types == "slack")[0])
    pv = np.flatnonzero(types == "pv")
    pq = np.flatnonzero(types == "pq")
    pvpq = np.sort(np.concatenate([pv, pq]))

    v_set = np.ones(n)
    for g in net.generators:
        if g.in_service:
            v_set[index[g.bus]] = g.v_set

    base_inj = np.zeros(n, dtype=complex)
    for g in net.generators:
        if g.in_service:
            base_inj[index[g.bus]] += g.p_mw / net.base_mva
    for b in net.batteries:
        base_inj[index[b.bus]] += b.p_inj_mw / net.base_mva

    load_pos = np.array([index[ld.bus] for ld in net.loads], dtype=int)
    load_s = np.array([complex(ld.p_mw, ld.q_mvar) for ld in net.loads]) / net.base_mva

    yff, yft, ytf, ytt = _branch_admittances(net)
    br_from = np.array([index[br.from_bus] for br in net.branches], dtype=int)
    br_to = np.array([index[br.to_bus] for br in net.branches], dtype=int)

    rows = np.concatenate([pvpq, pq])
    cols = np.concatenate([pvpq, pq])
    j_rows = rows[:, None]
    j_cols = cols[None, :]

    return PreparedCase(
        net=net, ybus=build_ybus(net), slack=slack, pv=pv, pq=pq, pvpq=pvpq,
        v_set=v_set, base_inj=base_inj, load_pos=load_pos, load_s=load_s,
        yff=yff, yft=yft, ytf=ytf, ytt=ytt, br_from=br_from, br_to=br_to,
        j_rows=j_rows, j_cols=j_cols,
    )


def _as_scale_vector(net: PowerNetwork, load_scale) -> np.ndarray:
    nl = len(net.loads)
    if load_scale is None:
        return np.ones(nl)
    scale = np.asarray(load_scale, dtype=float)
    if scale.ndim == 0:
        scale = np.full(nl, float(scale))
    if scale.shape != (nl,):
        raise ValueError(f"load_scale must have one entry per load ({nl}), got {scale.shape}")
    return scale


def solve_prepared(prep: PreparedCase, load_scale=None) -> PowerFlowSolution:
    net = prep.net
    scale = _as_scale_vector(net, load_scale)
    n = len(net.buses)
    ybus = prep.ybus
    s_sched = prep.base_inj.copy()
    np.subtract.at(s_sched, prep.load_pos, scale * prep.load_s)

    pv, pq, pvpq, slack = prep.pv, prep.pq, prep.pvpq, prep.slack
    npv, npq = len(pv), len(pq)
    nj = npv + 2 * npq

    vm = np.ones(n)
    vm[slack] = prep.v_set[slack]
    vm[pv] = prep.v_set[pv]
    va = np.zeros(n)

    converged = False
    max_mis = np.inf
    it = 0
    diag_idx = np.arange(n)
    for it in range(1, MAX_ITERATIONS + 1):
        v = vm * np.exp(1j * va)
        ibus = ybus @ v
        mis_c = v * np.conj(ibus) - s_sched
        f = np.concatenate([mis_c[pvpq].real, mis_c[pq].imag])
        max_mis = float(np.max(np.abs(f))) if f.size else 0.0
        if max_mis < TOLERANCE:
            converged = True
            break

        # dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
        yv = ybus * v[None, :]
        m = -yv
        m[diag_idx, diag_idx] += ibus
        ds_dva = 1j * v[:, None] * np.conj(m)
        # dS/dVm = diag(V) conj(Y diag(Vnorm)) + conj(diag(I)) diag(Vnorm)
        vn = v / vm
        ds_dvm = v[:, None] * np.conj(ybus * vn[None, :])
        ds_dvm[diag_idx, diag_idx] += np.conj(ibus) * vn

        jac = np.empty((nj, nj))
        na = npv + npq
        jac[:na, :na] = ds_dva[np.ix_(pvpq, pvpq)].real
        jac[:na, na:] = ds_dvm[np.ix_(pvpq, pq)].real
        jac[na:, :na] = ds_dva[np.ix_(pq, pvpq)].imag
        jac[na:, na:] = ds_dvm[np.ix_(pq, pq)].imag

        try:
            dx = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(dx)):
            break
        va[pvpq] -= dx[:na]
        vm[pq] -= dx[na:]
        if np.any(vm <= 0):
            # voltage collapsed through zero: hopeless iterate
            vm = np.clip(vm, 1e-3, None)
            break

    v = vm * np.exp(1j * va)
    i_from = prep.yff * v[prep.br_from] + prep.yft * v[prep.br_to]
    i_to = prep.ytf * v[prep.br_from] + prep.ytt * v[prep.br_to]
    sf = (v[prep.br_from] * np.conj(i_from)).real * net.base_mva
    st = (v[prep.br_to] * np.conj(i_to)).real * net.base_mva
    p_loss = float(np.sum(sf + st))

    p_total = float(np.sum(scale * prep.load_s.real) * net.base_mva)
    return PowerFlowSolution(
        v_mag=vm,
        v_ang=va,
        branch_current=np.abs(i_from),
        branch_flow_mw=sf,
        p_loss_mw=p_loss if converged else max(p_loss, 0.0),
        p_total_mw=p_total,
        converged=converged,
        iterations=it,
        max_mismatch=max_mis,
    )


def solve_power_flow(net: PowerNetwork, load_scale=None) -> PowerFlowSolution:
    """Newton-Raphson power flow from a flat start.

    ``load_scale`` is a per-load multiplier vector (or scalar) in [0, 1]
    applied to both P and Q of each load.
    """
    return solve_prepared(prepare_case(net), load_scale)


def violated_buses(net: PowerNetwork, sol: PowerFlowSolution,
                   lower: float = V_LOWER, upper: float = V_UPPER) -> list[int]:
    """Bus ids whose voltage magnitude lies outside [lower, upper]."""
    out = []
    for b, v in zip(net.buses, sol.v_mag):
        if v < lower or v > upper:
            out.append(b.id)
    return out


def overloaded_branches(net: PowerNetwork, sol: PowerFlowSolution) -> list[int]:
    """Branch indices whose apparent sending-end loading exceeds the rating."""
    index = {b.id: i for i, b in enumerate(net.buses)}
    out = []
    for k, br in enumerate(net.branches):
        if not br.in_service or br.rating_mva <= 0:
            continue
        mva = sol.branch_current[k] * sol.v_mag[index[br.from_bus]] * net.base_mva
        if mva > br.rating_mva:
            out.append(k)
    return out
