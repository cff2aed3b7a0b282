"""Role and Interaction Discovery for grid controllers.

Three steps over a converged base case:

1. finite-difference sensitivity extraction: one re-solved power flow per
   controller maps control increments (MW for batteries and generators,
   MVAr for capacitors, tap steps for regulators) to monitored quantities
   (bus voltages, branch real-power flows);
2. coupling-index clustering of sensitivity rows into control support
   groups (cosine similarity, single linkage);
3. permuted-LU change of basis over the controller rows: the unit block of
   L_all = L @ inv(L_top) names the essential controllers, the remaining
   rows the redundant ones, and a rank-drop test isolates the critical
   subset (controllers present in every minimal controllability set).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from .network import PowerNetwork
from .powerflow import (
    PowerFlowSolution,
    overloaded_branches,
    prepare_case,
    solve_prepared,
    violated_buses,
)

__all__ = [
    "SensitivityMatrix",
    "ControllerRoles",
    "SensitivityError",
    "compute_sensitivity",
    "coupling_index",
    "find_support_groups",
    "classify_controllers",
    "injection_controllers",
    "select_targets",
    "pivoted_lu",
    "lu_rank",
]

DEFAULT_DELTA_MW = 1.0
DEFAULT_DELTA_MVAR = 1.0
DEFAULT_RANK_TOL = 1e-10
DEFAULT_CI_THRESHOLD = 0.9


class SensitivityError(RuntimeError):
    """A perturbed power flow kept diverging; the message names the controller."""


@dataclass(frozen=True)
class SensitivityMatrix:
    controllers: tuple[str, ...]   # row labels
    targets: tuple[str, ...]       # column labels, "v:<bus>" or "flow:<branch>"
    values: np.ndarray             # (controllers, targets)
    deltas: tuple[float, ...]      # perturbation magnitude used per row

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.controllers), len(self.targets)):
            raise ValueError("sensitivity shape does not match labels")
        if not np.all(np.isfinite(v)):
            raise ValueError("sensitivity entries must be finite")

    def row(self, controller: str) -> np.ndarray:
        return self.values[self.controllers.index(controller)]


@dataclass(frozen=True)
class ControllerRoles:
    essential: tuple[str, ...]
    critical: tuple[str, ...]       # subset of essential
    redundant: tuple[str, ...]
    support_groups: tuple[tuple[str, ...], ...]
    c_e: np.ndarray                 # identity block, rank x rank
    c_r: np.ndarray                 # redundant rows in the new basis
    permutation: tuple[int, ...]    # controller row order chosen by pivoting
    rank: int

    def to_dict(self) -> dict:
        return {
            "essential": list(self.essential),
            "critical": list(self.critical),
            "redundant": list(self.redundant),
            "support_groups": [list(g) for g in self.support_groups],
            "rank": self.rank,
            "permutation": list(self.permutation),
            "c_e": self.c_e.tolist(),
            "c_r": self.c_r.tolist(),
        }


# -- step 1: sensitivities -----------------------------------------------------


def _target_value(net: PowerNetwork, sol: PowerFlowSolution, target: str) -> float:
    kind, _, key = target.partition(":")
    if kind == "v":
        return float(sol.v_mag[net.bus_index(int(key))])
    if kind == "flow":
        return float(sol.branch_flow_mw[int(key)])
    raise ValueError(f"unknown target {target!r}")


def _perturbed(net: PowerNetwork, controller: str, delta: float) -> PowerNetwork:
    """Apply a +delta control increment for one controller.

    Injection devices receive an extra bus injection (MW or MVAr) rather
    than a device-setting change, matching the linearization variable.
    Regulating transformers move by whole tap steps.
    """
    from .network import Load

    for c in net.capacitors:
        if c.id == controller:
            extra = Load(bus=c.bus, p_mw=0.0, q_mvar=-delta)
            return dc_replace(net, loads=net.loads + (extra,))
    for b in net.batteries:
        if b.id == controller:
            extra = Load(bus=b.bus, p_mw=-delta, q_mvar=0.0)
            return dc_replace(net, loads=net.loads + (extra,))
    for g in net.generators:
        if g.id == controller:
            extra = Load(bus=g.bus, p_mw=-delta, q_mvar=0.0)
            return dc_replace(net, loads=net.loads + (extra,))
    for t in net.transformers:
        if t.id == controller:
            steps = int(round(delta))
            tap = min(t.tap_max, max(t.tap_min, t.tap + steps))
            return net.with_tap(t.id, tap)
    raise KeyError(f"unknown controller {controller!r}")


def default_delta(net: PowerNetwork, controller: str) -> float:
    for c in net.capacitors:
        if c.id == controller:
            return DEFAULT_DELTA_MVAR
    for t in net.transformers:
        if t.id == controller:
            return 1.0  # one tap step
    return DEFAULT_DELTA_MW


def _solve_for(net: PowerNetwork, load_scale) -> PowerFlowSolution:
    return solve_prepared(prepare_case(net), load_scale)


def compute_sensitivity(
    net: PowerNetwork,
    controllers: list[str],
    targets: list[str],
    delta: float | None = None,
    load_scale=None,
    central: bool = False,
) -> SensitivityMatrix:
    """Finite-difference sensitivity of each target to each controller.

    Forward differences by default (one extra solve per controller);
    ``central=True`` doubles the solves for second-order accuracy. A
    diverging perturbed case is retried at delta/10 before giving up.
    """
    base = _solve_for(net, load_scale)
    if not base.converged:
        raise SensitivityError("base case power flow did not converge")
    base_vals = np.array([_target_value(net, base, t) for t in targets])

    rows = []
    deltas = []
    for ctrl in controllers:
        d = delta if delta is not None else default_delta(net, ctrl)
        if d <= 0:
            raise ValueError("perturbation must be positive")
        row = None
        for attempt_delta in (d, d / 10.0):
            if central:
                up = _solve_for(_perturbed(net, ctrl, attempt_delta / 2), load_scale)
                dn = _solve_for(_perturbed(net, ctrl, -attempt_delta / 2), load_scale)
                if not (up.converged and dn.converged):
                    continue
                up_vals = np.array([_target_value(net, up, t) for t in targets])
                dn_vals = np.array([_target_value(net, dn, t) for t in targets])
                row = (up_vals - dn_vals) / attempt_delta
            else:
                up = _solve_for(_perturbed(net, ctrl, attempt_delta), load_scale)
                if not up.converged:
                    continue
                up_vals = np.array([_target_value(net, up, t) for t in targets])
                row = (up_vals - base_vals) / attempt_delta
            deltas.append(attempt_delta)
            break
        if row is None:
            raise SensitivityError(
                f"perturbed power flow diverged for controller {ctrl!r} "
                f"(delta {d} and {d / 10.0})"
            )
        rows.append(row)
    return SensitivityMatrix(
        controllers=tuple(controllers),
        targets=tuple(targets),
        values=np.array(rows) if rows else np.zeros((0, len(targets))),
        deltas=tuple(deltas),
    )


def injection_controllers(net: PowerNetwork, blocked: set[str] | frozenset[str] = frozenset()) -> list[str]:
    """Controllers carrying the MW/MVAr sensitivities: capacitors and
    batteries that are reachable (not DoS-blocked). Regulating taps are
    control agents but not linearization variables."""
    ids = [c.id for c in net.capacitors] + [b.id for b in net.batteries]
    return [i for i in ids if i not in blocked]


def select_targets(net: PowerNetwork, sol: PowerFlowSolution, floor: int | None = None) -> list[str]:
    """Monitored quantities for a contingency case.

    Violated bus voltages and overloaded branch flows are always monitored.
    When fewer violations exist than ``floor`` (default: the number of
    injection controllers), all bus voltages are monitored as well so the
    role classification stays well-posed.
    """
    targets = [f"v:{b}" for b in violated_buses(net, sol)]
    targets += [f"flow:{k}" for k in overloaded_branches(net, sol)]
    if floor is None:
        floor = len(injection_controllers(net))
    if len(targets) < floor:
        seen = set(targets)
        for b in net.buses:
            t = f"v:{b.id}"
            if t not in seen:
                targets.append(t)
    return targets


# -- step 2: support groups ----------------------------------------------------


def coupling_index(v_i, v_j) -> float:
    """Cosine similarity between two sensitivity rows."""
    a = np.asarray(v_i, dtype=float)
    b = np.asarray(v_j, dtype=float)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("coupling index undefined for a zero vector")
    return float(np.dot(a, b) / (na * nb))


def find_support_groups(sens: SensitivityMatrix, tau: float = DEFAULT_CI_THRESHOLD) -> list[list[str]]:
    """Single-linkage grouping: rows i, j link iff CI(i, j) >= tau.

    Groups are the connected components, each sorted by row order, listed
    by their smallest member. Zero rows form singleton groups (they couple
    with nothing).
    """
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    m = len(sens.controllers)
    if m == 0:
        raise ValueError("empty sensitivity matrix")
    parent = list(range(m))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    norms = np.linalg.norm(sens.values, axis=1)
    for i in range(m):
        for j in range(i + 1, m):
            if norms[i] == 0.0 or norms[j] == 0.0:
                continue
            if coupling_index(sens.values[i], sens.values[j]) >= tau:
                union(i, j)

    groups: dict[int, list[int]] = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    ordered = sorted(groups.values(), key=lambda g: g[0])
    return [[sens.controllers[i] for i in g] for g in ordered]


# -- step 3: essential / critical / redundant -----------------------------------


def pivoted_lu(a: np.ndarray, tol: float = DEFAULT_RANK_TOL):
    """Row-pivoted LU of a rectangular matrix.

    Returns (perm, lower, upper, rank) with ``a[perm] == lower @ upper`` up
    to rounding: ``lower`` is (m, rank) unit lower-trapezoidal, ``upper`` is
    (rank, k) upper-trapezoidal. Pivots with magnitude <= tol are treated
    as zero (the column is skipped).
    """
    a = np.asarray(a, dtype=float)
    m, k = a.shape
    u = a.copy()
    lower = np.eye(m)
    perm = np.arange(m)
    r = 0
    for col in range(k):
        if r >= m:
            break
        sub = np.abs(u[r:, col])
        p = int(np.argmax(sub)) + r
        if np.abs(u[p, col]) <= tol:
            continue
        if p != r:
            u[[r, p]] = u[[p, r]]
            perm[[r, p]] = perm[[p, r]]
            lower[[r, p], :r] = lower[[p, r], :r]
        mult = u[r + 1 :, col] / u[r, col]
        lower[r + 1 :, r] = mult
        u[r + 1 :, col:] -= np.outer(mult, u[r, col:])
        u[r + 1 :, col] = 0.0
        r += 1
    return perm, lower[:, :r], u[:r], r


def lu_rank(a: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> int:
    if a.size == 0:
        return 0
    return pivoted_lu(a, tol)[3]


def classify_controllers(
    sens: SensitivityMatrix,
    rank_tol: float = DEFAULT_RANK_TOL,
    ci_threshold: float = DEFAULT_CI_THRESHOLD,
) -> ControllerRoles:
    """Partition controllers into essential / critical / redundant.

    The controller-row matrix is factored with row pivoting; the first
    ``rank`` permuted rows form the basis (essential set). The change of
    basis L @ inv(L_top) exposes an exact identity block for them and
    expresses every redundant controller as a combination of essentials.
    A controller is critical when deleting its row drops the achievable
    rank, i.e. it appears in every minimal controllability set.
    """
    a = np.asarray(sens.values, dtype=float)
    if a.size == 0 or not np.any(np.abs(a) > rank_tol):
        raise ValueError("no controllable states: sensitivity matrix is zero")

    perm, lower, upper, rank = pivoted_lu(a, rank_tol)
    l_top = lower[:rank]
    l_all = lower @ np.linalg.inv(l_top)
    c_e = l_all[:rank]
    c_r = l_all[rank:]

    essential = tuple(sens.controllers[i] for i in perm[:rank])
    redundant = tuple(sens.controllers[i] for i in perm[rank:])

    critical = []
    for pos, ctrl in zip(perm[:rank], essential):
        rest = np.delete(a, pos, axis=0)
        if lu_rank(rest, rank_tol) < rank:
            critical.append(ctrl)

    groups = find_support_groups(sens, ci_threshold)
    return ControllerRoles(
        essential=essential,
        critical=tuple(critical),
        redundant=redundant,
        support_groups=tuple(tuple(g) for g in groups),
        c_e=c_e,
        c_r=c_r,
        permutation=tuple(int(i) for i in perm),
        rank=rank,
    )
