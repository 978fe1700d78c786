"""Sum-rate-maximizing power allocation for one NOMA cluster under budget,
per-user minimum-rate and SIC constraints.

The optimal structure (KKT, the problem is convex for ascending-gain SIC
order): every user except the cluster-head receives the minimum power that
satisfies its rate and SIC constraints with the budget fully spent, and the
cluster-head absorbs the remainder.  A brute-force simplex grid search is
provided as an independent verification oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rate_model import NomaCluster, PowerAllocation, cluster_rates

FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class SolverOutcome:
    allocation: PowerAllocation
    per_user_rates: tuple[float, ...]
    sum_rate: float
    status: str  # "optimal" | "infeasible"
    binding: tuple[str, ...] = ()  # per user: rate_bound | sic_bound | cluster_head
    violations: tuple[str, ...] = ()


def default_rate_requirements(cluster: NomaCluster) -> tuple[float, ...]:
    """OMA-equivalent minimum rates: equal power and spectrum split among the
    M cluster users."""
    m = cluster.size
    return tuple(
        math.log2(1.0 + cluster.power_budget * g) / m for g in cluster.gains
    )


def _require_ascending(gains: tuple[float, ...]) -> None:
    for a, b in zip(gains, gains[1:]):
        if b <= a:
            raise ValueError(
                "solver requires strictly ascending channel gains "
                f"(got {a} before {b}); perturb ties at the caller"
            )


def check_constraints(
    cluster: NomaCluster,
    powers: tuple[float, ...],
    tol: float = FEASIBILITY_TOL,
) -> list[str]:
    """All violated constraints of the cluster power-allocation problem.

    For strictly ascending gains the SIC row for user i is checked at the
    next user's (decoder-side) gain; for any other SIC order the general
    pairwise form is checked over every decoder at or above i.
    """
    if len(powers) != cluster.size:
        raise ValueError("powers must cover every user")
    g = cluster.gains
    theta = cluster.sic_threshold
    m = cluster.size
    out: list[str] = []
    total = sum(powers)
    if total > cluster.power_budget + tol:
        out.append(
            f"C1: total power {total:.12g} exceeds budget {cluster.power_budget:.12g}"
        )
    if any(p < -tol for p in powers):
        out.append("C1: negative power")
    rates = cluster_rates(cluster, powers)
    for i, (r, req) in enumerate(zip(rates, cluster.rate_requirements)):
        if r < req - tol:
            out.append(f"C2[{i}]: rate {r:.12g} below requirement {req:.12g}")
    ascending = all(b > a for a, b in zip(g, g[1:]))
    for i in range(m - 1):
        diff = powers[i] - sum(powers[i + 1 :])
        decoders = [i + 1] if ascending else range(i, m)
        for q in decoders:
            lhs = diff * g[q] - 1.0
            # float-rounding guard scaled to the constraint's magnitude
            guard = tol + 4.0 * np.finfo(float).eps * abs(diff) * g[q]
            if lhs < theta - guard:
                label = f"C3[{i}]" if ascending else f"C3[{i},{q}]"
                out.append(f"{label}: SIC margin {lhs:.12g} below {theta:.12g}")
    return out


def solve_closed_form(cluster: NomaCluster) -> SolverOutcome:
    """Closed-form optimum for strictly ascending gains: minimum power to
    every user but the cluster-head, remainder to the cluster-head.

    With S the power already committed to lower-SIC users and the budget
    fully spent (so the users above i hold p_t - S - p_i), the rate
    constraint binds at p_i = z*((p_t-S)*g_i + 1)/(g_i*(1+z)) with
    z = 2^R'_i - 1, and the SIC constraint binds at
    p_i = ((p_t-S)*g_{i+1} + 1 + theta)/(2*g_{i+1}).
    """
    _require_ascending(cluster.gains)
    m = cluster.size
    p_t = cluster.power_budget
    theta = cluster.sic_threshold
    g = cluster.gains

    powers = [0.0] * m
    binding = [""] * m
    committed = 0.0
    for i in range(m - 1):
        avail = p_t - committed
        zeta = 2.0 ** cluster.rate_requirements[i] - 1.0
        p_rate = zeta * (avail * g[i] + 1.0) / (g[i] * (1.0 + zeta))
        p_sic = (avail * g[i + 1] + 1.0 + theta) / (2.0 * g[i + 1])
        if p_rate >= p_sic:
            powers[i], binding[i] = p_rate, "rate_bound"
        else:
            powers[i], binding[i] = p_sic, "sic_bound"
        committed += powers[i]

    head = p_t - committed
    powers[m - 1] = head
    binding[m - 1] = "cluster_head"

    if head < 0.0:
        return SolverOutcome(
            allocation=PowerAllocation(tuple(powers), feasible=False),
            per_user_rates=(),
            sum_rate=float("-inf"),
            status="infeasible",
            binding=tuple(binding),
            violations=("C1: minimum powers exhaust the budget before the cluster-head",),
        )

    rates = cluster_rates(cluster, tuple(powers))
    violations = check_constraints(cluster, tuple(powers))
    feasible = not violations
    return SolverOutcome(
        allocation=PowerAllocation(tuple(powers), feasible=feasible, binding_constraints=tuple(binding)),
        per_user_rates=rates,
        sum_rate=sum(rates) if feasible else float("-inf"),
        status="optimal" if feasible else "infeasible",
        binding=tuple(binding),
        violations=tuple(violations),
    )


def grid_oracle(cluster: NomaCluster, step_count: int) -> SolverOutcome:
    """Exhaustive grid search with step p_t/step_count, M <= 3 only.

    The search covers the budget-exhausting face of the simplex: any feasible
    point with slack is dominated, because moving the slack to the lowest-SIC
    user raises its rate and loosens every constraint it appears in.
    """
    m = cluster.size
    if m > 3:
        raise ValueError("grid oracle is limited to clusters of at most 3 users")
    if step_count < 1:
        raise ValueError("step_count must be >= 1")
    p_t = cluster.power_budget
    theta = cluster.sic_threshold
    g = np.asarray(cluster.gains)
    reqs = np.asarray(cluster.rate_requirements)
    zeta = np.exp2(reqs) - 1.0
    tol = FEASIBILITY_TOL
    step = p_t / step_count
    axis = np.linspace(0.0, p_t, step_count + 1)

    best_val = -np.inf
    best_powers: tuple[float, ...] | None = None

    def consider(p_cols: list[np.ndarray]) -> None:
        nonlocal best_val, best_powers
        # rate constraints in affine form: p_i*g_i - zeta_i*(INUI*g_i + 1) >= 0
        tail = np.zeros_like(p_cols[0])
        ok = np.ones(p_cols[0].shape, dtype=bool)
        rates_sum = np.zeros_like(p_cols[0])
        for i in range(m - 1, -1, -1):
            sinr = p_cols[i] * g[i] / (tail * g[i] + 1.0)
            rates_sum += np.log2(1.0 + sinr)
            ok &= p_cols[i] * g[i] - zeta[i] * (tail * g[i] + 1.0) >= -tol * g[i]
            if i < m - 1:
                diff = p_cols[i] - tail
                ok &= diff * g[i + 1] - 1.0 >= theta - tol - 4.0 * np.finfo(float).eps * np.abs(diff) * g[i + 1]
            tail = tail + p_cols[i]
        rates_sum = np.where(ok, rates_sum, -np.inf)
        j = int(np.argmax(rates_sum))
        if rates_sum[j] > best_val:
            best_val = float(rates_sum[j])
            best_powers = tuple(float(c[j]) for c in p_cols)

    if m == 1:
        consider([axis])
    elif m == 2:
        consider([axis, p_t - axis])
    else:
        for chunk_start in range(0, step_count + 1, 64):
            a0 = axis[chunk_start : chunk_start + 64]
            p0, p1 = np.meshgrid(a0, axis, indexing="ij")
            p2 = p_t - p0 - p1
            keep = p2 >= 0.0
            if not keep.any():
                continue
            consider([p0[keep], p1[keep], p2[keep]])

    if best_powers is None or best_val == -np.inf:
        return SolverOutcome(
            allocation=PowerAllocation((), feasible=False),
            per_user_rates=(),
            sum_rate=float("-inf"),
            status="infeasible",
            violations=("no feasible point on the grid",),
        )
    rates = cluster_rates(cluster, best_powers)
    return SolverOutcome(
        allocation=PowerAllocation(best_powers, feasible=True),
        per_user_rates=rates,
        sum_rate=sum(rates),
        status="optimal",
    )
