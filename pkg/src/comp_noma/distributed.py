"""Distributed per-BS power optimization for a CoMP-set, its validation
against the joint problem, the desired-signal-power closed forms used in that
comparison, and the coordinated-scheduling (CS) operating mode.

Each member BS solves its own cluster independently: CoMP-UEs first in SIC
order with the noise term split across the coordinating BSs (1/N), then the
non-CoMP users, optionally with a residual cross-cell interference offset in
their rate and SIC bindings.  The offset needs only the other BSs' budgets
and their (deterministically reproducible) CoMP-UE powers, so per-BS solves
stay independent and order-insensitive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .joint import check_joint_constraints
from .rate_model import (
    CompAllocation,
    CompSetModel,
    PowerAllocation,
    all_joint_rates,
    joint_sum_rate as _joint_sum_rate,
)
from .single_cell import FEASIBILITY_TOL, SolverOutcome


@dataclass(frozen=True)
class ValidityRecord:
    """Outcome of checking a distributed solution against the joint problem."""

    budget_ok: bool
    non_comp_rate_ok: bool
    comp_rate_ok: bool
    sic_ok: bool
    offset_used: bool
    violations: tuple[str, ...] = ()

    @property
    def all_ok(self) -> bool:
        return (
            self.budget_ok and self.non_comp_rate_ok and self.comp_rate_ok and self.sic_ok
        )


@dataclass(frozen=True)
class DistributedOutcome:
    per_bs: tuple[SolverOutcome, ...]
    allocation: CompAllocation | None
    dpo_sum_rate: float
    joint_evaluated_sum_rate: float
    comp_rates: tuple[float, ...]
    non_comp_rates: tuple[tuple[float, ...], ...]
    status: str  # "optimal" | "infeasible"
    offset_used: bool = False
    validity: ValidityRecord | None = None


def desired_power_joint(k: int, gamma_cap: float, gamma_m: float, gamma_s: float) -> float:
    """Required (noise-normalized) desired signal power for the k-th CoMP-UE
    under joint allocation: (1 - 1/G)(G_m + G_s + 1)/G^(k-1)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not (gamma_cap > 1.0):
        raise ValueError(f"rate-requirement factor must exceed 1, got {gamma_cap}")
    return (1.0 - 1.0 / gamma_cap) * (gamma_m + gamma_s + 1.0) / gamma_cap ** (k - 1)


def desired_power_distributed(
    k: int, gamma_cap: float, gamma_m: float, gamma_s: float
) -> float:
    """Distributed counterpart of ``desired_power_joint``: the per-BS solves
    each carry a full noise term, so the constant is 2 instead of 1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not (gamma_cap > 1.0):
        raise ValueError(f"rate-requirement factor must exceed 1, got {gamma_cap}")
    return (1.0 - 1.0 / gamma_cap) * (gamma_m + gamma_s + 2.0) / gamma_cap ** (k - 1)


def _comp_minimums(
    model: CompSetModel, n: int, noise_share: float
) -> tuple[list[float], list[str]]:
    """Minimum powers for the CoMP block of BS n's cluster (budget fully
    spent, noise term ``noise_share`` in the rate binding).  Independent of
    how the non-CoMP block above is split."""
    p_t = model.budgets[n]
    theta = model.sic_threshold
    comp_gains = [model.comp_gains[k][n] for k in range(model.n_comp)]
    powers: list[float] = []
    binding: list[str] = []
    committed = 0.0
    for k in range(model.n_comp):
        g = comp_gains[k]
        avail = p_t - committed
        zeta = 2.0 ** model.comp_requirements[k] - 1.0
        if g <= 0.0:
            # dead link: this BS cannot serve the CoMP-UE at any power
            p_rate = math.inf if zeta > 0.0 else 0.0
        else:
            p_rate = zeta * (avail * g + noise_share) / (g * (1.0 + zeta))
        # SIC decoders mirror the joint problem's pairwise form: every CoMP
        # decoder at or above k (the weakest of those gains binds)
        g_min = min(comp_gains[k:])
        if g_min <= 0.0:
            p_sic = math.inf  # a dead decoder link can never reach the margin
        else:
            p_sic = (avail + (1.0 + theta) / g_min) / 2.0
        if p_rate >= p_sic:
            powers.append(p_rate)
            binding.append("rate_bound")
        else:
            powers.append(p_sic)
            binding.append("sic_bound")
        committed += powers[-1]
    return powers, binding


def _non_comp_completion(
    model: CompSetModel,
    n: int,
    comp_committed: float,
    offsets_rate: list[float],
    offsets_sic: list[float],
) -> tuple[list[float], list[str]]:
    """Minimum powers for BS n's non-CoMP users below the cluster-head, with
    the head taking the remainder."""
    p_t = model.budgets[n]
    theta = model.sic_threshold
    phi = model.n_non_comp(n)
    powers: list[float] = []
    binding: list[str] = []
    committed = comp_committed
    for i in range(phi - 1):
        g = model.non_comp_gains[n][i][n]
        g_next = model.non_comp_gains[n][i + 1][n]
        avail = p_t - committed
        zeta = 2.0 ** model.non_comp_requirements[n][i] - 1.0
        p_rate = zeta * (avail * g + offsets_rate[i] + 1.0) / (g * (1.0 + zeta))
        p_sic = (avail * g_next + offsets_sic[i + 1] + 1.0 + theta) / (2.0 * g_next)
        if p_rate >= p_sic:
            powers.append(p_rate)
            binding.append("rate_bound")
        else:
            powers.append(p_sic)
            binding.append("sic_bound")
        committed += powers[-1]
    powers.append(p_t - committed)
    binding.append("cluster_head")
    return powers, binding


def _bs_outcome(
    model: CompSetModel,
    n: int,
    comp_powers: list[float],
    comp_binding: list[str],
    nc_powers: list[float],
    nc_binding: list[str],
    noise_share: float,
    offsets_rate: list[float],
) -> SolverOutcome:
    """Assemble one BS's cluster outcome and verify its own problem."""
    powers = comp_powers + nc_powers
    p_t = model.budgets[n]
    theta = model.sic_threshold
    tol = FEASIBILITY_TOL
    nk = model.n_comp
    gains = [model.comp_gains[k][n] for k in range(nk)] + [
        model.non_comp_gains[n][i][n] for i in range(model.n_non_comp(n))
    ]
    reqs = list(model.comp_requirements) + list(model.non_comp_requirements[n])

    if not all(math.isfinite(p) for p in powers) or min(powers) < 0.0:
        return SolverOutcome(
            allocation=PowerAllocation(tuple(powers), feasible=False,
                                       binding_constraints=tuple(comp_binding + nc_binding)),
            per_user_rates=(),
            sum_rate=float("-inf"),
            status="infeasible",
            binding=tuple(comp_binding + nc_binding),
            violations=("budget: minimum powers exhaust the budget before the cluster-head",),
        )

    rates = []
    violations = []
    head = len(powers) - 1
    for l, (g, req) in enumerate(zip(gains, reqs)):
        inui = sum(powers[l + 1 :]) * g
        # the cluster-head has no minimum-power binding, so no offset enters
        # its per-BS rate; it simply absorbs the remaining budget
        extra = offsets_rate[l - nk] if nk <= l < head else 0.0
        noise = noise_share if l < nk else 1.0
        rate = math.log2(1.0 + powers[l] * g / (inui + extra + noise))
        rates.append(rate)
        if rate < req - tol:
            violations.append(f"rate[{l}]: {rate:.12g} below {req:.12g}")
    if sum(powers) > p_t + tol:
        violations.append(f"budget: total {sum(powers):.12g} exceeds {p_t:.12g}")
    # SIC margins at the decoders used by the bindings
    for k in range(nk):
        diff = powers[k] - sum(powers[k + 1 :])
        g_min = min(gains[k:nk])
        if diff * g_min - 1.0 < theta - tol - 1e-12 * abs(diff) * g_min:
            violations.append(f"sic[comp {k}]")
    feasible = not violations
    return SolverOutcome(
        allocation=PowerAllocation(tuple(powers), feasible=feasible,
                                   binding_constraints=tuple(comp_binding + nc_binding)),
        per_user_rates=tuple(rates),
        sum_rate=sum(rates),
        status="optimal" if feasible else "infeasible",
        binding=tuple(comp_binding + nc_binding),
        violations=tuple(violations),
    )


def solve_dpo(
    model: CompSetModel,
    sic_order: tuple[int, ...] | None = None,
    use_offset_ici: bool = True,
) -> DistributedOutcome:
    """Distributed solve: each member BS allocates its cluster independently.

    CoMP-UE rate bindings use the noise term 1/N (N member BSs); with
    ``use_offset_ici`` every non-cluster-head non-CoMP user's rate and SIC
    bindings absorb the residual interference each other BS leaks after
    serving the common CoMP-UEs.
    """
    m = model.reorder_comp(sic_order) if sic_order is not None else model
    nb = m.n_bs
    if any(m.n_non_comp(n) == 0 for n in range(nb)):
        raise ValueError("every joint-transmission cluster needs a non-CoMP cluster-head")
    noise_share = 1.0 / nb

    comp_mins = [_comp_minimums(m, n, noise_share) for n in range(nb)]
    comp_totals = [sum(p for p in comp_mins[n][0]) for n in range(nb)]

    per_bs: list[SolverOutcome] = []
    nc_all: list[list[float]] = []
    for n in range(nb):
        phi = m.n_non_comp(n)
        if use_offset_ici:
            offsets_rate = [
                sum(
                    (m.budgets[o] - comp_totals[o]) * m.non_comp_gains[n][i][o]
                    for o in range(nb)
                    if o != n
                )
                for i in range(phi)
            ]
        else:
            offsets_rate = [0.0] * phi
        nc_powers, nc_binding = _non_comp_completion(
            m, n, comp_totals[n], offsets_rate, offsets_rate
        )
        nc_all.append(nc_powers)
        per_bs.append(
            _bs_outcome(
                m, n, comp_mins[n][0], comp_mins[n][1], nc_powers, nc_binding,
                noise_share, offsets_rate,
            )
        )

    alloc = CompAllocation(
        comp=tuple(
            tuple(comp_mins[n][0][k] for n in range(nb)) for k in range(m.n_comp)
        ),
        non_comp=tuple(tuple(row) for row in nc_all),
    )
    infeasible = [m.bs_ids[n] for n in range(nb) if per_bs[n].status != "optimal"]
    if infeasible:
        return DistributedOutcome(
            per_bs=tuple(per_bs),
            allocation=None,
            dpo_sum_rate=float("-inf"),
            joint_evaluated_sum_rate=float("-inf"),
            comp_rates=(),
            non_comp_rates=(),
            status=f"infeasible at BS {','.join(infeasible)}",
            offset_used=use_offset_ici,
        )

    comp_rates, non_comp_rates = all_joint_rates(m, alloc)
    # per-BS view: each BS guarantees its own estimate for a CoMP-UE; the
    # set-level distributed sum counts the weakest of those guarantees
    dpo_comp = [
        min(per_bs[n].per_user_rates[k] for n in range(nb)) for k in range(m.n_comp)
    ]
    dpo_sum = sum(dpo_comp) + sum(
        sum(per_bs[n].per_user_rates[m.n_comp :]) for n in range(nb)
    )
    order = sic_order if sic_order is not None else tuple(range(m.n_comp))
    inverse = tuple(order.index(k) for k in range(m.n_comp))
    return DistributedOutcome(
        per_bs=tuple(per_bs),
        allocation=CompAllocation(
            comp=tuple(alloc.comp[inverse[k]] for k in range(m.n_comp)),
            non_comp=alloc.non_comp,
        ),
        dpo_sum_rate=dpo_sum,
        joint_evaluated_sum_rate=_joint_sum_rate(m, alloc),
        comp_rates=tuple(comp_rates[inverse[k]] for k in range(m.n_comp)),
        non_comp_rates=non_comp_rates,
        status="optimal",
        offset_used=use_offset_ici,
    )


def validate_dpo(
    model: CompSetModel,
    outcome: DistributedOutcome,
    sic_order: tuple[int, ...] | None = None,
) -> ValidityRecord:
    """Check a feasible distributed solution against the joint problem's
    constraints, bucketed by condition."""
    if outcome.allocation is None:
        raise ValueError("cannot validate an infeasible distributed outcome")
    m = model.reorder_comp(sic_order) if sic_order is not None else model
    alloc = (
        outcome.allocation.reorder_comp(sic_order)
        if sic_order is not None
        else outcome.allocation
    )
    violations = check_joint_constraints(m, alloc)
    budget = [v for v in violations if v.startswith(("C1", "C2"))]
    comp_rate = [v for v in violations if v.startswith("C3")]
    nc_rate = [v for v in violations if v.startswith(("C4", "C5"))]
    sic = [v for v in violations if v.startswith(("C6", "C7", "C8"))]
    return ValidityRecord(
        budget_ok=not budget,
        non_comp_rate_ok=not nc_rate,
        comp_rate_ok=not comp_rate,
        sic_ok=not sic,
        offset_used=outcome.offset_used,
        violations=tuple(violations),
    )


def _min_power_cluster(model: CompSetModel, n: int) -> tuple[list[float], list[str], bool]:
    """Minimum-total-power allocation for BS n serving only its non-CoMP
    users: every user gets exactly what its rate and SIC bindings demand,
    top of the SIC order first.  The budget is only an upper bound."""
    theta = model.sic_threshold
    phi = model.n_non_comp(n)
    powers = [0.0] * phi
    binding = [""] * phi
    above = 0.0
    for i in range(phi - 1, -1, -1):
        g = model.non_comp_gains[n][i][n]
        zeta = 2.0 ** model.non_comp_requirements[n][i] - 1.0
        p_rate = zeta * (above * g + 1.0) / g
        if i < phi - 1:
            g_next = model.non_comp_gains[n][i + 1][n]
            p_sic = above + (1.0 + theta) / g_next
        else:
            p_sic = 0.0
        if p_rate >= p_sic:
            powers[i], binding[i] = p_rate, "rate_bound"
        else:
            powers[i], binding[i] = p_sic, "sic_bound"
        above += powers[i]
    feasible = sum(powers) <= model.budgets[n] + FEASIBILITY_TOL
    return powers, binding, feasible


def solve_cs_comp(model: CompSetModel, serving_bs: str) -> DistributedOutcome:
    """Coordinated-scheduling mode: one member BS serves the CoMP-UEs inside
    its own NOMA cluster on its full budget, while every other member BS
    power-controls down to the minimum its non-CoMP users need.

    There is no joint transmission, so CoMP-UE bindings carry the full noise
    term.  Achieved rates are then evaluated with the residual cross-cell
    interference of the actual allocation; they may fall short of the OMA
    requirements, which is the price of the power control.
    """
    if serving_bs not in model.bs_ids:
        raise ValueError(f"{serving_bs!r} is not a member of this CoMP-set")
    s = model.bs_ids.index(serving_bs)
    if model.n_non_comp(s) == 0:
        raise ValueError("the serving BS needs a non-CoMP user as cluster-head")
    nb = model.n_bs

    per_bs: list[SolverOutcome] = []
    nc_all: list[tuple[float, ...]] = []
    comp_rows_at_s: list[float] = []
    feasible = True
    for n in range(nb):
        if n == s:
            comp_powers, comp_binding = _comp_minimums(model, n, 1.0)
            zeros = [0.0] * model.n_non_comp(n)
            nc_powers, nc_binding = _non_comp_completion(
                model, n, sum(comp_powers), zeros, zeros
            )
            out = _bs_outcome(
                model, n, comp_powers, comp_binding, nc_powers, nc_binding,
                1.0, zeros,
            )
            comp_rows_at_s = comp_powers
        else:
            powers, binding, ok = _min_power_cluster(model, n)
            rates = []
            for i in range(model.n_non_comp(n)):
                g = model.non_comp_gains[n][i][n]
                inui = sum(powers[i + 1 :]) * g
                rates.append(math.log2(1.0 + powers[i] * g / (inui + 1.0)))
            out = SolverOutcome(
                allocation=PowerAllocation(tuple(powers), feasible=ok,
                                           binding_constraints=tuple(binding)),
                per_user_rates=tuple(rates),
                sum_rate=sum(rates),
                status="optimal" if ok else "infeasible",
                binding=tuple(binding),
                violations=() if ok else (
                    f"budget: minimum power {sum(powers):.12g} exceeds "
                    f"{model.budgets[n]:.12g}",
                ),
            )
            nc_powers = list(powers)
        feasible &= out.status == "optimal"
        per_bs.append(out)
        nc_all.append(tuple(nc_powers))

    if not feasible:
        bad = ",".join(model.bs_ids[n] for n in range(nb) if per_bs[n].status != "optimal")
        return DistributedOutcome(
            per_bs=tuple(per_bs),
            allocation=None,
            dpo_sum_rate=float("-inf"),
            joint_evaluated_sum_rate=float("-inf"),
            comp_rates=(),
            non_comp_rates=(),
            status=f"infeasible at BS {bad}",
        )

    alloc = CompAllocation(
        comp=tuple(
            tuple(comp_rows_at_s[k] if n == s else 0.0 for n in range(nb))
            for k in range(model.n_comp)
        ),
        non_comp=tuple(nc_all),
    )
    comp_rates, non_comp_rates = all_joint_rates(model, alloc)
    own_view = sum(out.sum_rate for out in per_bs)
    return DistributedOutcome(
        per_bs=tuple(per_bs),
        allocation=alloc,
        dpo_sum_rate=own_view,
        joint_evaluated_sum_rate=sum(comp_rates)
        + sum(r for row in non_comp_rates for r in row),
        comp_rates=comp_rates,
        non_comp_rates=non_comp_rates,
        status="optimal",
    )
