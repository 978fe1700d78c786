"""Joint power optimization for a 2-BS CoMP-set.

Strategy: enumerate the CoMP-UEs' shared SIC orders, grid-search each BS's
CoMP-UE powers, and complete every grid point with the single-cell
minimum-power rule for the non-CoMP users (cluster-head takes the remainder).
Because the completion always spends the full budget, the non-CoMP power
total each BS radiates into the other cell is known from the grid point
alone, so no fixed-point iteration over cross-cell interference is needed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .rate_model import CompAllocation, CompSetModel, all_joint_rates
from .single_cell import FEASIBILITY_TOL

_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class JointOutcome:
    allocation: CompAllocation | None
    sic_order_used: tuple[int, ...]
    joint_sum_rate: float
    comp_rates: tuple[float, ...]
    non_comp_rates: tuple[tuple[float, ...], ...]
    status: str  # "optimal" | "infeasible"
    evaluations: int = 0


def enumerate_comp_sic_orders(model: CompSetModel) -> list[tuple[int, ...]]:
    """All k! CoMP-UE decode orders, applied identically at every member BS.
    Non-CoMP users always sit above the CoMP users, so only the CoMP block
    permutes."""
    return list(itertools.permutations(range(model.n_comp)))


def check_joint_constraints(
    model: CompSetModel,
    alloc: CompAllocation,
    tol: float = FEASIBILITY_TOL,
) -> list[str]:
    """Violations of the joint problem: per-BS budgets, per-user minimum
    rates, pairwise SIC margins for the CoMP-UEs and decoder-side SIC margins
    for the non-CoMP-UEs, all with cross-BS interference terms."""
    out: list[str] = []
    theta = model.sic_threshold
    nb = model.n_bs

    for n in range(nb):
        total = alloc.bs_total(n)
        if total > model.budgets[n] + tol:
            label = "C1" if n == 0 else f"C2[{model.bs_ids[n]}]"
            out.append(
                f"{label}: power {total:.12g} exceeds budget {model.budgets[n]:.12g}"
            )
    if any(p < -tol for row in alloc.comp for p in row) or any(
        p < -tol for row in alloc.non_comp for p in row
    ):
        out.append("C1: negative power")

    comp_rates, non_comp_rates = all_joint_rates(model, alloc)
    for k, (r, req) in enumerate(zip(comp_rates, model.comp_requirements)):
        if r < req - tol:
            out.append(f"C3[{k}]: rate {r:.12g} below requirement {req:.12g}")
    for n in range(nb):
        for i, (r, req) in enumerate(
            zip(non_comp_rates[n], model.non_comp_requirements[n])
        ):
            if r < req - tol:
                label = f"C4[{i}]" if n == 0 else f"C5[{model.bs_ids[n]},{i}]"
                out.append(f"{label}: rate {r:.12g} below requirement {req:.12g}")

    w = [alloc.non_comp_total(n) for n in range(nb)]

    # CoMP-UE SIC: pairwise over decoders at or above the decoded user
    for k in range(model.n_comp - 1):
        for l in range(k, model.n_comp):
            gl = model.comp_gains[l]
            lhs = sum(alloc.comp[k][n] * gl[n] for n in range(nb))
            lhs -= sum(
                alloc.comp[kk][n] * gl[n]
                for kk in range(k + 1, model.n_comp)
                for n in range(nb)
            )
            scale = sum(model.budgets[n] * gl[n] for n in range(nb))
            lhs -= sum(w[n] * gl[n] for n in range(nb)) + 1.0
            if lhs < theta - tol - 8.0 * _EPS * scale:
                out.append(f"C6[{k},{l}]: SIC margin {lhs:.12g} below {theta:.12g}")

    # non-CoMP SIC at the decoder-side (next user's) gains
    for n in range(nb):
        for i in range(model.n_non_comp(n) - 1):
            gn = model.non_comp_gains[n][i + 1]
            diff = alloc.non_comp[n][i] - sum(alloc.non_comp[n][i + 1 :])
            lhs = diff * gn[n] - sum(w[o] * gn[o] for o in range(nb) if o != n) - 1.0
            scale = sum(model.budgets[o] * gn[o] for o in range(nb))
            if lhs < theta - tol - 8.0 * _EPS * scale:
                label = f"C7[{i}]" if n == 0 else f"C8[{model.bs_ids[n]},{i}]"
                out.append(f"{label}: SIC margin {lhs:.12g} below {theta:.12g}")
    return out


def _scan(
    model: CompSetModel,
    steps: int,
    chunk_size: int,
) -> tuple[float, tuple[tuple[float, ...], ...] | None, int]:
    """Vectorized scan over the CoMP-power grid for one SIC order.  Returns
    (best objective, comp power rows [k][n], combos scanned)."""
    nb, nk = model.n_bs, model.n_comp
    theta = model.sic_threshold
    tol = FEASIBILITY_TOL
    axes = [
        np.linspace(0.0, model.budgets[n], steps + 1) for n in range(nb) for _ in range(nk)
    ]
    shape = tuple(len(a) for a in axes)
    total = int(np.prod([len(a) for a in axes], dtype=np.int64))

    best_val = -np.inf
    best_q: tuple[tuple[float, ...], ...] | None = None

    for start in range(0, total, chunk_size):
        flat = np.arange(start, min(start + chunk_size, total), dtype=np.int64)
        coords = np.unravel_index(flat, shape)
        # q[n][k] per combo
        q = [[axes[n * nk + k][coords[n * nk + k]] for k in range(nk)] for n in range(nb)]
        q_tot = [sum(q[n]) if nk > 1 else q[n][0] for n in range(nb)]

        feas = np.ones(flat.shape, dtype=bool)
        for n in range(nb):
            feas &= q_tot[n] <= model.budgets[n] + tol
        w = [model.budgets[n] - q_tot[n] for n in range(nb)]

        with np.errstate(invalid="ignore", divide="ignore"):
            obj = np.zeros(flat.shape)
            # CoMP-UE rates under joint transmission
            for k in range(nk):
                gk = model.comp_gains[k]
                des = sum(q[n][k] * gk[n] for n in range(nb))
                inui = sum(
                    q[n][kk] * gk[n] for kk in range(k + 1, nk) for n in range(nb)
                )
                ici = sum(w[n] * gk[n] for n in range(nb))
                rate = np.log2(1.0 + des / (inui + ici + 1.0))
                feas &= rate >= model.comp_requirements[k] - tol
                obj += rate
            # CoMP-UE pairwise SIC
            for k in range(nk - 1):
                for l in range(k, nk):
                    gl = model.comp_gains[l]
                    lhs = sum(q[n][k] * gl[n] for n in range(nb))
                    lhs -= sum(
                        q[n][kk] * gl[n] for kk in range(k + 1, nk) for n in range(nb)
                    )
                    lhs -= sum(w[n] * gl[n] for n in range(nb)) + 1.0
                    feas &= lhs >= theta - tol
            # non-CoMP completion: minimum powers, head takes the remainder
            for n in range(nb):
                phi = model.n_non_comp(n)
                committed = np.asarray(q_tot[n], dtype=float)
                for i in range(phi - 1):
                    gains = model.non_comp_gains[n][i]
                    g = gains[n]
                    gains_next = model.non_comp_gains[n][i + 1]
                    avail = model.budgets[n] - committed
                    i_rate = sum(w[o] * gains[o] for o in range(nb) if o != n)
                    i_sic = sum(w[o] * gains_next[o] for o in range(nb) if o != n)
                    zeta = 2.0 ** model.non_comp_requirements[n][i] - 1.0
                    p_rate = zeta * (avail * g + i_rate + 1.0) / (g * (1.0 + zeta))
                    p_sic = (avail * gains_next[n] + i_sic + 1.0 + theta) / (
                        2.0 * gains_next[n]
                    )
                    p = np.maximum(p_rate, p_sic)
                    feas &= p >= 0.0
                    obj += np.log2(1.0 + p * g / ((avail - p) * g + i_rate + 1.0))
                    committed = committed + p
                head = model.budgets[n] - committed
                feas &= head >= -tol
                gains = model.non_comp_gains[n][phi - 1]
                i_head = sum(w[o] * gains[o] for o in range(nb) if o != n)
                head_rate = np.log2(1.0 + head * gains[n] / (i_head + 1.0))
                feas &= head_rate >= model.non_comp_requirements[n][phi - 1] - tol
                obj += head_rate

        obj = np.where(feas & np.isfinite(obj), obj, -np.inf)
        j = int(np.argmax(obj))
        if obj[j] > best_val:
            best_val = float(obj[j])
            best_q = tuple(
                tuple(float(q[n][k][j]) for n in range(nb)) for k in range(nk)
            )
    return best_val, best_q, total


def _complete_non_comp(
    model: CompSetModel, comp_rows: tuple[tuple[float, ...], ...]
) -> CompAllocation:
    """Scalar version of the grid completion for one CoMP-power point."""
    nb = model.n_bs
    theta = model.sic_threshold
    q_tot = [sum(comp_rows[k][n] for k in range(model.n_comp)) for n in range(nb)]
    w = [model.budgets[n] - q_tot[n] for n in range(nb)]
    non_comp = []
    for n in range(nb):
        phi = model.n_non_comp(n)
        committed = q_tot[n]
        row = []
        for i in range(phi - 1):
            gains = model.non_comp_gains[n][i]
            gains_next = model.non_comp_gains[n][i + 1]
            avail = model.budgets[n] - committed
            i_rate = sum(w[o] * gains[o] for o in range(nb) if o != n)
            i_sic = sum(w[o] * gains_next[o] for o in range(nb) if o != n)
            zeta = 2.0 ** model.non_comp_requirements[n][i] - 1.0
            p_rate = zeta * (avail * gains[n] + i_rate + 1.0) / (gains[n] * (1.0 + zeta))
            p_sic = (avail * gains_next[n] + i_sic + 1.0 + theta) / (2.0 * gains_next[n])
            p = max(p_rate, p_sic)
            row.append(p)
            committed += p
        row.append(model.budgets[n] - committed)
        non_comp.append(tuple(row))
    return CompAllocation(comp=comp_rows, non_comp=tuple(non_comp))


def solve_jpo(
    model: CompSetModel,
    steps_per_bs: int = 10000,
    chunk_size: int = 1 << 20,
    max_evaluations: int = 1 << 31,
) -> JointOutcome:
    """Grid search of the joint problem over all CoMP-UE SIC orders.

    The reported optimum is the feasible grid point with the largest joint
    sum rate; ties resolve to the lexicographically smallest CoMP-power
    vector, so results are reproducible.  The search visits
    k!*(steps+1)^(2k) points; ``max_evaluations`` refuses hopeless runs up
    front (two CoMP-UEs already need the grid cut to ~100 steps).
    """
    if model.n_bs != 2:
        raise ValueError("joint optimization is formulated for 2-BS CoMP-sets")
    if any(model.n_non_comp(n) == 0 for n in range(model.n_bs)):
        raise ValueError("every joint-transmission cluster needs a non-CoMP cluster-head")
    planned = math.factorial(model.n_comp) * (steps_per_bs + 1) ** (2 * model.n_comp)
    if planned > max_evaluations:
        raise ValueError(
            f"joint grid search would visit {planned:.2e} points with "
            f"{model.n_comp} CoMP-UEs at {steps_per_bs} steps; lower the grid "
            f"(limit {max_evaluations:.2e})"
        )
    best_val = -np.inf
    best_q = None
    best_order: tuple[int, ...] = tuple(range(model.n_comp))
    evaluations = 0
    for order in enumerate_comp_sic_orders(model):
        reordered = model.reorder_comp(order)
        val, qrows, scanned = _scan(reordered, steps_per_bs, chunk_size)
        evaluations += scanned
        if val > best_val:
            best_val, best_q, best_order = val, qrows, order

    if best_q is None or not math.isfinite(best_val):
        return JointOutcome(
            allocation=None,
            sic_order_used=best_order,
            joint_sum_rate=float("-inf"),
            comp_rates=(),
            non_comp_rates=(),
            status="infeasible",
            evaluations=evaluations,
        )

    winner_model = model.reorder_comp(best_order)
    alloc = _complete_non_comp(winner_model, best_q)
    comp_rates, non_comp_rates = all_joint_rates(winner_model, alloc)
    # undo the permutation so the allocation indexes the caller's CoMP order
    inverse = tuple(best_order.index(k) for k in range(model.n_comp))
    alloc_out = CompAllocation(
        comp=tuple(alloc.comp[inverse[k]] for k in range(model.n_comp)),
        non_comp=alloc.non_comp,
    )
    return JointOutcome(
        allocation=alloc_out,
        sic_order_used=best_order,
        joint_sum_rate=sum(comp_rates) + sum(r for row in non_comp_rates for r in row),
        comp_rates=tuple(comp_rates[inverse[k]] for k in range(model.n_comp)),
        non_comp_rates=non_comp_rates,
        status="optimal",
        evaluations=evaluations,
    )
