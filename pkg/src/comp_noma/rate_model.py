"""Achievable-rate formulas for single-cell NOMA, OMA baselines, coordinated
multi-cell (CoMP) sets, and the distributed per-BS view.

All rates are per unit resource block (bits/s/Hz); powers are in Watts and
channel gains are noise-normalized, so every SINR denominator carries a bare
"+1" noise term.  Every function here is pure and reentrant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class NomaCluster:
    """One downlink NOMA cluster at a single BS.

    ``gains`` are listed in SIC decode order (index M-1 is the cluster-head,
    who cancels all intra-cluster interference).  The sum-rate solver requires
    strictly ascending gains; the rate formulas themselves do not.
    """

    gains: tuple[float, ...]
    power_budget: float
    rate_requirements: tuple[float, ...]
    sic_threshold: float = 0.0

    def __post_init__(self) -> None:
        if len(self.gains) != len(self.rate_requirements):
            raise ValueError("gains and rate_requirements must have equal length")
        if not self.gains:
            raise ValueError("cluster needs at least one user")
        if not (self.power_budget > 0.0):
            raise ValueError(f"power budget must be positive, got {self.power_budget}")
        if any(g <= 0.0 for g in self.gains):
            raise ValueError("channel gains must be positive")
        if self.sic_threshold < 0.0:
            raise ValueError("sic threshold must be nonnegative")

    @property
    def size(self) -> int:
        return len(self.gains)


@dataclass(frozen=True)
class PowerAllocation:
    """Per-user transmit powers for one cluster, with feasibility verdict."""

    powers: tuple[float, ...]
    feasible: bool = True
    binding_constraints: tuple[str, ...] = ()


@dataclass(frozen=True)
class CompSetModel:
    """Solver-facing view of one CoMP-set.

    Index conventions: ``n`` ranges over member BSs (index 0 is the macro
    cell when present), ``k`` over CoMP-UEs in their shared SIC order, and
    ``i`` over a BS's non-CoMP-UEs in ascending order of desired gain.  In
    every NOMA cluster the CoMP-UEs sit below the non-CoMP-UEs in SIC order.
    """

    bs_ids: tuple[str, ...]
    budgets: tuple[float, ...]
    comp_ues: tuple[str, ...]
    comp_gains: tuple[tuple[float, ...], ...]  # [k][n]
    comp_requirements: tuple[float, ...]
    non_comp_ues: tuple[tuple[str, ...], ...]  # [n][i]
    non_comp_gains: tuple[tuple[tuple[float, ...], ...], ...]  # [n][i][n']
    non_comp_requirements: tuple[tuple[float, ...], ...]  # [n][i]
    sic_threshold: float = 0.0

    def __post_init__(self) -> None:
        nb = len(self.bs_ids)
        if nb not in (2, 3):
            raise ValueError(f"CoMP-set must have 2 or 3 member BSs, got {nb}")
        if len(self.budgets) != nb or any(p <= 0.0 for p in self.budgets):
            raise ValueError("need one positive budget per member BS")
        if not self.comp_ues:
            raise ValueError("need at least one CoMP-UE")
        for row in self.comp_gains:
            if len(row) != nb or any(g < 0.0 for g in row) or not any(g > 0.0 for g in row):
                raise ValueError(
                    "each CoMP-UE needs nonnegative gains with at least one live link"
                )
        if len(self.comp_gains) != len(self.comp_ues):
            raise ValueError("comp_gains must align with comp_ues")
        if len(self.comp_requirements) != len(self.comp_ues):
            raise ValueError("comp_requirements must align with comp_ues")
        if not (
            len(self.non_comp_ues)
            == len(self.non_comp_gains)
            == len(self.non_comp_requirements)
            == nb
        ):
            raise ValueError("non-CoMP data must align with member BSs")
        for n in range(nb):
            ues, gains, reqs = (
                self.non_comp_ues[n],
                self.non_comp_gains[n],
                self.non_comp_requirements[n],
            )
            if len(gains) != len(ues) or len(reqs) != len(ues):
                raise ValueError("non-CoMP gains/requirements must align with users")
            for i, row in enumerate(gains):
                if len(row) != nb or any(g < 0.0 for g in row) or row[n] <= 0.0:
                    raise ValueError(
                        "non-CoMP gains need a positive desired link and "
                        "nonnegative cross links"
                    )
            desired = [gains[i][n] for i in range(len(ues))]
            if any(b <= a for a, b in zip(desired, desired[1:])):
                raise ValueError(
                    f"non-CoMP-UEs at BS {self.bs_ids[n]} must be in strictly "
                    "ascending desired-gain order"
                )
        if self.sic_threshold < 0.0:
            raise ValueError("sic threshold must be nonnegative")

    @property
    def n_bs(self) -> int:
        return len(self.bs_ids)

    @property
    def n_comp(self) -> int:
        return len(self.comp_ues)

    def n_non_comp(self, n: int) -> int:
        return len(self.non_comp_ues[n])

    def cluster_size(self, n: int) -> int:
        return self.n_comp + self.n_non_comp(n)

    def reorder_comp(self, order: tuple[int, ...]) -> "CompSetModel":
        """New model with CoMP-UEs permuted into the given SIC order."""
        if sorted(order) != list(range(self.n_comp)):
            raise ValueError(f"not a permutation of CoMP-UEs: {order}")
        return replace(
            self,
            comp_ues=tuple(self.comp_ues[k] for k in order),
            comp_gains=tuple(self.comp_gains[k] for k in order),
            comp_requirements=tuple(self.comp_requirements[k] for k in order),
        )


@dataclass(frozen=True)
class CompAllocation:
    """Transmit powers for one CoMP-set: comp[k][n] and non_comp[n][i]."""

    comp: tuple[tuple[float, ...], ...]
    non_comp: tuple[tuple[float, ...], ...]

    def comp_total(self, n: int) -> float:
        return sum(row[n] for row in self.comp)

    def non_comp_total(self, n: int) -> float:
        return sum(self.non_comp[n])

    def bs_total(self, n: int) -> float:
        return self.comp_total(n) + self.non_comp_total(n)

    def total(self) -> float:
        return sum(self.bs_total(n) for n in range(len(self.non_comp)))

    def reorder_comp(self, order: tuple[int, ...]) -> "CompAllocation":
        """Permute the CoMP-UE rows to match a reordered model."""
        return CompAllocation(
            comp=tuple(self.comp[k] for k in order), non_comp=self.non_comp
        )


# --- single-cell formulas ----------------------------------------------------

def noma_rate(cluster: NomaCluster, powers: tuple[float, ...], i: int) -> float:
    """Rate of user i in a single-cell cluster: the desired signal over the
    uncanceled powers of higher-SIC users plus unit noise."""
    if len(powers) != cluster.size:
        raise ValueError("powers must cover every user")
    if not (0 <= i < cluster.size):
        raise IndexError(i)
    g = cluster.gains[i]
    inui = sum(powers[i + 1 :]) * g
    return math.log2(1.0 + powers[i] * g / (inui + 1.0))


def cluster_rates(cluster: NomaCluster, powers: tuple[float, ...]) -> tuple[float, ...]:
    return tuple(noma_rate(cluster, powers, i) for i in range(cluster.size))


def oma_rate(p_t: float, gain: float, m: int) -> float:
    """Orthogonal baseline with equal spectrum and power split among m users."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return math.log2(1.0 + p_t * gain) / m


def rate_distributed(
    cluster: NomaCluster,
    powers: tuple[float, ...],
    l: int,
    comp_bs_count: int,
    is_comp: bool,
) -> float:
    """Per-BS rate in the distributed view.  CoMP users see the noise power
    split across the coordinating BSs (term 1/N instead of 1)."""
    if comp_bs_count < 1:
        raise ValueError("comp_bs_count must be >= 1")
    if len(powers) != cluster.size:
        raise ValueError("powers must cover every user")
    g = cluster.gains[l]
    noise = 1.0 / comp_bs_count if is_comp else 1.0
    inui = sum(powers[l + 1 :]) * g
    return math.log2(1.0 + powers[l] * g / (inui + noise))


def sinr_inui_approx(powers: tuple[float, ...], l: int) -> float:
    """High-interference SINR approximation: own power over the summed powers
    of higher-SIC users.  Undefined for the cluster-head."""
    rest = sum(powers[l + 1 :])
    if l >= len(powers) - 1 or rest <= 0.0:
        raise ValueError("user has no higher-SIC interferers")
    return powers[l] / rest


def offset_ici(
    interferer_budget: float,
    comp_powers_at_interferer: tuple[float, ...] | list[float],
    gain_cross: float,
) -> float:
    """Residual cross-cell interference from one coordinating BS: its budget
    minus what it spends on the common CoMP-UEs, seen through the victim's
    cross channel."""
    spent = sum(comp_powers_at_interferer)
    if spent > interferer_budget * (1.0 + 1e-12):
        raise ValueError(
            f"CoMP powers {spent} exceed the interferer budget {interferer_budget}"
        )
    return (interferer_budget - spent) * gain_cross


# --- CoMP-set formulas --------------------------------------------------------

def rate_non_comp(
    model: CompSetModel, alloc: CompAllocation, bs: int, i: int
) -> float:
    """Rate of non-CoMP-UE i served by member BS ``bs``: intra-cluster
    interference from higher-SIC non-CoMP users plus the full non-CoMP power
    of every other member BS as cross-cell interference."""
    if not (0 <= i < model.n_non_comp(bs)):
        raise LookupError(f"BS {model.bs_ids[bs]} has no non-CoMP user {i}")
    gains = model.non_comp_gains[bs][i]
    g = gains[bs]
    inui = sum(alloc.non_comp[bs][i + 1 :]) * g
    ici = sum(
        alloc.non_comp_total(n) * gains[n] for n in range(model.n_bs) if n != bs
    )
    return math.log2(1.0 + alloc.non_comp[bs][i] * g / (inui + ici + 1.0))


def rate_comp_joint(model: CompSetModel, alloc: CompAllocation, k: int) -> float:
    """Rate of CoMP-UE k under joint transmission from every member BS."""
    if not (0 <= k < model.n_comp):
        raise LookupError(f"no CoMP-UE {k}")
    gains = model.comp_gains[k]
    desired = sum(alloc.comp[k][n] * gains[n] for n in range(model.n_bs))
    inui = sum(
        alloc.comp[kk][n] * gains[n]
        for kk in range(k + 1, model.n_comp)
        for n in range(model.n_bs)
    )
    ici = sum(alloc.non_comp_total(n) * gains[n] for n in range(model.n_bs))
    return math.log2(1.0 + desired / (inui + ici + 1.0))


def all_joint_rates(
    model: CompSetModel, alloc: CompAllocation
) -> tuple[tuple[float, ...], tuple[tuple[float, ...], ...]]:
    """(CoMP-UE rates, per-BS non-CoMP rates) for an allocation."""
    comp = tuple(rate_comp_joint(model, alloc, k) for k in range(model.n_comp))
    non_comp = tuple(
        tuple(rate_non_comp(model, alloc, n, i) for i in range(model.n_non_comp(n)))
        for n in range(model.n_bs)
    )
    return comp, non_comp


def joint_sum_rate(model: CompSetModel, alloc: CompAllocation) -> float:
    """CoMP-set sum rate: every non-CoMP-UE plus each CoMP-UE counted once."""
    comp, non_comp = all_joint_rates(model, alloc)
    return sum(comp) + sum(r for row in non_comp for r in row)
