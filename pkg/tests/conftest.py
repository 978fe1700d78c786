import math
import pathlib

import numpy as np
import pytest

from comp_noma import (
    CompSetModel,
    NomaCluster,
    RadioConstants,
    normalized_sic_threshold,
    path_loss_db,
)

REPO_ROOT = pathlib.Path(__file__).resolve().parents[1]
HETNET_SCENARIO = REPO_ROOT / "scenarios" / "hetnet.toml"


@pytest.fixture
def hetnet_path() -> str:
    return str(HETNET_SCENARIO)


def gain_at(distance_m: float, constants: RadioConstants | None = None) -> float:
    """Noise-normalized gain of the standard path-loss law at a distance."""
    c = constants or RadioConstants()
    pl = path_loss_db(distance_m / 1000.0)
    return 10.0 ** (-pl / 10.0) / c.noise_power_watts()


def random_cluster(rng: np.random.Generator, m: int, max_tries: int = 50) -> NomaCluster:
    """Random feasible single-cell cluster: Table-1 small-cell budget, gains
    from the path-loss law at 30-300 m, OMA-default requirements.

    The weaker users sit toward the outer range so the feasible region is a
    few grid steps wide at oracle resolution; otherwise the brute-force
    search cannot certify anything at all (every non-cluster-head binds its
    constraints exactly, so the feasible sliver narrows as 1/prod(2^R'-1)).
    """
    from comp_noma import solve_closed_form

    c = RadioConstants()
    for _ in range(max_tries):
        if m == 1:
            dists = [float(rng.uniform(30.0, 300.0))]
        elif m == 2:
            far = float(rng.uniform(100.0, 300.0))
            dists = [far, float(rng.uniform(30.0, far / 1.3))]
        elif m == 3:
            far = float(rng.uniform(195.0, 300.0))
            mid = float(rng.uniform(150.0, far / 1.3))
            dists = [far, mid, float(rng.uniform(30.0, mid / 1.3))]
        else:
            raise ValueError("generator covers clusters of up to 3 users")
        gains = tuple(gain_at(d) for d in dists)
        budget = 10.0 ** ((25.0 - 30.0) / 10.0)
        cluster = NomaCluster(
            gains=gains,
            power_budget=budget,
            rate_requirements=tuple(math.log2(1.0 + budget * g) / m for g in gains),
            sic_threshold=normalized_sic_threshold(c, gains),
        )
        if solve_closed_form(cluster).status == "optimal":
            return cluster
    raise RuntimeError("could not draw a feasible cluster")


def random_comp_model(
    rng: np.random.Generator,
    non_comp_per_bs: int = 1,
    n_comp: int = 1,
    cross_lo: float = 1e-4,
    cross_hi: float = 5e-4,
) -> CompSetModel:
    """Random normalized-scale 2-BS CoMP-set.

    Link strengths are drawn as received SNRs so the structure (CoMP users
    far weaker than the non-CoMP cluster-heads) matches the intended
    deployment; cross-link interference scales with [cross_lo, cross_hi]
    noise units per unit of leaked power.
    """
    budgets = (float(rng.uniform(5.0, 15.0)), float(rng.uniform(0.5, 2.0)))
    m_users = n_comp + non_comp_per_bs

    comp_gains = []
    for _ in range(n_comp):
        comp_gains.append(
            tuple(float(rng.uniform(15.0, 60.0)) / budgets[n] for n in range(2))
        )
    comp_gains.sort(key=lambda row: row[1])
    joint_snrs = [
        sum(budgets[n] * g[n] for n in range(2)) for g in comp_gains
    ]
    comp_requirements = tuple(
        math.log2(1.0 + snr) / m_users for snr in joint_snrs
    )

    non_comp_gains = []
    non_comp_requirements = []
    for n in range(2):
        snrs = np.sort(rng.uniform(3e3, 3e4, size=non_comp_per_bs))
        if non_comp_per_bs > 1:  # weaker users below the head
            snrs[:-1] = np.sort(rng.uniform(200.0, 1e3, size=non_comp_per_bs - 1))
        rows = []
        reqs = []
        for snr in snrs:
            desired = float(snr) / budgets[n]
            cross = float(rng.uniform(cross_lo, cross_hi)) / budgets[1 - n]
            rows.append((desired, cross) if n == 0 else (cross, desired))
            reqs.append(math.log2(1.0 + float(snr)) / m_users)
        non_comp_gains.append(tuple(rows))
        non_comp_requirements.append(tuple(reqs))

    return CompSetModel(
        bs_ids=("macro", "small"),
        budgets=budgets,
        comp_ues=tuple(f"c{j}" for j in range(n_comp)),
        comp_gains=tuple(comp_gains),
        comp_requirements=comp_requirements,
        non_comp_ues=tuple(
            tuple(f"u{n}_{i}" for i in range(non_comp_per_bs)) for n in range(2)
        ),
        non_comp_gains=tuple(non_comp_gains),
        non_comp_requirements=tuple(non_comp_requirements),
        sic_threshold=float(rng.uniform(0.0, 2.0)),
    )
