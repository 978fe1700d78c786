"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines
and the reported JPO-DPO gaps.
"""

import math
import time

import numpy as np

from comp_noma import (
    CompAllocation,
    CompSetModel,
    NomaCluster,
    check_joint_constraints,
    desired_power_distributed,
    desired_power_joint,
    grid_oracle,
    hessian_minors,
    rate_comp_joint,
    rate_distributed,
    solve_closed_form,
    solve_dpo,
    solve_jpo,
    validate_dpo,
)
from comp_noma.cli import ExperimentSpec, emit, run_sweep
from conftest import random_cluster, random_comp_model


def report(criterion: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion} {'PASS' if ok else 'FAIL'}: {detail}", flush=True)


def test_criterion_1_oracle_equivalence():
    rng = np.random.default_rng(1001)
    t0 = time.perf_counter()
    checked = 0
    worst_power_gap_steps = 0.0
    for m in (2, 3):
        for _ in range(100):
            cluster = random_cluster(rng, m)
            closed = solve_closed_form(cluster)
            oracle = grid_oracle(cluster, 2000)
            step = cluster.power_budget / 2000
            # the cluster-head is the dependent coordinate (budget minus the
            # searched ones), so it can absorb one rounding per other user
            limits = [step] * (m - 1) + [step * (m - 1)]
            ok = (
                closed.status == "optimal"
                and oracle.status == "optimal"
                and closed.sum_rate >= oracle.sum_rate - 1e-12
                and all(
                    abs(a - b) <= lim * (1 + 1e-9)
                    for a, b, lim in zip(
                        closed.allocation.powers, oracle.allocation.powers, limits
                    )
                )
            )
            if not ok:
                report(1, False, f"instance {cluster} closed={closed} oracle={oracle}")
                assert ok
            worst_power_gap_steps = max(
                worst_power_gap_steps,
                max(
                    abs(a - b) / step
                    for a, b in zip(closed.allocation.powers, oracle.allocation.powers)
                ),
            )
            checked += 1
    elapsed = time.perf_counter() - t0
    ok = checked == 200 and elapsed < 60.0
    report(
        1,
        ok,
        f"{checked} instances, closed form >= oracle(n=2000) and allocations "
        f"within one step (worst {worst_power_gap_steps:.2f} steps), {elapsed:.1f}s",
    )
    assert ok


def _interior_point(rng, m):
    while True:
        gains = np.sort(rng.uniform(0.1, 20.0, size=m))
        if np.all(gains[1:] / gains[:-1] >= 1.3):
            break
    powers = rng.uniform(0.05, 1.0, size=m)
    return powers.tolist(), gains.tolist()


def test_criterion_2_concavity_suite():
    rng = np.random.default_rng(1002)
    t0 = time.perf_counter()
    worst_fd = 0.0
    for m in (2, 3, 4):
        for _ in range(1000):
            powers, gains = _interior_point(rng, m)
            rep = hessian_minors(powers, gains, cross_check=(m <= 3))
            assert rep.passed, (powers, gains, rep.minors)
            if m <= 3:
                worst_fd = max(worst_fd, rep.fd_max_rel_err)
                assert rep.fd_max_rel_err < 1e-4
    elapsed = time.perf_counter() - t0
    ok = elapsed < 30.0
    report(
        2,
        ok,
        f"3000 interior points alternate in sign; finite differences agree "
        f"(worst rel err {worst_fd:.2e}), {elapsed:.1f}s",
    )
    assert ok


def _symmetric_instance(rng):
    n_extra = int(rng.integers(1, 4))
    comp_gain = float(rng.uniform(0.2, 20.0))
    extra = np.sort(rng.uniform(30.0, 300.0, size=n_extra))[::-1]
    nc_gains = np.sort(comp_gain * rng.uniform(5.0, 50.0, size=n_extra))
    cluster = NomaCluster(
        gains=(comp_gain, *nc_gains.tolist()),
        power_budget=float(rng.uniform(1.0, 10.0)),
        rate_requirements=(0.0,) * (1 + n_extra),
    )
    powers = tuple(rng.uniform(0.05, 1.0, size=1 + n_extra).tolist())
    model = CompSetModel(
        bs_ids=("a", "b"),
        budgets=(cluster.power_budget, cluster.power_budget),
        comp_ues=("c",),
        comp_gains=((comp_gain, comp_gain),),
        comp_requirements=(0.0,),
        non_comp_ues=(
            tuple(f"x{i}" for i in range(n_extra)),
            tuple(f"y{i}" for i in range(n_extra)),
        ),
        non_comp_gains=(
            tuple((float(g), 0.2) for g in nc_gains),
            tuple((0.2, float(g)) for g in nc_gains),
        ),
        non_comp_requirements=((0.0,) * n_extra,) * 2,
    )
    alloc = CompAllocation(
        comp=((powers[0], powers[0]),),
        non_comp=(powers[1:], powers[1:]),
    )
    return cluster, powers, model, alloc


def test_criterion_3_lemma4_and_desired_power():
    rng = np.random.default_rng(1003)
    for _ in range(100):
        cluster, powers, model, alloc = _symmetric_instance(rng)
        r13 = rate_distributed(cluster, powers, 0, 2, True)
        r7 = rate_comp_joint(model, alloc, 0)
        assert abs(r13 - r7) <= 1e-9 * max(abs(r7), 1e-30)
    for _ in range(100):
        gamma = float(rng.uniform(1.001, 80.0))
        gm = float(rng.uniform(0.1, 1e5))
        gs = float(rng.uniform(0.1, 1e5))
        for k in (1, 2, 3):
            assert desired_power_distributed(k, gamma, gm, gs) > desired_power_joint(
                k, gamma, gm, gs
            )
    report(
        3,
        True,
        "100 symmetric instances match to 1e-9 relative; distributed desired "
        "power strictly above joint for k=1..3 on 100 instances",
    )


def test_criterion_4_dpo_jpo_feasibility_both_directions():
    rng = np.random.default_rng(1004)
    # direction 1: negligible cross-cell leakage, offsets on -> joint-feasible
    for _ in range(100):
        model = random_comp_model(rng, non_comp_per_bs=1, cross_lo=1e-5, cross_hi=5e-4)
        out = solve_dpo(model, use_offset_ici=True)
        assert out.status == "optimal"
        violations = check_joint_constraints(model, out.allocation)
        assert violations == [], violations
    # direction 2: strong coupling, two non-CoMP users, offsets off ->
    # the binding non-head users miss their joint rate floors
    detected = 0
    for _ in range(100):
        model = random_comp_model(rng, non_comp_per_bs=2, cross_lo=0.05, cross_hi=0.5)
        out = solve_dpo(model, use_offset_ici=False)
        assert out.status == "optimal"
        rec = validate_dpo(model, out)
        assert not rec.non_comp_rate_ok
        detected += 1
        repaired = solve_dpo(model, use_offset_ici=True)
        assert repaired.status == "optimal"
        assert validate_dpo(model, repaired).non_comp_rate_ok
    report(
        4,
        True,
        f"100 offset-on instances pass every joint constraint; "
        f"{detected}/100 offset-off instances show C4/C5 violations that the "
        "offset repairs",
    )


def _rate_sensitivity(model: CompSetModel, alloc: CompAllocation) -> list[float]:
    """Per-BS upper bound on d(sum rate)/d(power) at an allocation, used to
    convert grid steps into a sum-rate slack."""
    ln2 = math.log(2.0)
    sens = []
    for n in range(model.n_bs):
        cands = []
        for k in range(model.n_comp):
            g = model.comp_gains[k]
            den = (
                sum(
                    alloc.comp[kk][o] * g[o]
                    for kk in range(k + 1, model.n_comp)
                    for o in range(model.n_bs)
                )
                + sum(alloc.non_comp_total(o) * g[o] for o in range(model.n_bs))
                + 1.0
            )
            cands.append(g[n] / (ln2 * den))
        for i in range(model.n_non_comp(n)):
            g = model.non_comp_gains[n][i][n]
            cands.append(g / (ln2 * (1.0 + alloc.non_comp[n][i] * g)))
        sens.append(max(cands))
    return sens


def test_criterion_5_jpo_dominance():
    rng = np.random.default_rng(1005)
    t0 = time.perf_counter()
    gaps = []
    for _ in range(20):
        model = random_comp_model(rng, non_comp_per_bs=1, cross_lo=0.01, cross_hi=0.1)
        dpo = solve_dpo(model, use_offset_ici=True)
        assert dpo.status == "optimal"
        jpo = solve_jpo(model, steps_per_bs=1000)
        assert jpo.status == "optimal"
        sens = _rate_sensitivity(model, dpo.allocation)
        slack = 2.0 * sum(
            (model.budgets[n] / 1000) * sens[n] for n in range(model.n_bs)
        )
        gap = jpo.joint_sum_rate - dpo.joint_evaluated_sum_rate
        gaps.append(gap)
        assert gap >= -slack, (gap, slack)
    elapsed = time.perf_counter() - t0
    ok = elapsed < 600.0
    report(
        5,
        ok,
        f"20 instances: JPO >= DPO joint-evaluated within grid slack; gap "
        f"mean {np.mean(gaps):.4f}, min {min(gaps):.4f}, max {max(gaps):.4f} "
        f"bits/s/Hz, {elapsed:.1f}s",
    )
    assert ok


def _sweep(hetnet_path, **kw):
    base = dict(
        scenario_path=hetnet_path,
        model=(2, 2, 1),
        sweep_ue="c1",
        sweep_from_m=100.0,
        sweep_to_m=200.0,
        sweep_step_m=10.0,
        solvers=("dpo", "oma"),
        grid=1000,
        out_path=None,
        fmt="csv",
    )
    base.update(kw)
    return run_sweep(ExperimentSpec(**base))


def test_criterion_6a_noma_beats_oma_and_gap_dips_inside(hetnet_path):
    t0 = time.perf_counter()
    rows = _sweep(hetnet_path, solvers=("jpo", "dpo", "oma"))
    elapsed = time.perf_counter() - t0
    oma = {r["distance_m"]: r["se_bits_per_hz"] for r in rows if r["solver"] == "oma"}
    feasible_noma = 0
    for r in rows:
        if r["solver"] in ("jpo", "dpo") and r["status"] == "optimal":
            assert r["se_bits_per_hz"] >= oma[r["distance_m"]] - 1e-9
            feasible_noma += 1
    assert feasible_noma > 0
    jpo = {r["distance_m"]: r for r in rows if r["solver"] == "jpo"}
    dpo = {r["distance_m"]: r for r in rows if r["solver"] == "dpo"}
    gaps = {
        d: jpo[d]["se_bits_per_hz"] - dpo[d]["se_bits_per_hz"]
        for d in jpo
        if jpo[d]["status"] == "optimal" and dpo[d]["status"] == "optimal"
    }
    assert len(gaps) >= 3
    argmin = min(gaps, key=gaps.get)
    ok = 100.0 < argmin < 200.0 and elapsed < 300.0
    report(
        6,
        ok,
        f"(a) NOMA SE >= OMA SE at all {feasible_noma} feasible points; "
        f"JPO-DPO gap minimized at {argmin:.0f} m (interior), {elapsed:.1f}s",
    )
    assert ok


def test_criterion_6b_three_bs_band_strictly_narrower(hetnet_path):
    t0 = time.perf_counter()

    def band(model, hi):
        rows = _sweep(
            hetnet_path,
            model=model,
            sweep_from_m=40.0,
            sweep_to_m=hi,
            sweep_step_m=20.0,
            solvers=("dpo",),
        )
        feas = [r["distance_m"] for r in rows if r["status"] == "optimal"]
        return max(feas) - min(feas)

    width2 = band((2, 2, 1), 600.0)
    width3 = band((3, 2, 1), 280.0)
    elapsed = time.perf_counter() - t0
    ok = width3 < width2 and elapsed < 300.0
    report(
        6,
        ok,
        f"(b) feasible CoMP-UE band: 3:2:1 width {width3:.0f} m < "
        f"2:2:1 width {width2:.0f} m, {elapsed:.1f}s",
    )
    assert ok


def test_criterion_6c_cs_energy_efficiency_exceeds_jt(hetnet_path):
    t0 = time.perf_counter()
    rows = _sweep(
        hetnet_path,
        sweep_ue="m1",
        sweep_from_m=50.0,
        sweep_to_m=500.0,
        sweep_step_m=50.0,
        solvers=("dpo", "cs", "oma"),
        placements_m={"c1": 100.0},
    )
    cs = {r["distance_m"]: r for r in rows if r["solver"] == "cs"}
    dpo = {r["distance_m"]: r for r in rows if r["solver"] == "dpo"}
    both = [
        d for d in cs
        if cs[d]["status"] == "optimal" and dpo[d]["status"] == "optimal"
    ]
    elapsed = time.perf_counter() - t0
    ok = len(both) >= 5 and all(
        cs[d]["ee_mb_per_joule"] > dpo[d]["ee_mb_per_joule"] for d in both
    ) and elapsed < 300.0
    ratios = [cs[d]["ee_mb_per_joule"] / dpo[d]["ee_mb_per_joule"] for d in both]
    report(
        6,
        ok,
        f"(c) CS EE above JT EE at all {len(both)} feasible points "
        f"(ratio {min(ratios):.0f}x..{max(ratios):.0f}x), {elapsed:.1f}s",
    )
    assert ok


def test_criterion_6d_cs_comp_rate_non_increasing(hetnet_path):
    t0 = time.perf_counter()
    rows = _sweep(
        hetnet_path,
        sweep_ue="m1",
        sweep_from_m=50.0,
        sweep_to_m=650.0,
        sweep_step_m=50.0,
        solvers=("cs",),
        placements_m={"c1": 150.0},
    )
    rates = [r["rate_c1"] for r in rows if r["status"] == "optimal"]
    elapsed = time.perf_counter() - t0
    ok = (
        len(rates) >= 5
        and all(b <= a + 1e-9 for a, b in zip(rates, rates[1:]))
        and elapsed < 300.0
    )
    report(
        6,
        ok,
        f"(d) CS CoMP-UE rate non-increasing over {len(rates)} points "
        f"({rates[0]:.3f} down to {rates[-1]:.3f} bits/s/Hz), {elapsed:.1f}s",
    )
    assert ok


def test_criterion_7_determinism(tmp_path, hetnet_path):
    spec = ExperimentSpec(
        scenario_path=hetnet_path,
        model=(2, 2, 1),
        sweep_ue="c1",
        sweep_from_m=120.0,
        sweep_to_m=200.0,
        sweep_step_m=40.0,
        solvers=("dpo", "oma", "cs"),
        grid=200,
        out_path=None,
        fmt="csv",
    )
    files = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        emit(run_sweep(spec), "csv", str(path))
        files.append(path.read_bytes())
    ok = files[0] == files[1]
    jsons = []
    for name in ("a.json", "b.json"):
        path = tmp_path / name
        emit(run_sweep(spec), "plotdata", str(path))
        jsons.append(path.read_bytes())
    ok = ok and jsons[0] == jsons[1]
    report(7, ok, "repeated runs emit byte-identical CSV and plot data")
    assert ok
