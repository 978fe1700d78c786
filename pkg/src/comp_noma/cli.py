"""Experiment runner: distance sweeps over a two-tier HetNet layout,
comparing joint, distributed, coordinated-scheduling and OMA baselines, with
CSV / plot-data output.

A system model tag ``n:m:k`` means: n coordinating BSs (one macro plus n-1
small cells), each forming one m-user NOMA cluster that shares k common
CoMP-UEs; the remaining m-k users per cluster are that BS's own non-CoMP
users.  Users are placed on the BS-to-BS axes: a non-CoMP user sits on the
line from its serving BS toward the macro (or toward the first small cell,
for the macro's own users).  A CoMP-UE sits at the configured distance from
the first small cell, on the line toward the macro for 2-BS sets and on the
line toward the second small cell for 3-BS sets, so it stays in the joint
coverage edge of every coordinating cell.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field

from .analysis import efficiency
from .distributed import solve_cs_comp, solve_dpo
from .joint import check_joint_constraints, solve_jpo
from .rate_model import CompSetModel
from .scenario import (
    CompSet,
    Scenario,
    ScenarioError,
    UserEquipment,
    build_comp_set_model,
    load_scenario,
)

DEFAULT_GRID = 1000
SOLVER_CHOICES = ("jpo", "dpo", "oma", "cs")


class SpecError(ValueError):
    """Invalid experiment specification."""


@dataclass(frozen=True)
class ExperimentSpec:
    scenario_path: str
    model: tuple[int, int, int]  # (n, m, k)
    sweep_ue: str
    sweep_from_m: float
    sweep_to_m: float
    sweep_step_m: float
    solvers: tuple[str, ...]
    grid: int = DEFAULT_GRID
    out_path: str | None = None
    fmt: str = "csv"
    placements_m: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        n, m, k = self.model
        if n not in (2, 3):
            raise SpecError(f"model needs 2 or 3 coordinating BSs, got {n}")
        if k < 1:
            raise SpecError("model needs at least one CoMP-UE")
        if m - k < 1:
            raise SpecError("each cluster needs at least one non-CoMP user (m > k)")
        if not self.solvers:
            raise SpecError("solver set must not be empty")
        for s in self.solvers:
            if s not in SOLVER_CHOICES:
                raise SpecError(f"unknown solver {s!r}")
        if "jpo" in self.solvers and n != 2:
            raise SpecError("jpo supports 2-BS CoMP-sets only; use dpo for 3-BS models")
        if not (0.0 < self.sweep_from_m <= self.sweep_to_m):
            raise SpecError("sweep range must satisfy 0 < from <= to")
        if self.sweep_step_m <= 0.0:
            raise SpecError("sweep step must be positive")
        if self.grid < 10:
            raise SpecError("grid must be at least 10 steps")
        if self.fmt not in ("csv", "plotdata"):
            raise SpecError(f"unknown output format {self.fmt!r}")


def parse_model(tag: str) -> tuple[int, int, int]:
    parts = tag.split(":")
    if len(parts) != 3:
        raise SpecError(f"model tag must look like n:m:k, got {tag!r}")
    try:
        n, m, k = (int(p) for p in parts)
    except ValueError as exc:
        raise SpecError(f"model tag must be integers n:m:k, got {tag!r}") from exc
    return n, m, k


def parse_sweep(arg: str) -> tuple[str, float, float, float]:
    parts = arg.split(":")
    if len(parts) != 4:
        raise SpecError(f"sweep must look like ue:from_m:to_m:step_m, got {arg!r}")
    try:
        return parts[0], float(parts[1]), float(parts[2]), float(parts[3])
    except ValueError as exc:
        raise SpecError(f"bad sweep numbers in {arg!r}") from exc


def model_ue_ids(model: tuple[int, int, int]) -> list[str]:
    n, m, k = model
    ids = [f"c{j + 1}" for j in range(k)]
    ids += [f"m{i + 1}" for i in range(m - k)]
    for x in range(1, n):
        ids += [f"s{x}_{i + 1}" for i in range(m - k)]
    return ids


def default_placements(model: tuple[int, int, int]) -> dict[str, float]:
    """Distances in meters from each user's reference BS."""
    n, m, k = model
    out: dict[str, float] = {}
    if k == 1:
        out["c1"] = 150.0
    else:
        for j in range(k):
            out[f"c{j + 1}"] = 100.0 + 50.0 * j / (k - 1)
    for i in range(m - k):
        out[f"m{i + 1}"] = 50.0 + 40.0 * i
        for x in range(1, n):
            out[f"s{x}_{i + 1}"] = 50.0 + 40.0 * i
    return out


def _toward(src: tuple[float, float], dst: tuple[float, float], dist_km: float) -> tuple[float, float]:
    dx, dy = dst[0] - src[0], dst[1] - src[1]
    length = math.hypot(dx, dy)
    return src[0] + dx / length * dist_km, src[1] + dy / length * dist_km


def build_model_scenario(
    base: Scenario, model: tuple[int, int, int], placements_m: dict[str, float]
) -> tuple[Scenario, CompSet]:
    """Place the model's users onto the base layout and pin categories."""
    n, m, k = model
    macros = [b for b in base.base_stations if b.kind == "macro"]
    smalls = sorted((b for b in base.base_stations if b.kind == "small"), key=lambda b: b.id)
    if len(macros) != 1:
        raise SpecError(f"scenario must contain exactly one macro BS, found {len(macros)}")
    if len(smalls) < n - 1:
        raise SpecError(f"model {n}:{m}:{k} needs {n - 1} small cells, scenario has {len(smalls)}")
    members = [macros[0]] + smalls[: n - 1]
    positions = {b.id: (b.x_km, b.y_km) for b in members}
    macro, sbs1 = members[0], members[1]

    def axis_length_km(a: str, b: str) -> float:
        (ax, ay), (bx, by) = positions[a], positions[b]
        return math.hypot(ax - bx, ay - by)

    users: list[UserEquipment] = []
    for uid in model_ue_ids(model):
        if uid not in placements_m:
            raise SpecError(f"no distance given for user {uid}")
        d_km = placements_m[uid] / 1000.0
        if uid.startswith("c"):
            # CoMP-UEs live in the joint cell-edge region: between the small
            # cells for 3-BS sets, toward the macro for 2-BS sets
            ref = sbs1.id
            other = macro.id if n == 2 else members[2].id
            serving: tuple[str, ...] = tuple(b.id for b in members)
            category = "comp"
        elif uid.startswith("m"):
            ref, other = macro.id, sbs1.id
            serving = (macro.id,)
            category = "non_comp"
        else:
            x = int(uid.split("_")[0][1:])
            ref, other = members[x].id, macro.id
            serving = (members[x].id,)
            category = "non_comp"
        if d_km >= axis_length_km(ref, other):
            raise SpecError(
                f"user {uid} at {placements_m[uid]} m leaves the cell geometry "
                f"(BS separation {axis_length_km(ref, other) * 1000:.0f} m)"
            )
        x_km, y_km = _toward(positions[ref], positions[other], d_km)
        users.append(
            UserEquipment(id=uid, x_km=x_km, y_km=y_km, category=category, serving_set=serving)
        )

    scn = Scenario(
        constants=base.constants,
        base_stations=base.base_stations,
        users=tuple(users),
    )
    non_comp_rows = [tuple(f"m{i + 1}" for i in range(m - k))]
    for x in range(1, n):
        non_comp_rows.append(tuple(f"s{x}_{i + 1}" for i in range(m - k)))
    comp_set = CompSet(
        members=tuple(b.id for b in members),
        comp_ues=tuple(f"c{j + 1}" for j in range(k)),
        non_comp_ues=tuple(non_comp_rows),
    )
    return scn, comp_set


def _solver_row(model: CompSetModel, solver: str, grid: int, rb_bw: float) -> dict:
    """Per-user rates, SE/EE and feasibility for one solver at one point."""
    m_users = model.n_comp + model.n_non_comp(0)
    user_order = list(model.comp_ues) + [u for row in model.non_comp_ues for u in row]

    def pack(status, comp_rates, non_comp_rates, total_power):
        rates = dict(zip(model.comp_ues, comp_rates))
        for n, row in enumerate(non_comp_rates):
            rates.update(zip(model.non_comp_ues[n], row))
        feasible = status == "optimal"
        if feasible:
            se = sum(rates.values())
            rep = efficiency(list(rates.values()), [total_power], m_users, rb_bw, scope="comp_set")
            ee = rep.ee_mb_per_joule
        else:
            se = ee = float("nan")
        return {
            "status": status,
            "se": se,
            "ee": ee,
            "power": total_power if feasible else float("nan"),
            "rates": {u: rates.get(u, float("nan")) for u in user_order},
        }

    if solver == "oma":
        comp_rates = model.comp_requirements
        non_comp_rates = model.non_comp_requirements
        total = sum(model.budgets)
        return pack("optimal", comp_rates, non_comp_rates, total)
    if solver == "dpo":
        out = solve_dpo(model, use_offset_ici=True)
        if out.status != "optimal":
            return pack(out.status, (), (), float("nan"))
        return pack("optimal", out.comp_rates, out.non_comp_rates, out.allocation.total())
    if solver == "cs":
        serving = model.bs_ids[1]  # first small cell serves the CoMP-UEs
        out = solve_cs_comp(model, serving)
        if out.status != "optimal":
            return pack(out.status, (), (), float("nan"))
        return pack("optimal", out.comp_rates, out.non_comp_rates, out.allocation.total())
    if solver == "jpo":
        try:
            out = solve_jpo(model, steps_per_bs=grid)
        except ValueError as exc:
            raise SpecError(str(exc)) from exc
        if out.status != "optimal":
            return pack(out.status, (), (), float("nan"))
        ordered = model.reorder_comp(out.sic_order_used)
        residual = check_joint_constraints(
            ordered, out.allocation.reorder_comp(out.sic_order_used)
        )
        if residual:  # internal invariant: the reported optimum re-validates
            raise RuntimeError(f"jpo optimum failed re-validation: {residual[0]}")
        return pack("optimal", out.comp_rates, out.non_comp_rates, out.allocation.total())
    raise SpecError(f"unknown solver {solver!r}")


def run_sweep(spec: ExperimentSpec) -> list[dict]:
    """One row per sweep point per solver; deterministic for a given spec."""
    base = load_scenario(spec.scenario_path)
    placements = default_placements(spec.model)
    placements.update(spec.placements_m)
    if spec.sweep_ue not in model_ue_ids(spec.model):
        raise SpecError(
            f"swept user {spec.sweep_ue!r} is not part of model "
            f"{spec.model[0]}:{spec.model[1]}:{spec.model[2]}"
        )

    distances = []
    d = spec.sweep_from_m
    while d <= spec.sweep_to_m + 1e-9:
        distances.append(round(d, 9))
        d += spec.sweep_step_m

    rows: list[dict] = []
    tag = f"{spec.model[0]}:{spec.model[1]}:{spec.model[2]}"
    for dist in distances:
        placements[spec.sweep_ue] = dist
        scn, comp_set = build_model_scenario(base, spec.model, placements)
        model = build_comp_set_model(scn, comp_set)
        for solver in spec.solvers:
            res = _solver_row(model, solver, spec.grid, base.constants.rb_bandwidth_hz)
            row = {
                "model": tag,
                "solver": solver,
                "sweep_ue": spec.sweep_ue,
                "distance_m": dist,
                "status": res["status"],
                "se_bits_per_hz": res["se"],
                "ee_mb_per_joule": res["ee"],
                "total_power_watts": res["power"],
            }
            for uid, r in res["rates"].items():
                row[f"rate_{uid}"] = r
            rows.append(row)
    return rows


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return format(v, ".12g")
    return str(v)


def emit(rows: list[dict], fmt: str, path: str) -> None:
    """Write the sweep table as CSV or as per-solver plot series (JSON)."""
    if not rows:
        raise ValueError("refusing to emit an empty table")
    if fmt == "csv":
        header = list(rows[0].keys())
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(row[k]) for k in header])
        return
    if fmt == "plotdata":
        series: dict[str, dict[str, list]] = {}
        for row in rows:
            s = series.setdefault(
                row["solver"], {"distance_m": [], "se": [], "ee": [], "status": []}
            )
            s["distance_m"].append(row["distance_m"])
            s["se"].append(None if math.isnan(row["se_bits_per_hz"]) else row["se_bits_per_hz"])
            s["ee"].append(None if math.isnan(row["ee_mb_per_joule"]) else row["ee_mb_per_joule"])
            s["status"].append(row["status"])
        doc = {
            "model": rows[0]["model"],
            "sweep_ue": rows[0]["sweep_ue"],
            "series": series,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return
    raise ValueError(f"unknown format {fmt!r}")


def build_spec(argv: list[str]) -> ExperimentSpec:
    parser = argparse.ArgumentParser(
        prog="comp-noma",
        description="Distance sweeps for multi-cell NOMA power allocation.",
    )
    parser.add_argument("--scenario", required=True, help="scenario config (TOML)")
    parser.add_argument("--model", required=True, help="system model tag n:m:k")
    parser.add_argument("--sweep", required=True, help="ue:from_m:to_m:step_m")
    parser.add_argument(
        "--solvers", default="dpo,oma", help="comma-separated subset of jpo,dpo,oma,cs"
    )
    parser.add_argument("--grid", type=int, default=DEFAULT_GRID, help="grid steps per BS")
    parser.add_argument("--out", required=True, help="output file path")
    parser.add_argument("--format", default="csv", choices=("csv", "plotdata"))
    parser.add_argument(
        "--place",
        action="append",
        default=[],
        metavar="UE:DIST_M",
        help="override a non-swept user's distance in meters (repeatable)",
    )
    args = parser.parse_args(argv)
    sweep_ue, lo, hi, step = parse_sweep(args.sweep)
    placements = {}
    for item in args.place:
        ue, _, dist = item.partition(":")
        try:
            placements[ue] = float(dist)
        except ValueError as exc:
            raise SpecError(f"bad placement override {item!r}") from exc
    solvers = tuple(s for s in args.solvers.split(",") if s)
    return ExperimentSpec(
        scenario_path=args.scenario,
        model=parse_model(args.model),
        sweep_ue=sweep_ue,
        sweep_from_m=lo,
        sweep_to_m=hi,
        sweep_step_m=step,
        solvers=solvers,
        grid=args.grid,
        out_path=args.out,
        fmt=args.format,
        placements_m=placements,
    )


def main(argv: list[str] | None = None) -> int:
    try:
        spec = build_spec(sys.argv[1:] if argv is None else argv)
        rows = run_sweep(spec)
        emit(rows, spec.fmt, spec.out_path)
    except (SpecError, ScenarioError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
