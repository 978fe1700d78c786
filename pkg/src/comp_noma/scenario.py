"""Two-tier HetNet world model: geometry, path loss, normalized channel gains,
user categorization and CoMP-set construction.

Unit conventions
----------------
All internal quantities are linear: transmit powers in Watts, channel gains as
dimensionless ratios normalized by the per-RB noise power in Watts (so the
noise term in every SINR is exactly 1).  dBm values appear only at the config
and report boundaries.

The SIC detection threshold from the config (dBm) is interpreted as a minimum
transmit-power gap and rewritten onto the normalized scale per cluster, see
``normalized_sic_threshold``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .rate_model import CompSetModel, NomaCluster

DEFAULT_MACRO_BUDGET_DBM = 46.0
DEFAULT_SMALL_BUDGET_DBM = 25.0
DEFAULT_RB_BANDWIDTH_HZ = 180e3
DEFAULT_NOISE_DENSITY_DBM_HZ = -169.0
DEFAULT_SIC_THRESHOLD_DBM = 10.0
DEFAULT_PATHLOSS_INTERCEPT_DB = 128.1
DEFAULT_PATHLOSS_SLOPE_DB = 37.6

MAX_COMP_SET_SIZE = 3


class ScenarioError(ValueError):
    """Invalid scenario data (config parse error or invariant violation)."""


class CategorizationError(ScenarioError):
    """User categorization or cluster formation failed."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0.0:
        raise ValueError(f"power must be positive, got {watts}")
    return 10.0 * math.log10(watts) + 30.0


@dataclass(frozen=True)
class RadioConstants:
    """Per-resource-block radio constants (defaults follow the standard
    urban macro simulation setup)."""

    rb_bandwidth_hz: float = DEFAULT_RB_BANDWIDTH_HZ
    noise_density_dbm_hz: float = DEFAULT_NOISE_DENSITY_DBM_HZ
    sic_threshold_dbm: float = DEFAULT_SIC_THRESHOLD_DBM
    pathloss_intercept_db: float = DEFAULT_PATHLOSS_INTERCEPT_DB
    pathloss_slope_db_decade: float = DEFAULT_PATHLOSS_SLOPE_DB

    def __post_init__(self) -> None:
        if not (self.rb_bandwidth_hz > 0.0):
            raise ScenarioError(
                f"rb_bandwidth_hz must be positive, got {self.rb_bandwidth_hz}"
            )
        for name in (
            "rb_bandwidth_hz",
            "noise_density_dbm_hz",
            "sic_threshold_dbm",
            "pathloss_intercept_db",
            "pathloss_slope_db_decade",
        ):
            if not math.isfinite(getattr(self, name)):
                raise ScenarioError(f"{name} must be finite")

    def noise_power_dbm(self) -> float:
        return noise_power_dbm(self.noise_density_dbm_hz, self.rb_bandwidth_hz)

    def noise_power_watts(self) -> float:
        return dbm_to_watts(self.noise_power_dbm())


@dataclass(frozen=True)
class BaseStation:
    id: str
    kind: str  # "macro" | "small"
    x_km: float
    y_km: float
    budget_dbm: float

    def __post_init__(self) -> None:
        if self.kind not in ("macro", "small"):
            raise ScenarioError(f"BS {self.id}: kind must be macro or small")
        if not math.isfinite(self.budget_dbm):
            raise ScenarioError(f"BS {self.id}: power budget must be finite")

    @property
    def budget_watts(self) -> float:
        return dbm_to_watts(self.budget_dbm)


@dataclass(frozen=True)
class UserEquipment:
    id: str
    x_km: float
    y_km: float
    category: str | None = None  # "comp" | "non_comp" | None (undetermined)
    serving_set: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.category not in (None, "comp", "non_comp"):
            raise ScenarioError(f"UE {self.id}: bad category {self.category!r}")


@dataclass(frozen=True)
class CompSet:
    """One coordination group: member BSs, its CoMP-UEs and, per member BS,
    the non-CoMP-UEs clustered with them (ascending desired gain)."""

    members: tuple[str, ...]
    comp_ues: tuple[str, ...]
    non_comp_ues: tuple[tuple[str, ...], ...]  # aligned with members

    def __post_init__(self) -> None:
        if not (2 <= len(self.members) <= MAX_COMP_SET_SIZE):
            raise ScenarioError(
                f"CoMP-set must have 2..{MAX_COMP_SET_SIZE} members, got {self.members}"
            )
        if len(self.non_comp_ues) != len(self.members):
            raise ScenarioError("per-BS non-CoMP lists must align with members")
        if not self.comp_ues:
            raise ScenarioError("CoMP-set needs at least one CoMP-UE")


@dataclass(frozen=True)
class Scenario:
    constants: RadioConstants
    base_stations: tuple[BaseStation, ...]
    users: tuple[UserEquipment, ...]
    comp_sets: tuple[CompSet, ...] = ()
    # per-BS clusters of non-CoMP users whose serving BS is in no CoMP-set
    standalone: tuple[tuple[str, tuple[str, ...]], ...] = ()

    def __post_init__(self) -> None:
        bs_ids = [b.id for b in self.base_stations]
        if len(set(bs_ids)) != len(bs_ids):
            raise ScenarioError("duplicate base station ids")
        ue_ids = [u.id for u in self.users]
        if len(set(ue_ids)) != len(ue_ids):
            raise ScenarioError("duplicate user ids")
        known = set(bs_ids)
        for u in self.users:
            for b in u.serving_set:
                if b not in known:
                    raise ScenarioError(f"UE {u.id}: unknown serving BS {b!r}")
            if u.category == "comp" and u.serving_set and len(u.serving_set) < 2:
                raise ScenarioError(f"UE {u.id}: comp user needs >=2 serving BSs")
            if u.category == "non_comp" and len(u.serving_set) > 1:
                raise ScenarioError(f"UE {u.id}: non-comp user needs exactly 1 BS")

    def bs(self, bs_id: str) -> BaseStation:
        for b in self.base_stations:
            if b.id == bs_id:
                return b
        raise KeyError(bs_id)

    def ue(self, ue_id: str) -> UserEquipment:
        for u in self.users:
            if u.id == ue_id:
                return u
        raise KeyError(ue_id)


def distance_km(bs: BaseStation, ue: UserEquipment) -> float:
    return math.hypot(bs.x_km - ue.x_km, bs.y_km - ue.y_km)


def path_loss_db(
    distance_km: float,
    intercept_db: float = DEFAULT_PATHLOSS_INTERCEPT_DB,
    slope_db_decade: float = DEFAULT_PATHLOSS_SLOPE_DB,
) -> float:
    """Log-distance path loss in dB for a distance in km."""
    if not (distance_km > 0.0):
        raise ValueError(f"distance must be positive, got {distance_km}")
    return intercept_db + slope_db_decade * math.log10(distance_km)


def noise_power_dbm(noise_density_dbm_hz: float, bandwidth_hz: float) -> float:
    """Total noise power over a bandwidth, in dBm."""
    if not (bandwidth_hz > 0.0):
        raise ValueError(f"bandwidth must be positive, got {bandwidth_hz}")
    return noise_density_dbm_hz + 10.0 * math.log10(bandwidth_hz)


def channel_gain(bs: BaseStation, ue: UserEquipment, constants: RadioConstants) -> float:
    """Noise-normalized channel power gain between a BS and a UE.

    gain = 10^(-PL(d)/10) / noise_power_watts, antenna gains 0 dBi.
    """
    d = distance_km(bs, ue)
    if d == 0.0:
        raise ValueError(f"BS {bs.id} and UE {ue.id} are coincident")
    pl = path_loss_db(
        d, constants.pathloss_intercept_db, constants.pathloss_slope_db_decade
    )
    return 10.0 ** (-pl / 10.0) / constants.noise_power_watts()


def received_power_dbm(bs: BaseStation, ue: UserEquipment, constants: RadioConstants) -> float:
    d = distance_km(bs, ue)
    if d == 0.0:
        raise ValueError(f"BS {bs.id} and UE {ue.id} are coincident")
    return bs.budget_dbm - path_loss_db(
        d, constants.pathloss_intercept_db, constants.pathloss_slope_db_decade
    )


def normalized_sic_threshold(constants: RadioConstants, gains: tuple[float, ...] | list[float]) -> float:
    """Normalized SIC detection threshold for one cluster (or CoMP-set).

    The configured threshold (dBm) is a minimum transmit-power gap theta_w.
    On the noise-normalized scale the SIC inequality reads
    D*gain - 1 >= theta, so theta = theta_w * min(gain) - 1 reproduces the
    gap D >= theta_w exactly at the weakest decoder of the cluster.
    """
    if not gains:
        raise ValueError("need at least one gain")
    theta_w = dbm_to_watts(constants.sic_threshold_dbm)
    return max(0.0, theta_w * min(gains) - 1.0)


def _strong_set(
    scenario: Scenario, ue: UserEquipment, threshold_db: float
) -> list[str]:
    """BS ids whose received power is within threshold_db of the strongest,
    strongest first, capped at MAX_COMP_SET_SIZE."""
    ranked = sorted(
        (
            (-received_power_dbm(b, ue, scenario.constants), b.id)
            for b in scenario.base_stations
        ),
    )
    best = -ranked[0][0]
    strong = [bid for neg, bid in ranked if -neg >= best - threshold_db]
    return strong[:MAX_COMP_SET_SIZE]


def _order_members(scenario: Scenario, members: frozenset[str]) -> tuple[str, ...]:
    # macro first, then small cells by id: stable cluster indexing downstream
    macros = sorted(m for m in members if scenario.bs(m).kind == "macro")
    smalls = sorted(m for m in members if scenario.bs(m).kind == "small")
    return tuple(macros + smalls)


def categorize_users(scenario: Scenario, threshold_db: float = 3.0) -> Scenario:
    """Label every UE comp/non-comp and build CoMP-sets with NOMA clusters.

    Explicit per-UE categories and serving sets from the config always win;
    the received-power threshold rule only fills in the rest.  A UE is comp
    when at least two BSs are received within ``threshold_db`` of the
    strongest one.
    """
    labeled: list[UserEquipment] = []
    for ue in scenario.users:
        if ue.category == "comp":
            serving = ue.serving_set or tuple(_strong_set(scenario, ue, threshold_db))
            if len(serving) < 2:
                raise CategorizationError(
                    f"UE {ue.id} is marked comp but only {len(serving)} BS is "
                    f"within {threshold_db} dB of the strongest"
                )
            labeled.append(replace(ue, serving_set=tuple(serving)))
            continue
        if ue.category == "non_comp":
            if ue.serving_set:
                serving = ue.serving_set
            else:
                serving = (_strong_set(scenario, ue, threshold_db)[0],)
            labeled.append(replace(ue, serving_set=serving))
            continue
        strong = _strong_set(scenario, ue, threshold_db)
        if len(strong) >= 2:
            labeled.append(replace(ue, category="comp", serving_set=tuple(strong)))
        else:
            labeled.append(replace(ue, category="non_comp", serving_set=(strong[0],)))

    # group comp users by their (unordered) serving set
    groups: dict[frozenset[str], list[str]] = {}
    for ue in labeled:
        if ue.category == "comp":
            groups.setdefault(frozenset(ue.serving_set), []).append(ue.id)

    ordered_groups = [
        (_order_members(scenario, key), ues)
        for key, ues in sorted(groups.items(), key=lambda kv: sorted(kv[0]))
    ]

    # distribute each BS's non-comp users round-robin over the CoMP-sets the
    # BS belongs to; every cluster must end up with at least one of them
    per_set_non_comp: list[dict[str, list[str]]] = [
        {m: [] for m in members} for members, _ in ordered_groups
    ]
    standalone: dict[str, list[str]] = {}
    for ue in labeled:
        if ue.category != "non_comp":
            continue
        bs_id = ue.serving_set[0]
        owning = [i for i, (members, _) in enumerate(ordered_groups) if bs_id in members]
        if not owning:
            standalone.setdefault(bs_id, []).append(ue.id)
            continue
        counts = [len(per_set_non_comp[i][bs_id]) for i in owning]
        target = owning[counts.index(min(counts))]
        per_set_non_comp[target][bs_id].append(ue.id)

    def by_gain(bs_id: str, ue_ids: list[str]) -> tuple[str, ...]:
        b = scenario.bs(bs_id)
        return tuple(
            sorted(
                ue_ids,
                key=lambda uid: (
                    channel_gain(b, scenario.ue(uid), scenario.constants),
                    uid,
                ),
            )
        )

    comp_sets = []
    for i, (members, comp_ues) in enumerate(ordered_groups):
        for m in members:
            if not per_set_non_comp[i][m]:
                raise CategorizationError(
                    f"NOMA cluster at BS {m} in CoMP-set {members} has no "
                    "non-CoMP user; every cluster needs at least one"
                )
        comp_sets.append(
            CompSet(
                members=members,
                comp_ues=tuple(comp_ues),
                non_comp_ues=tuple(by_gain(m, per_set_non_comp[i][m]) for m in members),
            )
        )

    labeled_scenario = replace(
        scenario,
        users=tuple(labeled),
        comp_sets=tuple(comp_sets),
        standalone=tuple(
            (bs_id, by_gain(bs_id, ues)) for bs_id, ues in sorted(standalone.items())
        ),
    )
    return labeled_scenario


def default_comp_requirement(
    comp_gains: tuple[float, ...], budgets: tuple[float, ...], cluster_size: int
) -> float:
    """OMA-equivalent rate requirement for a CoMP-UE under equal power and
    spectrum split: (1/M) log2(1 + sum_n p_t^(n) gain^(n))."""
    snr = sum(p * g for p, g in zip(budgets, comp_gains))
    return math.log2(1.0 + snr) / cluster_size


def build_comp_set_model(
    scenario: Scenario,
    comp_set: CompSet,
    sic_order: tuple[int, ...] | None = None,
) -> CompSetModel:
    """Assemble the solver-facing model of one CoMP-set.

    CoMP-UE SIC order defaults to ascending channel gain with the first
    small-cell member (the ordering the numerical studies use).  Rate
    requirements default to the users' OMA rates.
    """
    members = comp_set.members
    budgets = tuple(scenario.bs(m).budget_watts for m in members)
    consts = scenario.constants

    def gains_to_members(ue_id: str) -> tuple[float, ...]:
        ue = scenario.ue(ue_id)
        return tuple(channel_gain(scenario.bs(m), ue, consts) for m in members)

    comp_gain_rows = [gains_to_members(u) for u in comp_set.comp_ues]

    ref = next(
        (i for i, m in enumerate(members) if scenario.bs(m).kind == "small"), 0
    )
    order = sic_order or tuple(
        sorted(range(len(comp_set.comp_ues)), key=lambda k: comp_gain_rows[k][ref])
    )
    comp_ues = tuple(comp_set.comp_ues[k] for k in order)
    comp_gains = tuple(comp_gain_rows[k] for k in order)

    non_comp_gains = tuple(
        tuple(gains_to_members(u) for u in ues) for ues in comp_set.non_comp_ues
    )
    cluster_sizes = [len(comp_ues) + len(ues) for ues in comp_set.non_comp_ues]

    non_comp_requirements = tuple(
        tuple(
            math.log2(1.0 + budgets[n] * non_comp_gains[n][i][n]) / cluster_sizes[n]
            for i in range(len(comp_set.non_comp_ues[n]))
        )
        for n in range(len(members))
    )
    comp_requirements = tuple(
        default_comp_requirement(g, budgets, max(cluster_sizes)) for g in comp_gains
    )

    all_gains = [g for row in comp_gains for g in row] + [
        non_comp_gains[n][i][n]
        for n in range(len(members))
        for i in range(len(comp_set.non_comp_ues[n]))
    ]
    theta = normalized_sic_threshold(consts, all_gains)

    return CompSetModel(
        bs_ids=members,
        budgets=budgets,
        comp_ues=comp_ues,
        comp_gains=comp_gains,
        comp_requirements=comp_requirements,
        non_comp_ues=comp_set.non_comp_ues,
        non_comp_gains=non_comp_gains,
        non_comp_requirements=non_comp_requirements,
        sic_threshold=theta,
    )


def build_cluster(scenario: Scenario, bs_id: str, ue_ids: tuple[str, ...]) -> NomaCluster:
    """Single-cell NOMA cluster for one BS, users sorted ascending by gain,
    OMA-default rate requirements."""
    b = scenario.bs(bs_id)
    gains = sorted(
        channel_gain(b, scenario.ue(u), scenario.constants) for u in ue_ids
    )
    m = len(gains)
    reqs = tuple(math.log2(1.0 + b.budget_watts * g) / m for g in gains)
    return NomaCluster(
        gains=tuple(gains),
        power_budget=b.budget_watts,
        rate_requirements=reqs,
        sic_threshold=normalized_sic_threshold(scenario.constants, tuple(gains)),
    )


# --- config I/O -------------------------------------------------------------

def load_scenario(path: str) -> Scenario:
    """Parse and validate a scenario config (TOML).  Omitted constants fall
    back to the standard defaults; omitted BS budgets default per kind
    (46 dBm macro, 25 dBm small)."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise
    except (tomllib.TOMLDecodeError, OSError) as exc:
        raise ScenarioError(f"cannot parse scenario {path}: {exc}") from exc
    return scenario_from_dict(raw)


def scenario_from_dict(raw: dict) -> Scenario:
    cblock = raw.get("constants", {})
    if not isinstance(cblock, dict):
        raise ScenarioError("constants must be a table")
    constants = RadioConstants(
        rb_bandwidth_hz=float(cblock.get("rb_bandwidth_hz", DEFAULT_RB_BANDWIDTH_HZ)),
        noise_density_dbm_hz=float(
            cblock.get("noise_density_dbm_hz", DEFAULT_NOISE_DENSITY_DBM_HZ)
        ),
        sic_threshold_dbm=float(
            cblock.get("sic_threshold_dbm", DEFAULT_SIC_THRESHOLD_DBM)
        ),
        pathloss_intercept_db=float(
            cblock.get("pathloss_intercept_db", DEFAULT_PATHLOSS_INTERCEPT_DB)
        ),
        pathloss_slope_db_decade=float(
            cblock.get("pathloss_slope_db_decade", DEFAULT_PATHLOSS_SLOPE_DB)
        ),
    )

    stations = []
    for row in raw.get("base_stations", []):
        try:
            kind = row["kind"]
            default_budget = (
                DEFAULT_MACRO_BUDGET_DBM if kind == "macro" else DEFAULT_SMALL_BUDGET_DBM
            )
            stations.append(
                BaseStation(
                    id=str(row["id"]),
                    kind=kind,
                    x_km=float(row["x_km"]),
                    y_km=float(row["y_km"]),
                    budget_dbm=float(row.get("budget_dbm", default_budget)),
                )
            )
        except KeyError as exc:
            raise ScenarioError(f"base station entry missing field {exc}") from exc
    if not stations:
        raise ScenarioError("scenario needs at least one base station")

    users = []
    for row in raw.get("users", []):
        try:
            users.append(
                UserEquipment(
                    id=str(row["id"]),
                    x_km=float(row["x_km"]),
                    y_km=float(row["y_km"]),
                    category=row.get("category"),
                    serving_set=tuple(row.get("serving_set", ())),
                )
            )
        except KeyError as exc:
            raise ScenarioError(f"user entry missing field {exc}") from exc

    scenario = Scenario(
        constants=constants,
        base_stations=tuple(stations),
        users=tuple(users),
    )

    declared = raw.get("comp_sets", [])
    if declared:
        categorized = categorize_users(scenario)
        derived = {frozenset(cs.members) for cs in categorized.comp_sets}
        for row in declared:
            members = frozenset(row.get("members", ()))
            if members not in derived:
                raise ScenarioError(
                    f"declared comp_set {sorted(members)} does not match any "
                    "group derived from the users' serving sets"
                )
        return categorized
    return scenario


def _toml_value(v: object) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)}")


def save_scenario(scenario: Scenario, path: str) -> None:
    """Write a scenario back to TOML; load_scenario(save(s)) round-trips
    field-for-field."""
    c = scenario.constants
    lines = [
        "[constants]",
        f"rb_bandwidth_hz = {_toml_value(c.rb_bandwidth_hz)}",
        f"noise_density_dbm_hz = {_toml_value(c.noise_density_dbm_hz)}",
        f"sic_threshold_dbm = {_toml_value(c.sic_threshold_dbm)}",
        f"pathloss_intercept_db = {_toml_value(c.pathloss_intercept_db)}",
        f"pathloss_slope_db_decade = {_toml_value(c.pathloss_slope_db_decade)}",
        "",
    ]
    for b in scenario.base_stations:
        lines += [
            "[[base_stations]]",
            f"id = {_toml_value(b.id)}",
            f"kind = {_toml_value(b.kind)}",
            f"x_km = {_toml_value(b.x_km)}",
            f"y_km = {_toml_value(b.y_km)}",
            f"budget_dbm = {_toml_value(b.budget_dbm)}",
            "",
        ]
    for u in scenario.users:
        lines += [
            "[[users]]",
            f"id = {_toml_value(u.id)}",
            f"x_km = {_toml_value(u.x_km)}",
            f"y_km = {_toml_value(u.y_km)}",
        ]
        if u.category is not None:
            lines.append(f"category = {_toml_value(u.category)}")
        if u.serving_set:
            lines.append(f"serving_set = {_toml_value(list(u.serving_set))}")
        lines.append("")
    for cs in scenario.comp_sets:
        lines += [
            "[[comp_sets]]",
            f"members = {_toml_value(list(cs.members))}",
            "",
        ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
