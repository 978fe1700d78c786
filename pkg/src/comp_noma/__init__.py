"""Dynamic downlink power allocation for NOMA and CoMP-NOMA multi-cell
networks: single-cell closed-form allocation, joint and distributed
multi-BS optimization, and spectral/energy-efficiency evaluation."""

from .analysis import EfficiencyReport, MinorReport, efficiency, finite_diff_hessian, hessian_minors
from .distributed import (
    DistributedOutcome,
    ValidityRecord,
    desired_power_distributed,
    desired_power_joint,
    solve_cs_comp,
    solve_dpo,
    validate_dpo,
)
from .joint import JointOutcome, check_joint_constraints, enumerate_comp_sic_orders, solve_jpo
from .rate_model import (
    CompAllocation,
    CompSetModel,
    NomaCluster,
    PowerAllocation,
    all_joint_rates,
    joint_sum_rate,
    noma_rate,
    offset_ici,
    oma_rate,
    rate_comp_joint,
    rate_distributed,
    rate_non_comp,
    sinr_inui_approx,
)
from .scenario import (
    BaseStation,
    CategorizationError,
    CompSet,
    RadioConstants,
    Scenario,
    ScenarioError,
    UserEquipment,
    build_cluster,
    build_comp_set_model,
    categorize_users,
    channel_gain,
    load_scenario,
    noise_power_dbm,
    normalized_sic_threshold,
    path_loss_db,
    save_scenario,
)
from .single_cell import (
    SolverOutcome,
    check_constraints,
    default_rate_requirements,
    grid_oracle,
    solve_closed_form,
)

__version__ = "0.1.0"
