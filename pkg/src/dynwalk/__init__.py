"""Dynamical simple random walk on Z^2: exceptional-time experiments."""

__version__ = "0.1.0"

from .analysis import DimensionReport, EscapeReport, barrier, box_count_dimension, escape_rate_scan
from .core import (
    Direction,
    DynamicalWalkRealization,
    RefreshEvents,
    RefreshTimeline,
    batch_steps,
    load_realization,
    positions,
    refresh_events,
    refreshed_indices,
    sample_realization,
    save_realization,
    step_at,
    two_slice_steps,
)
from .dirichlet import HittingField, solve_hitting, walk_on_squares
from .estimators import (
    EstimatorReport,
    LeaveReport,
    RatioReport,
    SummaryTable,
    UndefinedRatioError,
    bootstrap_stderr,
    check_leave,
    check_summary,
    estimate_E_M_prob,
    estimate_f,
    estimate_g_event,
    estimate_joint_return,
    estimate_return_prob,
    fit_lawler_constant,
    hitting_prob_exact,
    hitting_prob_mc,
    joint_return_oracle,
    second_moment_lower_bound,
)
from .prefix import PrefixState
from .schedule import (
    K_of,
    PiecewiseIndicator,
    Schedule,
    desk_schedule,
    event_E_M,
    event_G_k,
    event_R_eps_k,
    event_R_k,
    levels_dense,
    paper_schedule,
    scan_E_M,
)
