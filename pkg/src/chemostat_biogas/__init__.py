"""Optimal biogas production in a chemostat: growth models, feedbacks, rewards."""

from .control import (
    MRAP,
    AppendixSchedule,
    Constant,
    ControlLaw,
    MRAPCurve,
    PiecewiseConstant,
    appendix_schedule,
    curve_law,
    law_from_dict,
    mrap_to_sbar,
    saturate,
)
from .dynamics import (
    InvariantBox,
    StateSX,
    StateSZ,
    check_controllability,
    invariant_box,
    rhs_sx,
    rhs_sz,
    singular_rate_max,
    to_sx,
    to_sz,
)
from .errors import (
    AssumptionError,
    BiogasError,
    BudgetError,
    ConfigError,
    ConsistencyError,
    ControlError,
    DomainError,
    IntegrationError,
    NumericError,
)
from .growth import (
    GrowthModel,
    MaximizerCurve,
    ProcessParams,
    check_assumptions,
    maximizer_curve,
    mu,
    phi,
    phi_bar,
    s_bar,
    s_bar_slope,
)
from .rewards import (
    Auxiliary,
    Average,
    Discounted,
    FiniteHorizon,
    appendix_averages,
    appendix_formulas,
    auxiliary_run,
    auxiliary_value_W,
    average_reward_limits,
    brute_force_value,
    discounted_limit,
    normalized_reward_surface,
    reward,
    value_frame,
)
from .simulate import SimOptions, Trajectory, hitting_time, simulate, simulate_schedules

__version__ = "0.1.0"
