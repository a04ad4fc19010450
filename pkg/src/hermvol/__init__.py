"""Sequential Bayesian toolkit for stochastic volatility with polynomial
leverage: simulation, online estimation, model selection, and
news-impact-curve reporting."""

from .hermite import (
    CurveSummary,
    HermiteOrder,
    LeverageSpec,
    hermite_basis,
    hermite_eval,
    leverage_curve,
    leverage_eval,
)
from .series import ReturnSeries
from .model import (
    LinearLeverageParams,
    SimOutput,
    SvParams,
    make_params,
    obs_logdensity,
    reparam_from_uncorrelated,
    reparam_to_uncorrelated,
    shock_from_obs,
    simulate,
    state_mean,
    stationary_moments,
)
from .filter import (
    DEFAULT_PRIOR,
    DegeneracyError,
    FilterResult,
    Particle,
    ParticleCloud,
    PriorScheme,
    PriorSpec,
    SufficientStats,
    grid_filter_oracle,
    init_cloud,
    naive_pl_step,
    plav_step,
    resample,
    run_filter,
    sample_theta,
    update_stats,
)
from .selection import (
    LpdrSeries,
    SelectionReport,
    log_marglik,
    lpdr,
    select_order,
)

__version__ = "0.1.0"
