"""EWMA monitoring of multivariate simple linear profiles."""

from .chart import (
    ChartConfig,
    ChartVerdict,
    EwmaChart,
    EwmaChartState,
    control_limit,
    ewma_init,
    ewma_update,
    process_sample,
    shewhart_verdict,
    v_statistic,
)
from .errors import (
    DegenerateDesign,
    DimensionMismatch,
    IndexOutOfRange,
    NoBracket,
    NotPositiveDefinite,
    ProfileError,
)
from .estimate import (
    CoefSumVector,
    SigmaB,
    coef_sum,
    cov_intercept_slope,
    cov_intercepts,
    cov_slopes,
    fit_profiles,
    point_variance,
    sigma_b,
)
from .model import (
    CoefMatrix,
    DesignPoints,
    ErrorCovariance,
    ProcessModel,
    build_model,
    mean_response,
    reference_model,
)
from .simulate import (
    ArlEstimate,
    Calibration,
    ShiftScenario,
    SimulationConfig,
    apply_scenario,
    arl_table,
    calibrate_limit,
    calibrate_shewhart,
    estimate_arl,
    generate_sample,
    run_length,
    sample_errors,
)

__version__ = "0.1.0"
