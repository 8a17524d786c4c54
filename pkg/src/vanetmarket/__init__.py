"""Workbench for pricing private vehicular data sharing: calibrates privacy-loss
and consumer-utility models from trajectories, maximizes the data consumer's
profit over (payment, sampling frequency, server count), and simulates the
distributed secret-sharing collection network."""

from .econ import (
    EconParams,
    PrivacySensitivity,
    ProfitBreakdown,
    expected_participants,
    lognormal_cdf,
    lognormal_pdf,
    per_server_cost,
    profit,
    profit_terms,
    validate_params,
    vehicle_utility,
)
from .optimize import (
    Bounds,
    DEFAULT_BOUNDS,
    Solution,
    SweepResult,
    grid_oracle,
    nelder_mead,
    optimize_profit,
    sweep,
)
from .privacy import (
    CalibrationReport,
    DEFAULT_CALIBRATION_FREQS,
    LossModel,
    calibrate_per_server_loss,
    discrete_frechet,
    fit_per_server_decay,
    mean_similarity_by_frequency,
    path_similarity,
    total_loss,
    total_loss_raw,
)
from .smpc import (
    AdversaryModel,
    AggregationTranscript,
    FIELD_PRIME,
    ServerInbox,
    adversary_reconstruct,
    aggregate_secure,
    empirical_privacy_curve,
    route_samples,
    secret_share,
)
from .trajectories import (
    GeoSample,
    GridSpec,
    PlanarPath,
    SpatioTemporalMap,
    TraceParseError,
    Trajectory,
    build_map,
    generate_synthetic,
    parse_traces,
    project_planar,
    subsample,
)
from .utility import (
    UtilityFit,
    UtilityModel,
    UtilitySurface,
    build_utility_surface,
    eval_utility,
    fit_utility,
    grid_utility,
)

__version__ = "0.1.0"

__all__ = [
    "AdversaryModel",
    "AggregationTranscript",
    "Bounds",
    "CalibrationReport",
    "DEFAULT_BOUNDS",
    "DEFAULT_CALIBRATION_FREQS",
    "EconParams",
    "FIELD_PRIME",
    "GeoSample",
    "GridSpec",
    "LossModel",
    "PlanarPath",
    "PrivacySensitivity",
    "ProfitBreakdown",
    "ServerInbox",
    "Solution",
    "SpatioTemporalMap",
    "SweepResult",
    "TraceParseError",
    "Trajectory",
    "UtilityFit",
    "UtilityModel",
    "UtilitySurface",
    "adversary_reconstruct",
    "aggregate_secure",
    "build_map",
    "build_utility_surface",
    "calibrate_per_server_loss",
    "discrete_frechet",
    "empirical_privacy_curve",
    "eval_utility",
    "expected_participants",
    "fit_per_server_decay",
    "fit_utility",
    "generate_synthetic",
    "grid_oracle",
    "grid_utility",
    "lognormal_cdf",
    "lognormal_pdf",
    "mean_similarity_by_frequency",
    "nelder_mead",
    "optimize_profit",
    "parse_traces",
    "path_similarity",
    "per_server_cost",
    "profit",
    "profit_terms",
    "project_planar",
    "route_samples",
    "secret_share",
    "subsample",
    "sweep",
    "total_loss",
    "total_loss_raw",
    "validate_params",
    "vehicle_utility",
]
