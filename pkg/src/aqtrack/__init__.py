"""Distributed aggregative optimization with finite-bit communication.

Simulates gradient tracking over a peer network where every exchanged
quantity passes through an adaptive-range uniform quantizer, plus the
infinite-precision baseline, closed-form parameter tuning, and empirical
checks of the convergence certificate.
"""

from .errors import (
    AqtrackError,
    ConfigError,
    DegenerateSpectrumError,
    DivergenceError,
    InfeasibleEpsilonError,
    InvalidValueError,
    NoConvergenceError,
    NotConnectedError,
    NotDoublyStochasticError,
    ProtocolError,
    SaturationError,
    ShapeError,
    TopologyError,
    UntunableError,
)
from .topology import (
    MixingMatrix,
    build_complete,
    build_ring,
    load_matrix,
    load_matrix_file,
)
from .problems import (
    AggregativeProblem,
    ReferenceSolution,
    aggregate,
    eval_aggregated_gradient,
    eval_global,
    make_bandwidth_sharing,
    make_placement,
    make_quadratic_synthetic,
    operating_box,
    solve_reference,
)
from .codec import ChannelCodec, ScalingSchedule, UniformQuantizer, bits_per_scalar
from .engine import RunConfig, Trajectory, run, write_trajectory_csv
from .analysis import (
    Lemma3Result,
    ReplayResult,
    TuningReport,
    alpha_upper_bound,
    build_H,
    check_lemma3,
    check_lemma4,
    choose_gamma,
    error_envelope_series,
    fit_linear_rate,
    format_tuning_report,
    level_bound,
    make_tuning_report,
    performance_index,
    replay_reconstructions,
    spectral_radius,
    theta_series,
    write_diagnostics_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AggregativeProblem",
    "AqtrackError",
    "ChannelCodec",
    "ConfigError",
    "DegenerateSpectrumError",
    "DivergenceError",
    "InfeasibleEpsilonError",
    "InvalidValueError",
    "Lemma3Result",
    "MixingMatrix",
    "NoConvergenceError",
    "NotConnectedError",
    "NotDoublyStochasticError",
    "ProtocolError",
    "ReferenceSolution",
    "ReplayResult",
    "RunConfig",
    "SaturationError",
    "ScalingSchedule",
    "ShapeError",
    "TopologyError",
    "Trajectory",
    "TuningReport",
    "UniformQuantizer",
    "UntunableError",
    "aggregate",
    "alpha_upper_bound",
    "bits_per_scalar",
    "build_H",
    "build_complete",
    "build_ring",
    "check_lemma3",
    "check_lemma4",
    "choose_gamma",
    "error_envelope_series",
    "eval_aggregated_gradient",
    "eval_global",
    "fit_linear_rate",
    "format_tuning_report",
    "level_bound",
    "load_matrix",
    "load_matrix_file",
    "make_bandwidth_sharing",
    "make_placement",
    "make_quadratic_synthetic",
    "make_tuning_report",
    "operating_box",
    "performance_index",
    "replay_reconstructions",
    "run",
    "solve_reference",
    "spectral_radius",
    "theta_series",
    "write_diagnostics_csv",
    "write_trajectory_csv",
    "__version__",
]
