"""Discrete-time queueing laboratory.

Single-hop queueing networks under routing (join the shortest queue) and
scheduling (max-weight, with or without fading) policies: polyhedral
capacity regions, drift-based moment bounds, exact pathwise invariants,
state-space-collapse diagnostics, and a batch-means Monte Carlo engine
that checks the theory against simulation.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .bounds import (
    BoundReport,
    PiBoundReport,
    ZetaParams,
    fading_bounds,
    lb_nth_moment,
    lb_routing,
    lb_scheduling,
    lb_single_server,
    pi_k_bound_check,
    ub_jsq,
    ub_mws,
    ub_nth_moment,
    zeta_for_face,
)
from .collapse import (
    Decomposition,
    HajekReport,
    PathCheckReport,
    decompose,
    hajek_diagnostic,
    perp_moment_sweep,
    slot_record_check,
    unused_service_identity_check,
    vperp_drift_check,
)
from .core import BoundedIntDist, FiniteRealDist, RandomStream, angle, inner, norm
from .dynamics import (
    FadingSystem,
    RoutingSystem,
    SchedulingSystem,
    SlotRecord,
    run_path,
    single_server_step,
    step,
    truncated_chain_solve,
)
from .errors import (
    ConfigError,
    DegenerateError,
    DimensionError,
    DomainError,
    InvariantViolation,
    NonCoordinateConvexError,
    NotInteriorError,
    TruncationError,
    UnstableError,
    UnsupportedDimensionError,
    VerificationError,
)
from .geometry import (
    CapacityRegion,
    FadingModel,
    HeavyTrafficPoint,
    Hyperplane,
    ScheduleSet,
    cone_angle_k,
    fading_cone_angle_k,
    fading_face_service_dist,
    fading_gamma_k,
    fading_region,
    gamma_k,
    heavy_traffic_point,
    hull_halfspaces,
    onoff_downlink_fading,
    onoff_downlink_region,
    per_state_face_offsets,
    region_from_json,
    region_to_json,
)
from .montecarlo import (
    EstimateResult,
    MetricSpec,
    SimConfig,
    SteadyStateEstimate,
    SweepResult,
    SweepRow,
    config_for_eps,
    estimate,
    face_frequency,
    sweep,
    unused_service_mean,
)

__all__ = [
    "__version__",
    "BoundReport",
    "BoundedIntDist",
    "CapacityRegion",
    "ConfigError",
    "Decomposition",
    "DegenerateError",
    "DimensionError",
    "DomainError",
    "EstimateResult",
    "FadingModel",
    "FadingSystem",
    "FiniteRealDist",
    "HajekReport",
    "HeavyTrafficPoint",
    "Hyperplane",
    "InvariantViolation",
    "MetricSpec",
    "NonCoordinateConvexError",
    "NotInteriorError",
    "PathCheckReport",
    "PiBoundReport",
    "RandomStream",
    "RoutingSystem",
    "ScheduleSet",
    "SchedulingSystem",
    "SimConfig",
    "SlotRecord",
    "SteadyStateEstimate",
    "SweepResult",
    "SweepRow",
    "TruncationError",
    "UnstableError",
    "UnsupportedDimensionError",
    "VerificationError",
    "ZetaParams",
    "angle",
    "cone_angle_k",
    "config_for_eps",
    "decompose",
    "estimate",
    "face_frequency",
    "fading_bounds",
    "fading_cone_angle_k",
    "fading_face_service_dist",
    "fading_gamma_k",
    "fading_region",
    "gamma_k",
    "hajek_diagnostic",
    "heavy_traffic_point",
    "hull_halfspaces",
    "inner",
    "lb_nth_moment",
    "lb_routing",
    "lb_scheduling",
    "lb_single_server",
    "norm",
    "onoff_downlink_fading",
    "onoff_downlink_region",
    "per_state_face_offsets",
    "perp_moment_sweep",
    "pi_k_bound_check",
    "region_from_json",
    "region_to_json",
    "run_path",
    "single_server_step",
    "slot_record_check",
    "step",
    "sweep",
    "truncated_chain_solve",
    "ub_jsq",
    "ub_mws",
    "ub_nth_moment",
    "unused_service_identity_check",
    "unused_service_mean",
    "vperp_drift_check",
    "zeta_for_face",
]
