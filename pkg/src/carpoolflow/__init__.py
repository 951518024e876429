"""Trajectory analytics for stochastic carpooling services.

Reduces driver GPS traces to a meeting-point network topology and computes
the operational indicators of a carpooling line: driver flows, predicted
passenger waiting times, door-to-door versus meeting-point match counts,
match probabilities, and driver participation rates.
"""

from .cluster import (
    ClusterLabels,
    CompleteLinkageClusterer,
    Dendrogram,
    OdVector,
    complete_linkage,
    cut,
    door_to_door_matches,
    od_vector,
)
from .errors import CarpoolError
from .flow import (
    FlowProfile,
    ObservedWaits,
    TimeGrid,
    UNAVAILABLE,
    WaitProfile,
    WeeklyComparison,
    driver_flow,
    rmse,
    wait_times,
    wait_vs_participation,
    weekly_comparison,
)
from .geo import GeoPoint, GpsSample, Trace, haversine_distance, planar_distance, within_buffer
from .matchprob import SubCubeModel, match_probability_exact, match_probability_mc
from .network import CarpoolLine, CarpoolNetwork, MeetingPoint, build_network, line_variants
from .participation import (
    CachingHttpRouter,
    OdEntry,
    OdMatrix,
    RoutePlan,
    RouterClient,
    StraightLineRouter,
    coincident_flow,
    infer_routes,
    participation_rate,
)
from .simplify import (
    MeetingPointPass,
    SimplifiedTrace,
    TimeWindow,
    TraceSimplifier,
    compression_rate,
    estimate_arrival,
    intersect_buffers,
    simplify_trace,
)
from .simulate import ArrivalModel, SyntheticScenario, generate_traces, simulate_waits

__version__ = "0.1.0"

__all__ = [
    "ArrivalModel",
    "CachingHttpRouter",
    "CarpoolError",
    "CarpoolLine",
    "CarpoolNetwork",
    "ClusterLabels",
    "CompleteLinkageClusterer",
    "Dendrogram",
    "FlowProfile",
    "GeoPoint",
    "GpsSample",
    "MeetingPoint",
    "MeetingPointPass",
    "ObservedWaits",
    "OdEntry",
    "OdMatrix",
    "OdVector",
    "RoutePlan",
    "RouterClient",
    "SimplifiedTrace",
    "StraightLineRouter",
    "SubCubeModel",
    "SyntheticScenario",
    "TimeGrid",
    "TimeWindow",
    "Trace",
    "TraceSimplifier",
    "UNAVAILABLE",
    "WaitProfile",
    "WeeklyComparison",
    "build_network",
    "coincident_flow",
    "complete_linkage",
    "compression_rate",
    "cut",
    "door_to_door_matches",
    "driver_flow",
    "estimate_arrival",
    "generate_traces",
    "haversine_distance",
    "infer_routes",
    "intersect_buffers",
    "line_variants",
    "match_probability_exact",
    "match_probability_mc",
    "od_vector",
    "participation_rate",
    "planar_distance",
    "rmse",
    "simplify_trace",
    "simulate_waits",
    "wait_times",
    "wait_vs_participation",
    "weekly_comparison",
    "within_buffer",
]
