"""Topological simplification of GPS traces onto a carpooling line.

A raw trace is reduced to its skeleton: origin, one pass per meeting point
of the matched line variant (carrying an estimated arrival time), and
destination. The arrival estimate at a meeting point is the timestamp of the
trace sample closest to it.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import NoIntersectionError
from .geo import GpsSample, Trace, planar_distance_many
from .network import CarpoolLine, CarpoolNetwork, MeetingPoint, line_variants

DEFAULT_BUFFER_RADIUS_M = 1000.0


@dataclass(frozen=True)
class TimeWindow:
    """Half-open interval [start, end).

    With ``daily=True`` membership is decided by time of day: an instant is
    inside the window when its offset from ``start``, taken modulo 24 hours,
    falls below the window length. That is how a "06:30 to 09:00 every
    morning" operating window is applied to data spanning many days.
    """

    start: datetime
    end: datetime
    daily: bool = False

    def __post_init__(self) -> None:
        if self.start.tzinfo is None or self.end.tzinfo is None:
            raise ValueError("window bounds must be timezone-aware")
        if self.end <= self.start:
            raise ValueError("window end must be after start")
        if self.daily and self.seconds() > 86400.0:
            raise ValueError("a daily window cannot be longer than 24 hours")

    def seconds(self) -> float:
        return (self.end - self.start).total_seconds()

    def minutes(self) -> float:
        return self.seconds() / 60.0

    def contains(self, t: datetime) -> bool:
        if self.daily:
            return (t - self.start).total_seconds() % 86400.0 < self.seconds()
        return self.start <= t < self.end


@dataclass(frozen=True)
class MeetingPointPass:
    """The closest approach of a trace to one meeting point."""

    meeting_point_id: str
    closest_sample: GpsSample
    distance_m: float

    @property
    def arrival_time(self) -> datetime:
        return self.closest_sample.timestamp


@dataclass(frozen=True)
class SimplifiedTrace:
    """A trace reduced to origin, ordered meeting-point passes, destination."""

    trace_id: str
    origin: GpsSample
    passes: Tuple[MeetingPointPass, ...]
    destination: GpsSample
    source_length: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "passes", tuple(self.passes))
        times = [p.arrival_time for p in self.passes]
        for earlier, later in zip(times, times[1:]):
            if later <= earlier:
                raise ValueError(f"trace {self.trace_id!r}: pass arrival times must strictly increase")
        if times:
            if not self.origin.timestamp <= times[0]:
                raise ValueError(f"trace {self.trace_id!r}: first pass precedes origin")
            if not times[-1] <= self.destination.timestamp:
                raise ValueError(f"trace {self.trace_id!r}: last pass follows destination")
        if self.source_length < self.point_count:
            raise ValueError(
                f"trace {self.trace_id!r}: source length {self.source_length} "
                f"below simplified point count {self.point_count}"
            )

    @property
    def point_count(self) -> int:
        return 2 + len(self.passes)

    @property
    def node_ids(self) -> Tuple[str, ...]:
        return tuple(p.meeting_point_id for p in self.passes)


def _sample_coordinates(trace: Trace) -> Tuple[np.ndarray, np.ndarray]:
    lons = np.fromiter((s.position.lon for s in trace.samples), dtype=float, count=len(trace))
    lats = np.fromiter((s.position.lat for s in trace.samples), dtype=float, count=len(trace))
    return lons, lats


def intersect_buffers(
    trace: Trace, network: CarpoolNetwork, radius_m: float = DEFAULT_BUFFER_RADIUS_M
) -> Dict[str, List[GpsSample]]:
    """Trace samples inside each meeting point's buffer, in trace order.

    Meeting points the trace never approaches are omitted from the result.
    """
    if radius_m <= 0.0:
        raise ValueError(f"buffer radius must be positive, got {radius_m}")
    lons, lats = _sample_coordinates(trace)
    out: Dict[str, List[GpsSample]] = {}
    for point in network.points:
        inside = planar_distance_many(lons, lats, point.location) <= radius_m
        if inside.any():
            out[point.id] = [trace.samples[i] for i in np.flatnonzero(inside)]
    return out


def estimate_arrival(
    trace: Trace, point: MeetingPoint, radius_m: float = DEFAULT_BUFFER_RADIUS_M
) -> MeetingPointPass:
    """Arrival estimate at ``point``: the trace sample closest to it.

    The minimum is over the whole trace; among equidistant samples the
    earliest wins. Raises :class:`NoIntersectionError` when the trace never
    enters the point's buffer.
    """
    lons, lats = _sample_coordinates(trace)
    distances = planar_distance_many(lons, lats, point.location)
    # argmin returns the first minimizer; samples are in timestamp order,
    # so ties resolve to the earliest timestamp
    idx = int(np.argmin(distances))
    best = float(distances[idx])
    if best > radius_m:
        raise NoIntersectionError(
            f"trace {trace.id!r} never enters the {radius_m:.0f} m buffer of {point.id!r}"
        )
    return MeetingPointPass(
        meeting_point_id=point.id,
        closest_sample=trace.samples[idx],
        distance_m=best,
    )


def _passes_for_variant(
    trace: Trace,
    variant: Tuple[str, ...],
    network: CarpoolNetwork,
    radius_m: float,
    window: TimeWindow,
    distance_cache: Dict[str, np.ndarray],
    lons: np.ndarray,
    lats: np.ndarray,
) -> Optional[List[MeetingPointPass]]:
    passes: List[MeetingPointPass] = []
    previous: Optional[datetime] = None
    for node_id in variant:
        distances = distance_cache.get(node_id)
        if distances is None:
            distances = planar_distance_many(lons, lats, network.node(node_id).location)
            distance_cache[node_id] = distances
        idx = int(np.argmin(distances))
        best = float(distances[idx])
        if best > radius_m:
            return None
        sample = trace.samples[idx]
        if not window.contains(sample.timestamp):
            return None
        if previous is not None and sample.timestamp <= previous:
            return None
        previous = sample.timestamp
        passes.append(
            MeetingPointPass(meeting_point_id=node_id, closest_sample=sample, distance_m=best)
        )
    return passes


def simplify_trace(
    trace: Trace,
    line: CarpoolLine,
    network: CarpoolNetwork,
    radius_m: float = DEFAULT_BUFFER_RADIUS_M,
    window: Optional[TimeWindow] = None,
) -> Optional[SimplifiedTrace]:
    """Reduce ``trace`` to its skeleton on ``line``, or None when it does not match.

    A trace matches when, for some variant of the line, it enters the buffer
    of every variant node, the estimated arrival times strictly increase
    along the variant, and all arrivals lie in ``window``. When several
    variants match, the one with the most nodes wins (richer pass
    information); ties go to the earliest final arrival, then to the
    lexicographically smallest node sequence.
    """
    if radius_m <= 0.0:
        raise ValueError(f"buffer radius must be positive, got {radius_m}")
    if window is None:
        window = TimeWindow(
            trace.samples[0].timestamp, trace.samples[-1].timestamp + timedelta(seconds=1)
        )
    lons, lats = _sample_coordinates(trace)
    distance_cache: Dict[str, np.ndarray] = {}

    candidates: List[Tuple[Tuple[str, ...], List[MeetingPointPass]]] = []
    for variant in sorted(line_variants(network, line)):
        passes = _passes_for_variant(
            trace, variant, network, radius_m, window, distance_cache, lons, lats
        )
        if passes is not None:
            candidates.append((variant, passes))
    if not candidates:
        return None

    def preference(candidate: Tuple[Tuple[str, ...], List[MeetingPointPass]]):
        variant, passes = candidate
        return (-len(variant), passes[-1].arrival_time, variant)

    _, best_passes = min(candidates, key=preference)
    return SimplifiedTrace(
        trace_id=trace.id,
        origin=trace.samples[0],
        passes=tuple(best_passes),
        destination=trace.samples[-1],
        source_length=len(trace),
    )


def compression_rate(simplified: SimplifiedTrace) -> float:
    """Fraction of source points removed: 1 - (2 + passes) / source length."""
    return 1.0 - simplified.point_count / simplified.source_length


class TraceSimplifier(BaseEstimator, TransformerMixin):
    """Scikit-learn style transformer wrapping :func:`simplify_trace`.

    ``transform`` maps a sequence of :class:`Trace` to a same-length list of
    ``SimplifiedTrace | None``, preserving alignment with the input.

    Parameters
    ----------
    network : CarpoolNetwork
    line : CarpoolLine
    buffer_radius_m : float, default 1000
    window : TimeWindow or None
        Operating window; None accepts any arrival time.
    """

    def __init__(
        self,
        network: Optional[CarpoolNetwork] = None,
        line: Optional[CarpoolLine] = None,
        buffer_radius_m: float = DEFAULT_BUFFER_RADIUS_M,
        window: Optional[TimeWindow] = None,
    ):
        self.network = network
        self.line = line
        self.buffer_radius_m = buffer_radius_m
        self.window = window

    def _check_params(self) -> None:
        if self.network is None or self.line is None:
            raise ValueError("TraceSimplifier requires both a network and a line")
        if self.buffer_radius_m <= 0.0:
            raise ValueError(f"buffer radius must be positive, got {self.buffer_radius_m}")
        line_variants(self.network, self.line)  # validates line nodes against the network

    def fit(self, X: Optional[Sequence[Trace]] = None, y=None) -> "TraceSimplifier":
        self._check_params()
        return self

    def transform(self, X: Sequence[Trace]) -> List[Optional[SimplifiedTrace]]:
        self._check_params()
        return [
            simplify_trace(trace, self.line, self.network, self.buffer_radius_m, self.window)
            for trace in X
        ]

    def matched(self, X: Sequence[Trace]) -> List[SimplifiedTrace]:
        """Like ``transform`` but drops the non-matching traces."""
        return [s for s in self.transform(X) if s is not None]
