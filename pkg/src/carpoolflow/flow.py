"""Driver-flow profiles over a time grid and waiting-time prediction.

A flow profile counts matched traces by arrival time at the line's first
meeting point (where the passenger waits). Under a Poisson arrival
assumption with all geolocated drivers willing to respond, the predicted
wait in a bin is the bin length divided by the flow; a zero-flow bin has no
prediction and is reported as the Unavailable sentinel (``None``), never as
infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import GridMismatchError, LineMismatchError, ZeroRateError
from .network import CarpoolLine
from .simplify import SimplifiedTrace

UNAVAILABLE = None
DEFAULT_BIN_MINUTES = 15.0

_DAY_SECONDS = 86400.0


@dataclass(frozen=True)
class TimeGrid:
    """A window split into equal half-open bins [start, start + bin_length).

    The window length must be an exact multiple of the bin length. The
    grid's date anchors a canonical day: flow aggregation folds arrival
    instants onto the grid by time of day, so months of traces produce one
    daily profile.
    """

    start: datetime
    end: datetime
    bin_minutes: float = DEFAULT_BIN_MINUTES

    def __post_init__(self) -> None:
        if self.start.tzinfo is None or self.end.tzinfo is None:
            raise ValueError("grid bounds must be timezone-aware")
        if self.end <= self.start:
            raise ValueError("grid end must be after start")
        if self.bin_minutes <= 0:
            raise ValueError(f"bin length must be positive, got {self.bin_minutes}")
        span = (self.end - self.start).total_seconds()
        bins = span / (self.bin_minutes * 60.0)
        if abs(bins - round(bins)) > 1e-9 or round(bins) < 1:
            raise ValueError(
                f"window of {span / 60.0:g} min is not a whole number of {self.bin_minutes:g} min bins"
            )

    @property
    def n_bins(self) -> int:
        return int(round((self.end - self.start).total_seconds() / (self.bin_minutes * 60.0)))

    @property
    def window_minutes(self) -> float:
        return (self.end - self.start).total_seconds() / 60.0

    def bin_bounds(self, index: int) -> Tuple[datetime, datetime]:
        if not 0 <= index < self.n_bins:
            raise IndexError(f"bin index {index} out of range 0..{self.n_bins - 1}")
        left = self.start + timedelta(minutes=index * self.bin_minutes)
        return left, left + timedelta(minutes=self.bin_minutes)

    def bins(self) -> List[Tuple[datetime, datetime]]:
        return [self.bin_bounds(j) for j in range(self.n_bins)]

    def index_at(self, t: datetime, daily: bool = False) -> Optional[int]:
        """Bin index of instant ``t``, or None when outside the window.

        With ``daily=True`` the offset is folded modulo 24 hours, mapping any
        day's instants onto the grid; the window must then fit in one day.
        """
        offset = (t - self.start).total_seconds()
        if daily:
            if (self.end - self.start).total_seconds() > _DAY_SECONDS:
                raise ValueError("daily folding needs a grid no longer than 24 hours")
            offset %= _DAY_SECONDS
        if not 0.0 <= offset < (self.end - self.start).total_seconds():
            return None
        return int(offset // (self.bin_minutes * 60.0))


@dataclass(frozen=True)
class FlowProfile:
    """Per-bin driver counts for one line, averaged over ``day_count`` days."""

    grid: TimeGrid
    counts: Tuple[float, ...]
    line_id: str
    day_count: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "counts", tuple(float(c) for c in self.counts))
        if len(self.counts) != self.grid.n_bins:
            raise ValueError(f"expected {self.grid.n_bins} counts, got {len(self.counts)}")
        if any(not math.isfinite(c) or c < 0 for c in self.counts):
            raise ValueError("flow counts must be finite and non-negative")
        if self.day_count < 1:
            raise ValueError(f"day_count must be a positive integer, got {self.day_count}")

    @property
    def total(self) -> float:
        """Raw trace count across the window (averaging undone)."""
        return sum(self.counts) * self.day_count


@dataclass(frozen=True)
class WaitProfile:
    """Predicted waits in minutes per bin; ``None`` marks an unavailable bin."""

    grid: TimeGrid
    waits: Tuple[Optional[float], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "waits", tuple(self.waits))
        if len(self.waits) != self.grid.n_bins:
            raise ValueError(f"expected {self.grid.n_bins} waits, got {len(self.waits)}")
        for w in self.waits:
            if w is not None and (not math.isfinite(w) or w <= 0):
                raise ValueError(f"defined waits must be positive and finite, got {w}")

    def defined(self) -> List[float]:
        return [w for w in self.waits if w is not None]


@dataclass(frozen=True)
class ObservedWaits:
    """Recorded carpool requests: (request instant, observed wait in minutes)."""

    records: Tuple[Tuple[datetime, float], ...]
    line_id: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        for t, wait in self.records:
            if t.tzinfo is None:
                raise ValueError("request instants must be timezone-aware")
            if not math.isfinite(wait) or wait < 0:
                raise ValueError(f"observed waits must be finite and non-negative, got {wait}")


@dataclass(frozen=True)
class WeeklyComparison:
    """Predicted waits for door-to-door vs meeting-point matches over one week."""

    door_wait_min: Optional[float]
    meeting_wait_min: Optional[float]
    wait_change: Optional[float]
    """Relative change (meeting - door) / door; negative means a shorter wait."""


def _matches_line(simplified: SimplifiedTrace, line: CarpoolLine) -> bool:
    ids = simplified.node_ids
    if not ids or ids[0] != line.first or ids[-1] != line.last:
        return False
    k = 0
    for node_id in ids:
        if k < len(line.node_ids) and node_id == line.node_ids[k]:
            k += 1
    return k == len(line.node_ids)


def driver_flow(
    simplified: Sequence[SimplifiedTrace],
    line: CarpoolLine,
    grid: TimeGrid,
    day_count: int = 1,
) -> FlowProfile:
    """Count traces per bin by arrival at the line's first meeting point.

    Arrivals fold onto the grid by time of day, and each bin's count is
    divided by ``day_count``, so a multi-day batch yields the daily average
    profile. Traces whose first arrival falls outside the window are not
    counted; a trace whose passes do not realize ``line`` raises
    :class:`LineMismatchError`.
    """
    raw = [0] * grid.n_bins
    for s in simplified:
        if not _matches_line(s, line):
            raise LineMismatchError(
                f"trace {s.trace_id!r} passes {list(s.node_ids)} do not realize line {line.label()}"
            )
        index = grid.index_at(s.passes[0].arrival_time, daily=True)
        if index is not None:
            raw[index] += 1
    counts = tuple(c / day_count for c in raw)
    return FlowProfile(grid=grid, counts=counts, line_id=line.label(), day_count=day_count)


def wait_times(flow: FlowProfile) -> WaitProfile:
    """Predicted wait per bin: bin length divided by flow; None where flow is zero."""
    waits = tuple(
        (flow.grid.bin_minutes / c) if c > 0 else UNAVAILABLE for c in flow.counts
    )
    return WaitProfile(grid=flow.grid, waits=waits)


def weekly_comparison(
    door: FlowProfile, meeting: FlowProfile, operating_days: int
) -> WeeklyComparison:
    """Compare weekly door-to-door and meeting-point waits on a shared grid.

    Each profile's weekly trace total is divided by ``operating_days`` to a
    daily flow before the inverse-flow wait over the whole window is taken.
    """
    if (door.grid.start, door.grid.end, door.grid.bin_minutes) != (
        meeting.grid.start,
        meeting.grid.end,
        meeting.grid.bin_minutes,
    ):
        raise GridMismatchError("door and meeting profiles must share a grid")
    if operating_days < 1:
        raise ValueError(f"operating_days must be a positive integer, got {operating_days}")

    def weekly_wait(profile: FlowProfile) -> Optional[float]:
        daily = profile.total / operating_days
        if daily <= 0:
            return UNAVAILABLE
        return profile.grid.window_minutes / daily

    door_wait = weekly_wait(door)
    meeting_wait = weekly_wait(meeting)
    change = None
    if door_wait is not None and meeting_wait is not None:
        change = (meeting_wait - door_wait) / door_wait
    return WeeklyComparison(
        door_wait_min=door_wait, meeting_wait_min=meeting_wait, wait_change=change
    )


def rmse(observed: ObservedWaits, predicted: WaitProfile) -> Dict[int, float]:
    """Per-bin root-mean-square error of the predictions against observations.

    Observations are assigned to bins by request time of day. Bins without
    at least one observation and a defined prediction are omitted.
    """
    grouped: Dict[int, List[float]] = {}
    for t, wait in observed.records:
        index = predicted.grid.index_at(t, daily=True)
        if index is None or predicted.waits[index] is None:
            continue
        grouped.setdefault(index, []).append(wait)
    out: Dict[int, float] = {}
    for index in sorted(grouped):
        prediction = predicted.waits[index]
        errors = [(w - prediction) ** 2 for w in grouped[index]]
        out[index] = math.sqrt(sum(errors) / len(errors))
    return out


def wait_vs_participation(
    flow: FlowProfile,
    current_rate: float,
    target_rates: Sequence[float],
) -> List[Tuple[float, float]]:
    """Mean predicted wait after rescaling the flow to each participation rate.

    Scaling every count by ``rate / current_rate`` scales every defined wait
    by ``current_rate / rate`` exactly, so the curve is an exact inverse
    proportionality anchored at the current operating point.
    """
    if current_rate <= 0:
        raise ZeroRateError(f"current participation rate must be positive, got {current_rate}")
    if all(c == 0 for c in flow.counts):
        raise ZeroRateError("driver flow is zero everywhere; waits are unbounded")
    out: List[Tuple[float, float]] = []
    for rate in target_rates:
        if rate <= 0:
            raise ZeroRateError(f"target participation rate must be positive, got {rate}")
        scaled = FlowProfile(
            grid=flow.grid,
            counts=tuple(c * rate / current_rate for c in flow.counts),
            line_id=flow.line_id,
            day_count=flow.day_count,
        )
        waits = wait_times(scaled).defined()
        out.append((rate, sum(waits) / len(waits)))
    return out
