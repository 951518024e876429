"""Poisson arrival simulation and synthetic trace generation.

The simulator is the independent check of the inverse-flow waiting-time
model: driver arrivals form a Poisson process whose intensity is constant
within each bin of a flow profile, and a passenger's wait is the time to
the first arrival after their request. The trace generator builds GPS
journeys whose simplified forms reproduce prescribed per-bin flows exactly,
standing in for proprietary fleet data at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import InfeasibleScenarioError
from .flow import FlowProfile, TimeGrid
from .geo import GeoPoint, GpsSample, Trace, planar_distance, project_local, unproject_local
from .network import CarpoolLine, CarpoolNetwork


@dataclass(frozen=True)
class ArrivalModel:
    """Piecewise-constant driver arrival intensity over a time grid.

    ``response_probability`` thins the process: the share of geolocated
    drivers actually willing to respond to a request. The default of 1
    treats every passing driver as available.
    """

    grid: TimeGrid
    rates_per_min: Tuple[float, ...]
    seed: int = 0
    response_probability: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "rates_per_min", tuple(float(r) for r in self.rates_per_min))
        if len(self.rates_per_min) != self.grid.n_bins:
            raise ValueError(
                f"expected {self.grid.n_bins} rates, got {len(self.rates_per_min)}"
            )
        if any(not math.isfinite(r) or r < 0 for r in self.rates_per_min):
            raise ValueError("arrival rates must be finite and non-negative")
        if not 0.0 <= self.response_probability <= 1.0:
            raise ValueError(
                f"response probability must lie in [0, 1], got {self.response_probability}"
            )

    @classmethod
    def from_flow(
        cls, flow: FlowProfile, seed: int = 0, response_probability: float = 1.0
    ) -> "ArrivalModel":
        rates = tuple(c / flow.grid.bin_minutes for c in flow.counts)
        return cls(
            grid=flow.grid,
            rates_per_min=rates,
            seed=seed,
            response_probability=response_probability,
        )


@dataclass(frozen=True)
class SimulatedWait:
    request_time: datetime
    wait_min: float
    censored: bool


def _generator(seed: int) -> np.random.Generator:
    # same counter-based generator family as the match-probability module
    return np.random.Generator(np.random.Philox(key=seed))


def simulate_waits(
    model: ArrivalModel,
    requests: Sequence[datetime],
    horizon: Optional[timedelta] = None,
) -> List[SimulatedWait]:
    """Wait until the first driver arrival for each request instant.

    For a request at t the arrival stream starts at t with the bin rates as
    a piecewise-constant intensity (zero after the window). The wait is
    censored at ``horizon`` past the request, or at the window end when no
    horizon is given -- a passenger gives up at closing time.
    """
    grid = model.grid
    for t in requests:
        if not grid.start <= t < grid.end:
            raise ValueError(f"request at {t.isoformat()} is outside the modeled window")
    rng = _generator(model.seed)
    targets = rng.exponential(size=len(requests))

    bin_seconds = grid.bin_minutes * 60.0
    window_seconds = (grid.end - grid.start).total_seconds()
    out: List[SimulatedWait] = []
    for t, target in zip(requests, targets):
        offset = (t - grid.start).total_seconds()
        censor = window_seconds if horizon is None else offset + horizon.total_seconds()
        position = offset
        remaining = float(target)
        wait_seconds: Optional[float] = None
        j = int(offset // bin_seconds)
        while j < grid.n_bins and position < censor:
            segment_end = min((j + 1) * bin_seconds, censor)
            rate_per_sec = model.rates_per_min[j] * model.response_probability / 60.0
            hazard = rate_per_sec * (segment_end - position)
            if rate_per_sec > 0 and remaining <= hazard:
                wait_seconds = position + remaining / rate_per_sec - offset
                break
            remaining -= hazard
            position = segment_end
            j += 1
        if wait_seconds is None:
            out.append(SimulatedWait(t, (censor - offset) / 60.0, censored=True))
        else:
            out.append(SimulatedWait(t, wait_seconds / 60.0, censored=False))
    return out


@dataclass(frozen=True)
class SyntheticScenario:
    """Recipe for synthetic GPS traces realizing prescribed per-bin flows.

    ``target_flows`` are daily averages over ``day_count`` days, so each
    bin's total trace count target_flows[j] * day_count must be a whole
    number. Origins and destinations are scattered outside all buffers;
    every sample gets isotropic GPS noise clipped at three sigma.
    """

    network: CarpoolNetwork
    line: CarpoolLine
    grid: TimeGrid
    target_flows: Tuple[float, ...]
    buffer_radius_m: float = 1000.0
    gps_noise_sigma_m: float = 12.0
    sampling_period_s: int = 5
    origin_scatter_m: float = 400.0
    destination_scatter_m: float = 400.0
    approach_minutes: float = 10.0
    speed_mps: float = 20.0
    day_count: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "target_flows", tuple(float(f) for f in self.target_flows))
        if len(self.target_flows) != self.grid.n_bins:
            raise ValueError(
                f"expected {self.grid.n_bins} target flows, got {len(self.target_flows)}"
            )
        if any(not math.isfinite(f) or f < 0 for f in self.target_flows):
            raise ValueError("target flows must be finite and non-negative")
        if self.gps_noise_sigma_m < 0:
            raise ValueError("GPS noise sigma must be non-negative")
        if self.sampling_period_s < 1:
            raise ValueError("sampling period must be at least one second")
        if self.speed_mps <= 0:
            raise ValueError("speed must be positive")
        if self.buffer_radius_m <= 0:
            raise ValueError("buffer radius must be positive")
        if self.day_count < 1:
            raise ValueError("day count must be a positive integer")
        if self.origin_scatter_m < 0 or self.destination_scatter_m < 0:
            raise ValueError("scatter radii must be non-negative")


def _per_day_bin_counts(scenario: SyntheticScenario) -> List[List[int]]:
    """counts[day][bin]; earlier days take the remainder when flows don't divide evenly."""
    days = scenario.day_count
    table = [[0] * scenario.grid.n_bins for _ in range(days)]
    for j, flow in enumerate(scenario.target_flows):
        total = flow * days
        rounded = round(total)
        if abs(total - rounded) > 1e-9:
            raise InfeasibleScenarioError(
                f"bin {j}: flow {flow} over {days} day(s) is not a whole trace count"
            )
        base, extra = divmod(int(rounded), days)
        for d in range(days):
            table[d][j] = base + (1 if d < extra else 0)
    return table


def _scatter_point(
    rng: np.random.Generator, base_xy: Tuple[float, float], radius: float
) -> Tuple[float, float]:
    angle = rng.uniform(0.0, 2.0 * math.pi)
    r = radius * math.sqrt(rng.uniform(0.0, 1.0))
    return base_xy[0] + r * math.cos(angle), base_xy[1] + r * math.sin(angle)


def generate_traces(scenario: SyntheticScenario) -> List[Trace]:
    """Generate GPS traces whose simplified flows equal the scenario targets.

    Arrival instants at the line's first node are placed deterministically
    inside each bin, away from the bin edges by a safety margin large enough
    that GPS noise cannot move the estimated arrival across a bin boundary.
    Raises :class:`InfeasibleScenarioError` when the noise level, the bin
    length, or the window cannot guarantee exact reproduction.
    """
    sigma = scenario.gps_noise_sigma_m
    radius = scenario.buffer_radius_m
    if sigma > radius / 4.0:
        raise InfeasibleScenarioError(
            f"noise sigma {sigma:g} m exceeds a quarter of the {radius:g} m buffer radius; "
            "samples could leave the buffer"
        )

    grid = scenario.grid
    line = scenario.line
    reference = scenario.network.node(line.first).location
    node_xy = [
        project_local(scenario.network.node(node_id).location, reference)
        for node_id in line.node_ids
    ]

    # the noisy closest sample can shift the arrival estimate by at most
    # 6 sigma of track length; keep that far from every bin edge
    margin_s = int(math.ceil(6.0 * sigma / scenario.speed_mps)) + 1
    bin_s = grid.bin_minutes * 60.0
    if 2 * margin_s >= bin_s:
        raise InfeasibleScenarioError(
            f"safety margin {margin_s}s does not fit in {bin_s:g}s bins; "
            "lower the noise or enlarge the bins"
        )

    hop_s: List[int] = []
    for a, b in zip(node_xy, node_xy[1:]):
        dist = math.hypot(b[0] - a[0], b[1] - a[1])
        hop = max(1, int(round(dist / scenario.speed_mps)))
        if hop <= 2 * margin_s:
            raise InfeasibleScenarioError(
                f"meeting points {dist:.0f} m apart are too close to keep noisy "
                "arrival estimates strictly ordered"
            )
        hop_s.append(hop)
    downstream_s = sum(hop_s)

    approach_s = int(round(scenario.approach_minutes * 60.0))
    approach_dist = approach_s * scenario.speed_mps
    min_clearance = radius + 3.0 * sigma
    if approach_dist < min_clearance + scenario.origin_scatter_m or approach_dist < (
        min_clearance + scenario.destination_scatter_m
    ):
        raise InfeasibleScenarioError(
            "approach legs too short to keep origins and destinations outside the buffers"
        )

    def away_base(anchor: Tuple[float, float], toward: Tuple[float, float]) -> Tuple[float, float]:
        ux, uy = anchor[0] - toward[0], anchor[1] - toward[1]
        norm = math.hypot(ux, uy)
        ux, uy = ux / norm, uy / norm
        return anchor[0] + ux * approach_dist, anchor[1] + uy * approach_dist

    origin_base = away_base(node_xy[0], node_xy[1])
    dest_base = away_base(node_xy[-1], node_xy[-2])

    rng = _generator(scenario.seed)
    per_day = _per_day_bin_counts(scenario)
    period = scenario.sampling_period_s
    traces: List[Trace] = []

    window_s = (grid.end - grid.start).total_seconds()
    for day in range(scenario.day_count):
        day_start = grid.start + timedelta(days=day)
        for j in range(grid.n_bins):
            k = per_day[day][j]
            if k == 0:
                continue
            # arrivals stay inside the bin by the safety margin, and early
            # enough that the rest of the line is reached before the window
            # (minus the margin) closes
            offset_max = min(
                bin_s - margin_s, window_s - j * bin_s - downstream_s - margin_s
            )
            if offset_max <= margin_s:
                raise InfeasibleScenarioError(
                    f"bin {j}: travel to {line.last!r} cannot finish inside the operating window"
                )
            usable = offset_max - margin_s
            for slot in range(k):
                offset = margin_s + (slot + 0.5) / k * usable
                t_first = day_start + timedelta(seconds=j * bin_s + round(offset))

                origin_xy = _scatter_point(rng, origin_base, scenario.origin_scatter_m)
                dest_xy = _scatter_point(rng, dest_base, scenario.destination_scatter_m)

                waypoints = [origin_xy, *node_xy, dest_xy]
                node_times = [t_first]
                for hop in hop_s:
                    node_times.append(node_times[-1] + timedelta(seconds=hop))
                leg_times = [t_first - timedelta(seconds=approach_s), *node_times,
                             node_times[-1] + timedelta(seconds=approach_s)]

                times: List[datetime] = []
                coords: List[Tuple[float, float]] = []
                for leg in range(len(waypoints) - 1):
                    t0, t1 = leg_times[leg], leg_times[leg + 1]
                    (x0, y0), (x1, y1) = waypoints[leg], waypoints[leg + 1]
                    span = (t1 - t0).total_seconds()
                    steps = list(range(0, int(span), period))
                    for s in steps:
                        frac = s / span
                        times.append(t0 + timedelta(seconds=s))
                        coords.append((x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)))
                times.append(leg_times[-1])
                coords.append(waypoints[-1])

                noise = rng.normal(0.0, sigma, size=(len(coords), 2)) if sigma > 0 else np.zeros(
                    (len(coords), 2)
                )
                np.clip(noise, -3.0 * sigma, 3.0 * sigma, out=noise)

                samples = tuple(
                    GpsSample(
                        position=unproject_local(x + float(nx), y + float(ny), reference),
                        timestamp=t,
                    )
                    for (x, y), (nx, ny), t in zip(coords, noise, times)
                )
                trace = Trace(
                    id=f"{line.label()}-d{day:02d}-b{j:02d}-s{slot:02d}",
                    samples=samples,
                )
                _check_endpoints_clear(trace, scenario)
                traces.append(trace)
    return traces


def _check_endpoints_clear(trace: Trace, scenario: SyntheticScenario) -> None:
    for sample in (trace.samples[0], trace.samples[-1]):
        for point in scenario.network.points:
            if planar_distance(sample.position, point.location) <= scenario.buffer_radius_m:
                raise InfeasibleScenarioError(
                    f"trace {trace.id!r} endpoint landed inside the buffer of {point.id!r}"
                )
