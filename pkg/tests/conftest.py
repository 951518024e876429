"""Shared fixtures: a five-stop commuter carpooling network and trace builders."""

from __future__ import annotations

import math
from datetime import datetime, timedelta, timezone

import pytest

from carpoolflow.geo import EARTH_RADIUS_M, GeoPoint, GpsSample, Trace
from carpoolflow.network import CarpoolLine, MeetingPoint, build_network

UTC = timezone.utc


def spherical_destination(start: GeoPoint, bearing_deg: float, distance_m: float) -> GeoPoint:
    """Great-circle destination point; written from the navigation formulas so
    trips of a known length can be constructed independently of the package's
    projection code."""
    delta = distance_m / EARTH_RADIUS_M
    theta = math.radians(bearing_deg)
    lat1 = math.radians(start.lat)
    lon1 = math.radians(start.lon)
    lat2 = math.asin(
        math.sin(lat1) * math.cos(delta) + math.cos(lat1) * math.sin(delta) * math.cos(theta)
    )
    lon2 = lon1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(lat1),
        math.cos(delta) - math.sin(lat1) * math.sin(lat2),
    )
    lon_deg = (math.degrees(lon2) + 180.0) % 360.0 - 180.0
    return GeoPoint(lon=lon_deg, lat=math.degrees(lat2))


def at(hour: int, minute: int, second: int = 0, day: int = 28) -> datetime:
    return datetime(2019, 11, day, hour, minute, second, tzinfo=UTC)


def sample(point: GeoPoint, when: datetime) -> GpsSample:
    return GpsSample(position=point, timestamp=when)


def make_trace(trace_id: str, points_times) -> Trace:
    return Trace(id=trace_id, samples=tuple(sample(p, t) for p, t in points_times))


# approximate stop locations of a real five-stop peri-urban network
LYON = MeetingPoint("L", "Lyon Mermoz", GeoPoint(4.916, 45.735))
ST_PRIEST = MeetingPoint("S", "St-Priest Parc Techno", GeoPoint(4.945, 45.696))
AIRPORT = MeetingPoint("A", "Aeroport Lyon-St Exupery", GeoPoint(5.081, 45.721))
VILLEFONTAINE = MeetingPoint("V", "Villefontaine The Village", GeoPoint(5.150, 45.615))
BOURGOIN = MeetingPoint("B", "Bourgoin La Grive", GeoPoint(5.228, 45.585))

FIVE_STOP_POINTS = (LYON, ST_PRIEST, AIRPORT, VILLEFONTAINE, BOURGOIN)
FIVE_STOP_EDGES = (
    ("B", "V"),
    ("V", "S"),
    ("B", "S"),
    ("S", "L"),
    ("L", "S"),
    ("S", "A"),
    ("A", "S"),
)


@pytest.fixture()
def five_stop_network():
    return build_network(FIVE_STOP_POINTS, FIVE_STOP_EDGES)


@pytest.fixture()
def bs_line():
    return CarpoolLine(node_ids=("B", "S"))


# a compact three-stop chain (2.5 km hops) for synthetic-trace scenarios,
# where the whole line fits comfortably inside a morning operating window
COMPACT_POINTS = (
    MeetingPoint("B", "East stop", GeoPoint(5.300, 45.600)),
    MeetingPoint("V", "Middle stop", spherical_destination(GeoPoint(5.300, 45.600), 270.0, 2500.0)),
    MeetingPoint("S", "West stop", spherical_destination(GeoPoint(5.300, 45.600), 270.0, 5000.0)),
)
COMPACT_EDGES = (("B", "V"), ("V", "S"), ("B", "S"))


@pytest.fixture()
def compact_network():
    return build_network(COMPACT_POINTS, COMPACT_EDGES)


def straight_leg(start: GeoPoint, end: GeoPoint, t0: datetime, t1: datetime, step_s: int):
    """Equally-timed points from start (inclusive) to end (exclusive)."""
    total = (t1 - t0).total_seconds()
    out = []
    s = 0
    while s < total:
        frac = s / total
        lon = start.lon + frac * (end.lon - start.lon)
        lat = start.lat + frac * (end.lat - start.lat)
        out.append((GeoPoint(lon, lat), t0 + timedelta(seconds=s)))
        s += step_s
    return out


def drive_through(trace_id: str, stops, step_s: int = 10) -> Trace:
    """Build a trace visiting (point, time) stops in order with linear legs."""
    points = []
    for (p0, t0), (p1, t1) in zip(stops, stops[1:]):
        points.extend(straight_leg(p0, p1, t0, t1, step_s))
    points.append(stops[-1])
    return make_trace(trace_id, points)
