"""Driver participation rate: geolocated drivers over the ambient driver population.

The ambient population on a line is not observable directly; it is proxied
by routing every origin-destination pair of a mobility survey through a
route finder and summing the flows whose likely routes pass every meeting
point of the line, in order, within the buffer radius. The route finder is
pluggable: a deterministic straight-line stub for offline use and tests,
and a generic HTTP client with an on-disk response cache.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np
import requests

from .errors import RoutingError, ZeroPopulationError
from .geo import GeoPoint, haversine_distance, planar_distance, planar_distance_many
from .network import CarpoolLine, CarpoolNetwork, line_variants

ENDPOINT_TOLERANCE_M = 100.0
POLYLINE_STEP_M = 50.0
DEFAULT_MAX_IN_FLIGHT = 4

ROUTER_URL_ENV = "ROUTER_URL"
ROUTER_API_KEY_ENV = "ROUTER_API_KEY"


@dataclass(frozen=True)
class OdEntry:
    """One origin-destination pair of the survey matrix."""

    origin_id: str
    dest_id: str
    count: float
    origin: GeoPoint
    destination: GeoPoint

    def __post_init__(self) -> None:
        if not math.isfinite(self.count) or self.count < 0:
            raise ValueError(f"OD count must be finite and non-negative, got {self.count}")


@dataclass(frozen=True)
class OdMatrix:
    entries: Tuple[OdEntry, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        pairs = [(e.origin_id, e.dest_id) for e in self.entries]
        if len(set(pairs)) != len(pairs):
            raise ValueError("origin-destination pairs must be unique")

    def count_for(self, origin_id: str, dest_id: str) -> float:
        for entry in self.entries:
            if (entry.origin_id, entry.dest_id) == (origin_id, dest_id):
                return entry.count
        raise KeyError(f"no OD entry for ({origin_id!r}, {dest_id!r})")


@dataclass(frozen=True)
class RoutePlan:
    """An inferred route between two centroids."""

    origin_id: str
    dest_id: str
    polyline: Tuple[GeoPoint, ...]
    source: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "polyline", tuple(self.polyline))
        if len(self.polyline) < 2:
            raise ValueError("a route polyline needs at least two points")


@dataclass(frozen=True)
class RoutingFailure:
    origin_id: str
    dest_id: str
    reason: str


@dataclass(frozen=True)
class RouteInferenceResult:
    plans: Tuple[RoutePlan, ...]
    failures: Tuple[RoutingFailure, ...]


class RouterClient(Protocol):
    """Route finder contract: two points and a departure in, one plan out."""

    def route(self, origin: GeoPoint, destination: GeoPoint, departure: datetime) -> RoutePlan:
        ...


def _slerp(a: GeoPoint, b: GeoPoint, fractions: np.ndarray) -> List[GeoPoint]:
    """Points along the great circle from a to b at the given fractions."""

    def to_vec(p: GeoPoint) -> np.ndarray:
        lon, lat = math.radians(p.lon), math.radians(p.lat)
        return np.array(
            [math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)]
        )

    va, vb = to_vec(a), to_vec(b)
    omega = math.acos(max(-1.0, min(1.0, float(np.dot(va, vb)))))
    if omega < 1e-12:
        return [a for _ in fractions]
    out = []
    for f in fractions:
        v = (math.sin((1 - f) * omega) * va + math.sin(f * omega) * vb) / math.sin(omega)
        lat = math.degrees(math.asin(max(-1.0, min(1.0, v[2]))))
        lon = math.degrees(math.atan2(v[1], v[0]))
        out.append(GeoPoint(lon=lon, lat=lat))
    return out


class StraightLineRouter:
    """Deterministic stub: the great-circle segment densified to a fixed spacing."""

    def __init__(self, spacing_m: float = 100.0):
        if spacing_m <= 0:
            raise ValueError("spacing must be positive")
        self.spacing_m = spacing_m

    def route(self, origin: GeoPoint, destination: GeoPoint, departure: datetime) -> RoutePlan:
        length = haversine_distance(origin, destination)
        segments = max(1, int(math.ceil(length / self.spacing_m)))
        fractions = np.linspace(0.0, 1.0, segments + 1)
        # pin the requested endpoints verbatim; interpolation only in between
        polyline = [origin, *_slerp(origin, destination, fractions[1:-1]), destination]
        return RoutePlan(
            origin_id="",
            dest_id="",
            polyline=tuple(polyline),
            source="straight-line",
        )


def _coordinates_from_payload(payload) -> List[Tuple[float, float]]:
    """Pull a lon/lat coordinate list out of the common routing payload shapes."""
    if isinstance(payload, list):
        return [(float(lon), float(lat)) for lon, lat in payload]
    if isinstance(payload, dict):
        if payload.get("type") == "LineString":
            return _coordinates_from_payload(payload["coordinates"])
        if payload.get("type") == "Feature":
            return _coordinates_from_payload(payload["geometry"])
        if payload.get("type") == "FeatureCollection":
            features = payload.get("features") or []
            if not features:
                raise RoutingError("route response has no features")
            return _coordinates_from_payload(features[0])
        if "coordinates" in payload:
            return _coordinates_from_payload(payload["coordinates"])
        if "routes" in payload:
            routes = payload["routes"]
            if not routes:
                raise RoutingError("route response has no routes")
            return _coordinates_from_payload(routes[0].get("geometry", routes[0]))
    raise RoutingError("unrecognized route response shape")


class CachingHttpRouter:
    """Generic HTTP route-finder client with an on-disk response cache.

    The endpoint is a URL template with ``{origin_lon} {origin_lat}
    {dest_lon} {dest_lat} {departure} {api_key}`` placeholders, taken from
    the ``ROUTER_URL`` environment variable unless given explicitly; the key
    comes from ``ROUTER_API_KEY``. Responses are cached as JSON keyed by
    (origin, destination, departure), so re-runs are offline and free.
    """

    def __init__(
        self,
        url_template: Optional[str] = None,
        cache_dir: Optional[Path] = None,
        timeout_s: float = 10.0,
    ):
        self.url_template = url_template or os.environ.get(ROUTER_URL_ENV, "")
        if not self.url_template:
            raise RoutingError(f"no routing endpoint configured; set {ROUTER_URL_ENV}")
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self.timeout_s = timeout_s

    def _cache_path(self, key: str) -> Optional[Path]:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{key}.json"

    def _fetch(self, url: str):
        response = requests.get(url, timeout=self.timeout_s)
        if response.status_code != 200:
            raise RoutingError(f"router returned HTTP {response.status_code}")
        return response.json()

    def route(self, origin: GeoPoint, destination: GeoPoint, departure: datetime) -> RoutePlan:
        request = {
            "origin": [origin.lon, origin.lat],
            "destination": [destination.lon, destination.lat],
            "departure": departure.isoformat(),
        }
        key = hashlib.sha256(json.dumps(request, sort_keys=True).encode()).hexdigest()
        cache_path = self._cache_path(key)
        payload = None
        if cache_path is not None and cache_path.exists():
            payload = json.loads(cache_path.read_text())
        if payload is None:
            url = self.url_template.format(
                origin_lon=origin.lon,
                origin_lat=origin.lat,
                dest_lon=destination.lon,
                dest_lat=destination.lat,
                departure=departure.isoformat(),
                api_key=os.environ.get(ROUTER_API_KEY_ENV, ""),
            )
            try:
                payload = self._fetch(url)
            except requests.RequestException as exc:
                raise RoutingError(f"routing request failed: {exc}") from exc
            if cache_path is not None:
                self.cache_dir.mkdir(parents=True, exist_ok=True)
                fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
                with os.fdopen(fd, "w") as handle:
                    json.dump(payload, handle)
                os.replace(tmp, cache_path)
        try:
            coordinates = _coordinates_from_payload(payload)
        except (KeyError, TypeError, ValueError) as exc:
            raise RoutingError(f"malformed route response: {exc}") from exc
        return RoutePlan(
            origin_id="",
            dest_id="",
            polyline=tuple(GeoPoint(lon=lon, lat=lat) for lon, lat in coordinates),
            source="http",
        )


def infer_routes(
    od: OdMatrix,
    router: RouterClient,
    departure: datetime,
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
) -> RouteInferenceResult:
    """One route per OD entry with positive count; failures never abort the batch.

    A plan whose endpoints land more than 100 m from the requested centroids
    is rejected as a failure. Requests run concurrently with a bounded
    in-flight limit; results keep the matrix entry order.
    """
    entries = [e for e in od.entries if e.count > 0]

    def work(entry: OdEntry):
        try:
            plan = router.route(entry.origin, entry.destination, departure)
        except RoutingError as exc:
            return RoutingFailure(entry.origin_id, entry.dest_id, str(exc))
        start_gap = planar_distance(plan.polyline[0], entry.origin)
        end_gap = planar_distance(plan.polyline[-1], entry.destination)
        if start_gap > ENDPOINT_TOLERANCE_M or end_gap > ENDPOINT_TOLERANCE_M:
            return RoutingFailure(
                entry.origin_id,
                entry.dest_id,
                f"route endpoints stray {max(start_gap, end_gap):.0f} m from the centroids",
            )
        return RoutePlan(
            origin_id=entry.origin_id,
            dest_id=entry.dest_id,
            polyline=plan.polyline,
            source=plan.source,
        )

    if not entries:
        return RouteInferenceResult(plans=(), failures=())
    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        results = list(pool.map(work, entries))
    plans = tuple(r for r in results if isinstance(r, RoutePlan))
    failures = tuple(r for r in results if isinstance(r, RoutingFailure))
    return RouteInferenceResult(plans=plans, failures=failures)


def _densify(polyline: Sequence[GeoPoint], step_m: float) -> Tuple[np.ndarray, np.ndarray]:
    """Resample a polyline so consecutive points are at most ``step_m`` apart."""
    lons: List[float] = []
    lats: List[float] = []
    for a, b in zip(polyline, polyline[1:]):
        length = planar_distance(a, b)
        segments = max(1, int(math.ceil(length / step_m)))
        for s in range(segments):
            frac = s / segments
            lons.append(a.lon + frac * (b.lon - a.lon))
            lats.append(a.lat + frac * (b.lat - a.lat))
    lons.append(polyline[-1].lon)
    lats.append(polyline[-1].lat)
    return np.array(lons), np.array(lats)


def _visits_in_order(
    lons: np.ndarray,
    lats: np.ndarray,
    variant: Sequence[str],
    network: CarpoolNetwork,
    radius_m: float,
) -> bool:
    position = 0
    for node_id in variant:
        distances = planar_distance_many(
            lons[position:], lats[position:], network.node(node_id).location
        )
        hits = np.flatnonzero(distances <= radius_m)
        if hits.size == 0:
            return False
        position += int(hits[0])
    return True


def coincident_flow(
    routes: Sequence[RoutePlan],
    od: OdMatrix,
    line: CarpoolLine,
    network: CarpoolNetwork,
    radius_m: float = 1000.0,
) -> float:
    """Total OD flow whose routes pass every node of some line variant, in order.

    Route polylines are resampled at <= 50 m spacing before the buffer test,
    so a segment cannot skip across a 1 km buffer unnoticed.
    """
    if radius_m <= 0:
        raise ValueError(f"buffer radius must be positive, got {radius_m}")
    variants = sorted(line_variants(network, line))
    total = 0.0
    for plan in routes:
        lons, lats = _densify(plan.polyline, POLYLINE_STEP_M)
        if any(_visits_in_order(lons, lats, v, network, radius_m) for v in variants):
            total += od.count_for(plan.origin_id, plan.dest_id)
    return total


def participation_rate(matched_drivers: float, population: float) -> float:
    """Share of the ambient driver population that carpools: matched / population."""
    if population == 0:
        raise ZeroPopulationError("ambient driver population is zero")
    if population < 0 or matched_drivers < 0:
        raise ValueError("driver counts cannot be negative")
    return matched_drivers / population
