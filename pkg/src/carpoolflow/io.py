"""File formats: trace/network/OD CSV ingestion, CSV/GeoJSON export, config.

All timestamps are ingested with their zone offsets and stored as UTC.
Malformed rows are reported with line numbers and skipped; a file yielding
zero valid records is an error. Floats are written with Python's shortest
round-trip representation, so parse(export(x)) == x and identical inputs
produce byte-identical outputs.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .cluster import ClusterLabels
from .errors import ConfigError, EmptyInputError, ParseError
from .flow import FlowProfile, WaitProfile
from .geo import GeoPoint, GpsSample, Trace
from .network import CarpoolLine, CarpoolNetwork, MeetingPoint, build_network
from .participation import OdEntry, OdMatrix
from .simplify import MeetingPointPass, SimplifiedTrace

NA_TOKEN = "NA"

TRACE_HEADER = ["trace_id", "timestamp_utc", "lon", "lat"]
NODE_HEADER = ["id", "name", "lon", "lat"]
EDGE_HEADER = ["from_id", "to_id"]
OD_HEADER = ["origin_id", "dest_id", "count", "origin_lon", "origin_lat", "dest_lon", "dest_lat"]
SIMPLIFIED_HEADER = [
    "trace_id",
    "point_kind",
    "meeting_point_id",
    "timestamp_utc",
    "lon",
    "lat",
    "distance_m",
    "source_length",
]


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 timestamp carrying a zone offset; normalize to UTC."""
    cleaned = text.strip().replace("Z", "+00:00")
    try:
        stamp = datetime.fromisoformat(cleaned)
    except ValueError as exc:
        raise ValueError(f"bad timestamp {text!r}: {exc}") from None
    if stamp.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no zone offset")
    return stamp.astimezone(timezone.utc)


def format_timestamp(stamp: datetime) -> str:
    return stamp.astimezone(timezone.utc).isoformat()


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _open_reader(path: Path, expected_header: List[str]) -> Tuple[List[List[str]], List[str]]:
    """Read all CSV rows after validating the header; returns (rows, issues)."""
    try:
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise ParseError(str(exc), path=str(path)) from None
    if not rows:
        raise ParseError("file is empty", path=str(path))
    if rows[0] != expected_header:
        raise ParseError(
            f"expected header {','.join(expected_header)!r}, got {','.join(rows[0])!r}",
            path=str(path),
            line_no=1,
        )
    return rows[1:], []


def read_traces_csv(path: Path) -> Tuple[List[Trace], List[str]]:
    """Parse the trace CSV; bad rows and invalid traces are reported, not fatal."""
    rows, issues = _open_reader(path, TRACE_HEADER)
    samples_by_trace: Dict[str, List[GpsSample]] = {}
    first_line: Dict[str, int] = {}
    for offset, row in enumerate(rows, start=2):
        try:
            if len(row) != 4:
                raise ValueError(f"expected 4 fields, got {len(row)}")
            trace_id, stamp_text, lon_text, lat_text = row
            if not trace_id:
                raise ValueError("empty trace_id")
            sample = GpsSample(
                position=GeoPoint(lon=float(lon_text), lat=float(lat_text)),
                timestamp=parse_timestamp(stamp_text),
            )
        except ValueError as exc:
            issues.append(f"{path}:{offset}: row rejected: {exc}")
            continue
        samples_by_trace.setdefault(trace_id, []).append(sample)
        first_line.setdefault(trace_id, offset)

    traces: List[Trace] = []
    for trace_id, samples in samples_by_trace.items():
        try:
            traces.append(Trace(id=trace_id, samples=tuple(samples)))
        except ValueError as exc:
            issues.append(f"{path}:{first_line[trace_id]}: trace rejected: {exc}")
    if not traces:
        raise EmptyInputError(f"{path}: no valid traces")
    return traces, issues


def write_traces_csv(traces: Sequence[Trace], path: Path) -> None:
    lines = [",".join(TRACE_HEADER)]
    for trace in sorted(traces, key=lambda t: t.id):
        for sample in trace.samples:
            lines.append(
                f"{trace.id},{format_timestamp(sample.timestamp)},"
                f"{sample.position.lon!r},{sample.position.lat!r}"
            )
    _atomic_write_text(path, "\n".join(lines) + "\n")


def read_network_csv(nodes_path: Path, edges_path: Path) -> Tuple[CarpoolNetwork, List[str]]:
    node_rows, issues = _open_reader(nodes_path, NODE_HEADER)
    points: List[MeetingPoint] = []
    for offset, row in enumerate(node_rows, start=2):
        try:
            if len(row) != 4:
                raise ValueError(f"expected 4 fields, got {len(row)}")
            node_id, name, lon_text, lat_text = row
            if not node_id:
                raise ValueError("empty id")
            points.append(
                MeetingPoint(id=node_id, name=name, location=GeoPoint(float(lon_text), float(lat_text)))
            )
        except ValueError as exc:
            issues.append(f"{nodes_path}:{offset}: row rejected: {exc}")
    if not points:
        raise EmptyInputError(f"{nodes_path}: no valid meeting points")

    edge_rows, edge_issues = _open_reader(edges_path, EDGE_HEADER)
    issues.extend(edge_issues)
    edges: List[Tuple[str, str]] = []
    for offset, row in enumerate(edge_rows, start=2):
        if len(row) != 2 or not row[0] or not row[1]:
            issues.append(f"{edges_path}:{offset}: row rejected: expected from_id,to_id")
            continue
        edges.append((row[0], row[1]))
    return build_network(points, edges), issues


def write_network_csv(network: CarpoolNetwork, nodes_path: Path, edges_path: Path) -> None:
    node_lines = [",".join(NODE_HEADER)]
    for point in network.points:
        node_lines.append(f"{point.id},{point.name},{point.location.lon!r},{point.location.lat!r}")
    _atomic_write_text(nodes_path, "\n".join(node_lines) + "\n")
    edge_lines = [",".join(EDGE_HEADER)]
    for from_id, to_id in sorted(network.edges):
        edge_lines.append(f"{from_id},{to_id}")
    _atomic_write_text(edges_path, "\n".join(edge_lines) + "\n")


def read_od_csv(path: Path) -> Tuple[OdMatrix, List[str]]:
    rows, issues = _open_reader(path, OD_HEADER)
    entries: List[OdEntry] = []
    for offset, row in enumerate(rows, start=2):
        try:
            if len(row) != 7:
                raise ValueError(f"expected 7 fields, got {len(row)}")
            origin_id, dest_id, count, olon, olat, dlon, dlat = row
            if not origin_id or not dest_id:
                raise ValueError("empty zone id")
            entries.append(
                OdEntry(
                    origin_id=origin_id,
                    dest_id=dest_id,
                    count=float(count),
                    origin=GeoPoint(float(olon), float(olat)),
                    destination=GeoPoint(float(dlon), float(dlat)),
                )
            )
        except ValueError as exc:
            issues.append(f"{path}:{offset}: row rejected: {exc}")
    if not entries:
        raise EmptyInputError(f"{path}: no valid OD entries")
    return OdMatrix(entries=tuple(entries)), issues


def write_od_csv(od: OdMatrix, path: Path) -> None:
    lines = [",".join(OD_HEADER)]
    for e in od.entries:
        lines.append(
            f"{e.origin_id},{e.dest_id},{e.count!r},{e.origin.lon!r},{e.origin.lat!r},"
            f"{e.destination.lon!r},{e.destination.lat!r}"
        )
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_simplified_csv(simplified: Sequence[SimplifiedTrace], path: Path) -> None:
    """Long format: one row per skeleton point (origin, each pass, destination)."""
    lines = [",".join(SIMPLIFIED_HEADER)]
    for s in simplified:
        def row(kind: str, mp_id: str, sample: GpsSample, distance: Optional[float]) -> str:
            distance_text = "" if distance is None else repr(distance)
            return (
                f"{s.trace_id},{kind},{mp_id},{format_timestamp(sample.timestamp)},"
                f"{sample.position.lon!r},{sample.position.lat!r},{distance_text},{s.source_length}"
            )

        lines.append(row("origin", "", s.origin, None))
        for p in s.passes:
            lines.append(row("pass", p.meeting_point_id, p.closest_sample, p.distance_m))
        lines.append(row("destination", "", s.destination, None))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def read_simplified_csv(path: Path) -> Tuple[List[SimplifiedTrace], List[str]]:
    rows, issues = _open_reader(path, SIMPLIFIED_HEADER)
    grouped: Dict[str, List[List[str]]] = {}
    order: List[str] = []
    line_of: Dict[str, int] = {}
    for offset, row in enumerate(rows, start=2):
        if len(row) != 8:
            issues.append(f"{path}:{offset}: row rejected: expected 8 fields, got {len(row)}")
            continue
        trace_id = row[0]
        if trace_id not in grouped:
            grouped[trace_id] = []
            order.append(trace_id)
            line_of[trace_id] = offset
        grouped[trace_id].append(row)

    out: List[SimplifiedTrace] = []
    for trace_id in order:
        try:
            out.append(_assemble_simplified(trace_id, grouped[trace_id]))
        except ValueError as exc:
            issues.append(f"{path}:{line_of[trace_id]}: trace rejected: {exc}")
    if not out:
        raise EmptyInputError(f"{path}: no valid simplified traces")
    return out, issues


def _assemble_simplified(trace_id: str, rows: List[List[str]]) -> SimplifiedTrace:
    if rows[0][1] != "origin" or rows[-1][1] != "destination":
        raise ValueError("must start with an origin row and end with a destination row")

    def sample_of(row: List[str]) -> GpsSample:
        return GpsSample(
            position=GeoPoint(float(row[4]), float(row[5])),
            timestamp=parse_timestamp(row[3]),
        )

    passes = []
    for row in rows[1:-1]:
        if row[1] != "pass":
            raise ValueError(f"unexpected point kind {row[1]!r} between origin and destination")
        passes.append(
            MeetingPointPass(
                meeting_point_id=row[2],
                closest_sample=sample_of(row),
                distance_m=float(row[6]),
            )
        )
    return SimplifiedTrace(
        trace_id=trace_id,
        origin=sample_of(rows[0]),
        passes=tuple(passes),
        destination=sample_of(rows[-1]),
        source_length=int(rows[0][7]),
    )


def write_flow_csv(flow: FlowProfile, path: Path) -> None:
    lines = ["line_id,bin_start_utc,bin_end_utc,flow,day_count"]
    for j, (left, right) in enumerate(flow.grid.bins()):
        lines.append(
            f"{flow.line_id},{format_timestamp(left)},{format_timestamp(right)},"
            f"{flow.counts[j]!r},{flow.day_count}"
        )
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_wait_csv(wait: WaitProfile, line_id: str, path: Path) -> None:
    lines = ["line_id,bin_start_utc,bin_end_utc,wait_min"]
    for j, (left, right) in enumerate(wait.grid.bins()):
        value = wait.waits[j]
        text = NA_TOKEN if value is None else repr(value)
        lines.append(f"{line_id},{format_timestamp(left)},{format_timestamp(right)},{text}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_labels_csv(labels: ClusterLabels, path: Path) -> None:
    lines = ["trace_id,cluster_label"]
    for trace_id in sorted(labels.labels):
        lines.append(f"{trace_id},{labels.labels[trace_id]}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_matchprob_csv(rows: Sequence[Tuple[int, float, float]], path: Path) -> None:
    lines = ["subcubes,estimate,exact"]
    for n, estimate, exact in rows:
        lines.append(f"{n},{estimate!r},{exact!r}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def export_flow_map(
    simplified: Sequence[SimplifiedTrace],
    labels: Optional[ClusterLabels],
    network: CarpoolNetwork,
) -> dict:
    """GeoJSON FeatureCollection: meeting-point Points plus one LineString per trace."""
    features: List[dict] = []
    for point in network.points:
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [point.location.lon, point.location.lat],
                },
                "properties": {"id": point.id, "name": point.name},
            }
        )
    for s in simplified:
        coordinates = [[s.origin.position.lon, s.origin.position.lat]]
        coordinates.extend(
            [p.closest_sample.position.lon, p.closest_sample.position.lat] for p in s.passes
        )
        coordinates.append([s.destination.position.lon, s.destination.position.lat])
        properties = {
            "trace_id": s.trace_id,
            "pass_times": [format_timestamp(p.arrival_time) for p in s.passes],
        }
        if labels is not None and s.trace_id in labels.labels:
            properties["cluster_label"] = labels.labels[s.trace_id]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": coordinates},
                "properties": properties,
            }
        )
    return {"type": "FeatureCollection", "features": features}


def write_geojson(document: dict, path: Path) -> None:
    _atomic_write_text(path, json.dumps(document, indent=2) + "\n")


def write_json(document: dict, path: Path) -> None:
    _atomic_write_text(path, json.dumps(document, indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class ParsedInputs:
    """Everything the configured input files yielded, plus row-level issues."""

    traces: Optional[List[Trace]]
    network: Optional[CarpoolNetwork]
    od_matrix: Optional[OdMatrix]
    issues: List[str]


def parse_inputs(config: "PipelineConfig") -> ParsedInputs:
    """Read whichever of the trace/network/OD files the config names.

    Malformed rows are collected into ``issues`` with file and line numbers;
    an entirely invalid file raises.
    """
    issues: List[str] = []
    traces = network = od = None
    if config.traces is not None:
        traces, trace_issues = read_traces_csv(config.traces)
        issues.extend(trace_issues)
    if config.network_nodes is not None or config.network_edges is not None:
        if config.network_nodes is None or config.network_edges is None:
            raise ConfigError("network needs both a nodes file and an edges file")
        network, network_issues = read_network_csv(config.network_nodes, config.network_edges)
        issues.extend(network_issues)
    if config.od_matrix is not None:
        od, od_issues = read_od_csv(config.od_matrix)
        issues.extend(od_issues)
    return ParsedInputs(traces=traces, network=network, od_matrix=od, issues=issues)


@dataclass
class PipelineConfig:
    """Everything a pipeline run needs; every field can be set by a CLI flag."""

    network_nodes: Optional[Path] = None
    network_edges: Optional[Path] = None
    traces: Optional[Path] = None
    od_matrix: Optional[Path] = None
    line: Optional[Tuple[str, ...]] = None
    window_start: Optional[datetime] = None
    window_end: Optional[datetime] = None
    bin_minutes: float = 15.0
    buffer_radius_m: float = 1000.0
    operating_days: int = 5
    cluster_cut_m: float = 6000.0
    day_count: Optional[int] = None  # None: count distinct arrival dates
    output_dir: Path = Path("out")
    router: str = "straight-line"
    router_url: Optional[str] = None
    router_cache: Optional[Path] = None
    router_timeout_s: float = 10.0
    departure: Optional[datetime] = None
    seed: int = 0
    matchprob_subcubes: Tuple[int, ...] = (1, 2, 3, 27, 125)
    matchprob_samples: int = 1000
    scenario: Optional[dict] = None
    issues: List[str] = field(default_factory=list)

    def carpool_line(self) -> CarpoolLine:
        if not self.line:
            raise ConfigError("no carpooling line configured")
        return CarpoolLine(node_ids=tuple(self.line))


_CONFIG_KEYS = {
    "network_nodes",
    "network_edges",
    "traces",
    "od_matrix",
    "line",
    "window_start",
    "window_end",
    "bin_minutes",
    "buffer_radius_m",
    "operating_days",
    "cluster_cut_m",
    "day_count",
    "output_dir",
    "router",
    "router_url",
    "router_cache",
    "router_timeout_s",
    "departure",
    "seed",
    "matchprob_subcubes",
    "matchprob_samples",
    "scenario",
}

_PATH_KEYS = {"network_nodes", "network_edges", "traces", "od_matrix", "output_dir", "router_cache"}
_TIME_KEYS = {"window_start", "window_end", "departure"}


def load_config(path: Path) -> PipelineConfig:
    """Load the JSON config file; relative paths resolve against its directory."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    base = Path(path).resolve().parent
    config = PipelineConfig()
    for key, value in raw.items():
        if key in _PATH_KEYS and value is not None:
            value = _resolve(base, value)
        elif key in _TIME_KEYS and value is not None:
            try:
                value = parse_timestamp(str(value))
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        elif key == "line" and value is not None:
            value = tuple(str(v) for v in value)
        elif key == "matchprob_subcubes" and value is not None:
            value = tuple(int(v) for v in value)
        setattr(config, key, value)
    return config


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p
