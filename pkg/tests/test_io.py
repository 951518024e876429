"""CSV/GeoJSON formats: round trips, row-level error reporting, config."""

from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone

import pytest

from carpoolflow import io as formats
from carpoolflow.cluster import ClusterLabels
from carpoolflow.errors import ConfigError, EmptyInputError, ParseError
from carpoolflow.flow import FlowProfile, TimeGrid, WaitProfile
from carpoolflow.geo import GeoPoint, GpsSample, Trace
from carpoolflow.network import CarpoolLine
from carpoolflow.participation import OdEntry, OdMatrix
from carpoolflow.simplify import MeetingPointPass, SimplifiedTrace

from conftest import COMPACT_EDGES, COMPACT_POINTS, at, make_trace

UTC = timezone.utc


def sample_traces():
    t1 = make_trace(
        "alpha",
        [
            (GeoPoint(5.3001234567, 45.6007654321), at(7, 59, 58)),
            (GeoPoint(5.2991111111, 45.6002222222), at(8, 0, 8)),
            (GeoPoint(5.2981234560, 45.5998888888), at(8, 0, 18)),
        ],
    )
    t2 = make_trace(
        "beta",
        [
            (GeoPoint(5.25, 45.61), at(8, 5)),
            (GeoPoint(5.24, 45.62), at(8, 6)),
        ],
    )
    return [t1, t2]


class TestTimestampParsing:
    def test_z_suffix(self):
        stamp = formats.parse_timestamp("2019-11-28T08:00:00Z")
        assert stamp == at(8, 0)

    def test_offset_normalized_to_utc(self):
        stamp = formats.parse_timestamp("2019-11-28T09:00:00+01:00")
        assert stamp == at(8, 0)
        assert stamp.tzinfo == UTC

    def test_naive_rejected(self):
        with pytest.raises(ValueError):
            formats.parse_timestamp("2019-11-28T08:00:00")


class TestTraceCsv:
    def test_round_trip_is_exact(self, tmp_path):
        traces = sample_traces()
        path = tmp_path / "traces.csv"
        formats.write_traces_csv(traces, path)
        parsed, issues = formats.read_traces_csv(path)
        assert issues == []
        assert {t.id: t for t in parsed} == {t.id: t for t in traces}

    def test_bad_rows_reported_with_line_numbers(self, tmp_path):
        path = tmp_path / "traces.csv"
        path.write_text(
            "trace_id,timestamp_utc,lon,lat\n"
            "a,2019-11-28T08:00:00Z,5.30,45.60\n"
            "a,2019-11-28T08:00:10Z,5.29,95.0\n"  # latitude out of range
            "a,2019-11-28T08:00:20Z,5.28,45.61\n"
            "a,not-a-time,5.27,45.62\n"
        )
        traces, issues = formats.read_traces_csv(path)
        assert len(traces) == 1
        assert len(traces[0]) == 2
        assert any(":3:" in issue for issue in issues)
        assert any(":5:" in issue for issue in issues)

    def test_decreasing_timestamps_reject_only_that_trace(self, tmp_path):
        path = tmp_path / "traces.csv"
        path.write_text(
            "trace_id,timestamp_utc,lon,lat\n"
            "bad,2019-11-28T08:10:00Z,5.30,45.60\n"
            "bad,2019-11-28T08:00:00Z,5.29,45.61\n"
            "good,2019-11-28T08:00:00Z,5.30,45.60\n"
            "good,2019-11-28T08:01:00Z,5.29,45.61\n"
        )
        traces, issues = formats.read_traces_csv(path)
        assert [t.id for t in traces] == ["good"]
        assert any("decreasing" in issue for issue in issues)

    def test_zero_valid_rows_is_an_error(self, tmp_path):
        path = tmp_path / "traces.csv"
        path.write_text("trace_id,timestamp_utc,lon,lat\nx,bogus,1,2\n")
        with pytest.raises(EmptyInputError):
            formats.read_traces_csv(path)

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "traces.csv"
        path.write_text("id,time,x,y\n")
        with pytest.raises(ParseError):
            formats.read_traces_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            formats.read_traces_csv(tmp_path / "absent.csv")


class TestNetworkCsv:
    def test_round_trip(self, tmp_path):
        from carpoolflow.network import build_network

        network = build_network(COMPACT_POINTS, COMPACT_EDGES)
        nodes, edges = tmp_path / "nodes.csv", tmp_path / "edges.csv"
        formats.write_network_csv(network, nodes, edges)
        parsed, issues = formats.read_network_csv(nodes, edges)
        assert issues == []
        assert parsed.points == network.points
        assert parsed.edges == network.edges


class TestOdCsv:
    def test_round_trip(self, tmp_path):
        od = OdMatrix(
            entries=(
                OdEntry("z1", "z2", 1500.0, GeoPoint(5.4, 45.58), GeoPoint(5.1, 45.63)),
                OdEntry("z2", "z1", 320.0, GeoPoint(5.1, 45.63), GeoPoint(5.4, 45.58)),
            )
        )
        path = tmp_path / "od.csv"
        formats.write_od_csv(od, path)
        parsed, issues = formats.read_od_csv(path)
        assert issues == []
        assert parsed == od


def simplified_fixture() -> SimplifiedTrace:
    origin = GpsSample(GeoPoint(5.40123, 45.59876), at(7, 48, 12))
    destination = GpsSample(GeoPoint(5.14, 45.61), at(8, 41, 3))
    passes = (
        MeetingPointPass("B", GpsSample(GeoPoint(5.2999, 45.6001), at(8, 1, 22)), 112.375),
        MeetingPointPass("V", GpsSample(GeoPoint(5.268, 45.6), at(8, 6, 40)), 54.25),
        MeetingPointPass("S", GpsSample(GeoPoint(5.236, 45.6), at(8, 12, 5)), 87.0625),
    )
    return SimplifiedTrace("alpha", origin, passes, destination, source_length=311)


class TestSimplifiedCsv:
    def test_round_trip_is_exact(self, tmp_path):
        simplified = simplified_fixture()
        path = tmp_path / "simplified.csv"
        formats.write_simplified_csv([simplified], path)
        parsed, issues = formats.read_simplified_csv(path)
        assert issues == []
        assert parsed == [simplified]


class TestProfileCsv:
    def test_flow_csv_shape(self, tmp_path):
        grid = TimeGrid(at(8, 0), at(8, 30), bin_minutes=15.0)
        profile = FlowProfile(grid=grid, counts=(2.0, 1.5), line_id="B>S", day_count=2)
        path = tmp_path / "flow.csv"
        formats.write_flow_csv(profile, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "line_id,bin_start_utc,bin_end_utc,flow,day_count"
        assert lines[1] == "B>S,2019-11-28T08:00:00+00:00,2019-11-28T08:15:00+00:00,2.0,2"

    def test_wait_csv_uses_na_token(self, tmp_path):
        grid = TimeGrid(at(8, 0), at(8, 30), bin_minutes=15.0)
        wait = WaitProfile(grid=grid, waits=(7.5, None))
        path = tmp_path / "wait.csv"
        formats.write_wait_csv(wait, "B>S", path)
        lines = path.read_text().splitlines()
        assert lines[1].endswith(",7.5")
        assert lines[2].endswith(",NA")


def validate_geojson(document: dict) -> None:
    assert document["type"] == "FeatureCollection"
    for feature in document["features"]:
        assert feature["type"] == "Feature"
        geometry = feature["geometry"]
        assert geometry["type"] in {"Point", "LineString"}
        coords = geometry["coordinates"]
        positions = [coords] if geometry["type"] == "Point" else coords
        if geometry["type"] == "LineString":
            assert len(positions) >= 2
        for lon, lat in positions:
            assert -180.0 <= lon <= 180.0
            assert -90.0 <= lat <= 90.0
        assert isinstance(feature["properties"], dict)


class TestFlowMapExport:
    def test_single_trace_geometry(self, compact_network):
        simplified = simplified_fixture()
        document = formats.export_flow_map([simplified], None, compact_network)
        validate_geojson(document)
        lines = [f for f in document["features"] if f["geometry"]["type"] == "LineString"]
        points = [f for f in document["features"] if f["geometry"]["type"] == "Point"]
        assert len(lines) == 1
        assert len(lines[0]["geometry"]["coordinates"]) == 5
        assert len(lines[0]["properties"]["pass_times"]) == 3
        assert len(points) == 3

    def test_empty_traces_leave_only_points(self, compact_network):
        document = formats.export_flow_map([], None, compact_network)
        validate_geojson(document)
        assert all(f["geometry"]["type"] == "Point" for f in document["features"])

    def test_labels_attached(self, compact_network):
        simplified = simplified_fixture()
        labels = ClusterLabels(labels={"alpha": 2})
        document = formats.export_flow_map([simplified], labels, compact_network)
        line = [f for f in document["features"] if f["geometry"]["type"] == "LineString"][0]
        assert line["properties"]["cluster_label"] == 2


class TestParseInputs:
    def test_reads_everything_configured(self, tmp_path):
        from carpoolflow.network import build_network

        formats.write_traces_csv(sample_traces(), tmp_path / "traces.csv")
        network = build_network(COMPACT_POINTS, COMPACT_EDGES)
        formats.write_network_csv(network, tmp_path / "nodes.csv", tmp_path / "edges.csv")
        od = OdMatrix(
            entries=(OdEntry("a", "b", 7.0, GeoPoint(5.4, 45.58), GeoPoint(5.1, 45.63)),)
        )
        formats.write_od_csv(od, tmp_path / "od.csv")

        config = formats.PipelineConfig(
            traces=tmp_path / "traces.csv",
            network_nodes=tmp_path / "nodes.csv",
            network_edges=tmp_path / "edges.csv",
            od_matrix=tmp_path / "od.csv",
        )
        parsed = formats.parse_inputs(config)
        assert parsed.issues == []
        assert {t.id for t in parsed.traces} == {"alpha", "beta"}
        assert parsed.network.edges == network.edges
        assert parsed.od_matrix == od

    def test_absent_sections_stay_none(self):
        parsed = formats.parse_inputs(formats.PipelineConfig())
        assert (parsed.traces, parsed.network, parsed.od_matrix) == (None, None, None)

    def test_half_configured_network_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            formats.parse_inputs(formats.PipelineConfig(network_nodes=tmp_path / "nodes.csv"))


class TestConfig:
    def test_load_resolves_relative_paths(self, tmp_path):
        (tmp_path / "data").mkdir()
        (tmp_path / "config.json").write_text(
            json.dumps(
                {
                    "traces": "data/traces.csv",
                    "line": ["B", "S"],
                    "window_start": "2019-11-28T06:30:00Z",
                    "window_end": "2019-11-28T09:00:00Z",
                    "bin_minutes": 15,
                }
            )
        )
        config = formats.load_config(tmp_path / "config.json")
        assert config.traces == tmp_path / "data" / "traces.csv"
        assert config.window_start == at(6, 30)
        assert config.carpool_line() == CarpoolLine(("B", "S"))

    def test_unknown_keys_rejected(self, tmp_path):
        (tmp_path / "config.json").write_text(json.dumps({"no_such_key": 1}))
        with pytest.raises(ConfigError):
            formats.load_config(tmp_path / "config.json")

    def test_invalid_json_rejected(self, tmp_path):
        (tmp_path / "config.json").write_text("{not json")
        with pytest.raises(ConfigError):
            formats.load_config(tmp_path / "config.json")
