"""Command-line pipeline: ingest, simplify, profile, compare, export.

Exit codes: 0 success, 1 usage, 2 input parsing, 3 runtime failure. Errors
are reported as one JSON object on stderr with a machine-readable code.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timedelta
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import io as formats
from .cluster import (
    ClusterLabels,
    complete_linkage,
    cut,
    door_to_door_matches,
    od_vector_from_points,
)
from .errors import (
    CarpoolError,
    ConfigError,
    EmptyInputError,
    ParseError,
    UsageError,
)
from .flow import FlowProfile, TimeGrid, driver_flow, wait_times, weekly_comparison
from .network import CarpoolNetwork
from .participation import (
    CachingHttpRouter,
    StraightLineRouter,
    coincident_flow,
    infer_routes,
    participation_rate,
)
from .matchprob import SubCubeModel, match_probability_exact, match_probability_mc
from .simplify import SimplifiedTrace, TimeWindow, compression_rate, simplify_trace
from .simulate import ArrivalModel, SyntheticScenario, generate_traces, simulate_waits

SUBCOMMANDS = (
    "simplify",
    "flow",
    "wait",
    "compare",
    "cluster",
    "matchprob",
    "participation",
    "simulate",
    "map",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures through our exit codes
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="carpoolflow", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, add_help=True)
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--traces", type=Path)
        p.add_argument("--network-nodes", type=Path)
        p.add_argument("--network-edges", type=Path)
        p.add_argument("--od-matrix", type=Path)
        p.add_argument("--line", help="comma-separated meeting point ids, e.g. B,S")
        p.add_argument("--window-start", help="ISO timestamp with zone offset")
        p.add_argument("--window-end", help="ISO timestamp with zone offset")
        p.add_argument("--bin-minutes", type=float)
        p.add_argument("--buffer-radius-m", type=float)
        p.add_argument("--operating-days", type=int)
        p.add_argument("--cluster-cut-m", type=float)
        p.add_argument("--day-count", type=int)
        p.add_argument("--output-dir", type=Path)
        p.add_argument("--router", choices=["straight-line", "http"])
        p.add_argument("--router-url")
        p.add_argument("--router-cache", type=Path)
        p.add_argument("--router-timeout-s", type=float)
        p.add_argument("--departure", help="ISO timestamp for route inference")
        p.add_argument("--seed", type=int)
        p.add_argument("--matchprob-subcubes", help="comma-separated sub-cube counts")
        p.add_argument("--matchprob-samples", type=int)
        p.add_argument("--scenario", type=Path, help="JSON scenario file for `simulate`")
    return parser


def _merge_config(args: argparse.Namespace) -> formats.PipelineConfig:
    config = formats.load_config(args.config) if args.config else formats.PipelineConfig()
    overrides = {
        "traces": args.traces,
        "network_nodes": args.network_nodes,
        "network_edges": args.network_edges,
        "od_matrix": args.od_matrix,
        "bin_minutes": args.bin_minutes,
        "buffer_radius_m": args.buffer_radius_m,
        "operating_days": args.operating_days,
        "cluster_cut_m": args.cluster_cut_m,
        "day_count": args.day_count,
        "output_dir": args.output_dir,
        "router": args.router,
        "router_url": args.router_url,
        "router_cache": args.router_cache,
        "router_timeout_s": args.router_timeout_s,
        "seed": args.seed,
        "matchprob_samples": args.matchprob_samples,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    if args.line:
        config.line = tuple(part.strip() for part in args.line.split(",") if part.strip())
    for key in ("window_start", "window_end", "departure"):
        text = getattr(args, key)
        if text:
            try:
                setattr(config, key, formats.parse_timestamp(text))
            except ValueError as exc:
                raise UsageError(f"--{key.replace('_', '-')}: {exc}") from None
    if args.matchprob_subcubes:
        try:
            config.matchprob_subcubes = tuple(
                int(part) for part in args.matchprob_subcubes.split(",") if part.strip()
            )
        except ValueError as exc:
            raise UsageError(f"--matchprob-subcubes: {exc}") from None
    if args.scenario:
        try:
            config.scenario = json.loads(Path(args.scenario).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read scenario: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario is not valid JSON: {exc}") from None
    return config


def _require(config: formats.PipelineConfig, *fields: str) -> None:
    missing = [name for name in fields if getattr(config, name) is None]
    if missing:
        raise UsageError(f"missing required settings: {', '.join(missing)}")


def _window(config: formats.PipelineConfig) -> TimeWindow:
    _require(config, "window_start", "window_end")
    return TimeWindow(config.window_start, config.window_end, daily=True)


def _grid(config: formats.PipelineConfig) -> TimeGrid:
    _require(config, "window_start", "window_end")
    return TimeGrid(config.window_start, config.window_end, bin_minutes=config.bin_minutes)


def _load_network(config: formats.PipelineConfig) -> Tuple[CarpoolNetwork, List[str]]:
    _require(config, "network_nodes", "network_edges")
    return formats.read_network_csv(config.network_nodes, config.network_edges)


def _matched_traces(
    config: formats.PipelineConfig,
) -> Tuple[List[SimplifiedTrace], CarpoolNetwork, List[str]]:
    _require(config, "traces")
    network, issues = _load_network(config)
    traces, trace_issues = formats.read_traces_csv(config.traces)
    issues.extend(trace_issues)
    line = config.carpool_line()
    window = _window(config)
    matched = []
    for trace in traces:
        simplified = simplify_trace(trace, line, network, config.buffer_radius_m, window)
        if simplified is not None:
            matched.append(simplified)
    return matched, network, issues


def _auto_day_count(config: formats.PipelineConfig, matched: Sequence[SimplifiedTrace]) -> int:
    if config.day_count is not None:
        return config.day_count
    dates = {s.passes[0].arrival_time.date() for s in matched}
    return max(1, len(dates))


def _flow_profile(
    config: formats.PipelineConfig, matched: Sequence[SimplifiedTrace]
) -> FlowProfile:
    grid = _grid(config)
    return driver_flow(matched, config.carpool_line(), grid, _auto_day_count(config, matched))


def _cluster_labels(
    config: formats.PipelineConfig,
    matched: Sequence[SimplifiedTrace],
    network: CarpoolNetwork,
) -> Optional[ClusterLabels]:
    if not matched:
        return None
    reference = network.node(config.carpool_line().first).location
    vectors = [
        od_vector_from_points(s.origin.position, s.destination.position, reference)
        for s in matched
    ]
    dendrogram = complete_linkage(vectors)
    return cut(dendrogram, config.cluster_cut_m, ids=[s.trace_id for s in matched])


def _print_issues(issues: Sequence[str]) -> None:
    for issue in issues:
        print(issue, file=sys.stderr)


def _cmd_simplify(config: formats.PipelineConfig) -> Dict:
    matched, _, issues = _matched_traces(config)
    _print_issues(issues)
    out = config.output_dir / "simplified.csv"
    formats.write_simplified_csv(matched, out)
    rates = [compression_rate(s) for s in matched]
    report = {
        "matched_traces": len(matched),
        "mean_source_length": (
            sum(s.source_length for s in matched) / len(matched) if matched else 0.0
        ),
        "mean_point_count": (
            sum(s.point_count for s in matched) / len(matched) if matched else 0.0
        ),
        "mean_compression_rate": sum(rates) / len(rates) if rates else 0.0,
    }
    formats.write_json(report, config.output_dir / "compression.json")
    return {"written": [str(out), str(config.output_dir / "compression.json")], **report}


def _cmd_flow(config: formats.PipelineConfig) -> Dict:
    matched, _, issues = _matched_traces(config)
    _print_issues(issues)
    profile = _flow_profile(config, matched)
    out = config.output_dir / "flow.csv"
    formats.write_flow_csv(profile, out)
    return {"written": [str(out)], "daily_total": sum(profile.counts), "day_count": profile.day_count}


def _cmd_wait(config: formats.PipelineConfig) -> Dict:
    matched, _, issues = _matched_traces(config)
    _print_issues(issues)
    profile = _flow_profile(config, matched)
    waits = wait_times(profile)
    out = config.output_dir / "wait.csv"
    formats.write_wait_csv(waits, profile.line_id, out)
    defined = waits.defined()
    return {
        "written": [str(out)],
        "mean_wait_min": sum(defined) / len(defined) if defined else None,
        "unavailable_bins": sum(1 for w in waits.waits if w is None),
    }


def _iso_week(stamp: datetime) -> str:
    iso = stamp.isocalendar()
    return f"{iso[0]}W{iso[1]:02d}"


def _cmd_compare(config: formats.PipelineConfig) -> Dict:
    matched, network, issues = _matched_traces(config)
    _print_issues(issues)
    line = config.carpool_line()
    window_minutes = (config.window_end - config.window_start).total_seconds() / 60.0
    week_grid = TimeGrid(config.window_start, config.window_end, bin_minutes=window_minutes)

    by_week: Dict[str, List[SimplifiedTrace]] = {}
    for s in matched:
        by_week.setdefault(_iso_week(s.passes[0].arrival_time), []).append(s)

    lines = [
        "week,door_count,meeting_count,flow_increase,door_wait_min,meeting_wait_min,wait_change"
    ]
    for week in sorted(by_week):
        group = by_week[week]
        labels = _cluster_labels(config, group, network)
        door_ids = door_to_door_matches(labels)
        door_group = [s for s in group if s.trace_id in door_ids]
        door_profile = driver_flow(door_group, line, week_grid)
        meeting_profile = driver_flow(group, line, week_grid)
        comparison = weekly_comparison(door_profile, meeting_profile, config.operating_days)
        door_count, meeting_count = len(door_group), len(group)
        increase = (
            (meeting_count - door_count) / door_count if door_count else None
        )
        lines.append(
            ",".join(
                [
                    week,
                    str(door_count),
                    str(meeting_count),
                    "" if increase is None else repr(increase),
                    "" if comparison.door_wait_min is None else repr(comparison.door_wait_min),
                    ""
                    if comparison.meeting_wait_min is None
                    else repr(comparison.meeting_wait_min),
                    "" if comparison.wait_change is None else repr(comparison.wait_change),
                ]
            )
        )
    out = config.output_dir / "compare.csv"
    formats._atomic_write_text(out, "\n".join(lines) + "\n")
    return {"written": [str(out)], "weeks": len(by_week)}


def _cmd_cluster(config: formats.PipelineConfig) -> Dict:
    matched, network, issues = _matched_traces(config)
    _print_issues(issues)
    labels = _cluster_labels(config, matched, network)
    if labels is None:
        raise EmptyInputError("no matched traces to cluster")
    out = config.output_dir / "labels.csv"
    formats.write_labels_csv(labels, out)
    sizes = sorted(labels.cardinalities().values(), reverse=True)
    return {"written": [str(out)], "clusters": len(sizes), "largest": sizes[0]}


def _cmd_matchprob(config: formats.PipelineConfig) -> Dict:
    rows = []
    for n in config.matchprob_subcubes:
        model = SubCubeModel(n=n, sample_count=config.matchprob_samples, seed=config.seed)
        rows.append((n, match_probability_mc(model), match_probability_exact(n)))
    out = config.output_dir / "matchprob.csv"
    formats.write_matchprob_csv(rows, out)
    return {"written": [str(out)], "rows": len(rows)}


def _cmd_participation(config: formats.PipelineConfig) -> Dict:
    _require(config, "od_matrix")
    matched, network, issues = _matched_traces(config)
    _print_issues(issues)
    od, od_issues = formats.read_od_csv(config.od_matrix)
    _print_issues(od_issues)

    profile = _flow_profile(config, matched)
    matched_daily = sum(profile.counts)

    if config.router == "http":
        router = CachingHttpRouter(
            url_template=config.router_url,
            cache_dir=config.router_cache,
            timeout_s=config.router_timeout_s,
        )
    else:
        router = StraightLineRouter()
    departure = config.departure or config.window_start
    if departure is None:
        raise UsageError("participation needs --departure or a window start")
    inference = infer_routes(od, router, departure)
    population = coincident_flow(
        inference.plans, od, config.carpool_line(), network, config.buffer_radius_m
    )
    warnings = []
    rate = participation_rate(matched_daily, population)
    if rate > 1.0:
        warnings.append(
            "participation rate above 100%: GPS-trace and OD populations are inconsistent"
        )
    report = {
        "line": config.carpool_line().label(),
        "matched_daily_drivers": matched_daily,
        "route_population": population,
        "participation_rate": rate,
        "routing_failures": [
            {"origin_id": f.origin_id, "dest_id": f.dest_id, "reason": f.reason}
            for f in inference.failures
        ],
        "warnings": warnings,
        "assumptions": {
            "od_time_alignment": "all OD flow treated as morning-peak commuting flow"
        },
    }
    out = config.output_dir / "participation.json"
    formats.write_json(report, out)
    return {"written": [str(out)], "participation_rate": rate}


def _scenario_from_config(
    config: formats.PipelineConfig, network: CarpoolNetwork
) -> Tuple[SyntheticScenario, Optional[dict]]:
    if not config.scenario:
        raise UsageError("simulate needs a scenario (config key `scenario` or --scenario)")
    raw = dict(config.scenario)
    waits_spec = raw.pop("waits", None)
    try:
        target_flows = tuple(float(v) for v in raw.pop("target_flows"))
    except KeyError:
        raise ConfigError("scenario must define target_flows") from None
    known = {
        "buffer_radius_m",
        "gps_noise_sigma_m",
        "sampling_period_s",
        "origin_scatter_m",
        "destination_scatter_m",
        "approach_minutes",
        "speed_mps",
        "day_count",
        "seed",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    scenario = SyntheticScenario(
        network=network,
        line=config.carpool_line(),
        grid=_grid(config),
        target_flows=target_flows,
        **{key: raw[key] for key in known if key in raw},
    )
    return scenario, waits_spec


def _cmd_simulate(config: formats.PipelineConfig) -> Dict:
    network, issues = _load_network(config)
    _print_issues(issues)
    scenario, waits_spec = _scenario_from_config(config, network)
    traces = generate_traces(scenario)
    out_traces = config.output_dir / "traces.csv"
    formats.write_traces_csv(traces, out_traces)
    written = [str(out_traces)]
    if waits_spec:
        per_bin = int(waits_spec.get("requests_per_bin", 1))
        horizon_minutes = waits_spec.get("horizon_minutes")
        horizon = None if horizon_minutes is None else timedelta(minutes=float(horizon_minutes))
        grid = scenario.grid
        profile = FlowProfile(
            grid=grid,
            counts=scenario.target_flows,
            line_id=scenario.line.label(),
            day_count=1,
        )
        model = ArrivalModel.from_flow(profile, seed=scenario.seed)
        requests = []
        for j in range(grid.n_bins):
            left, _ = grid.bin_bounds(j)
            for i in range(per_bin):
                requests.append(
                    left + timedelta(minutes=(i + 0.5) / per_bin * grid.bin_minutes)
                )
        waits = simulate_waits(model, requests, horizon)
        lines = ["request_time_utc,wait_min,censored"]
        for w in waits:
            lines.append(
                f"{formats.format_timestamp(w.request_time)},{w.wait_min!r},{str(w.censored).lower()}"
            )
        out_waits = config.output_dir / "simulated_waits.csv"
        formats._atomic_write_text(out_waits, "\n".join(lines) + "\n")
        written.append(str(out_waits))
    return {"written": written, "traces": len(traces)}


def _cmd_map(config: formats.PipelineConfig) -> Dict:
    matched, network, issues = _matched_traces(config)
    _print_issues(issues)
    labels = _cluster_labels(config, matched, network)
    document = formats.export_flow_map(matched, labels, network)
    out = config.output_dir / "flowmap.geojson"
    formats.write_geojson(document, out)
    return {"written": [str(out)], "features": len(document["features"])}


_HANDLERS = {
    "simplify": _cmd_simplify,
    "flow": _cmd_flow,
    "wait": _cmd_wait,
    "compare": _cmd_compare,
    "cluster": _cmd_cluster,
    "matchprob": _cmd_matchprob,
    "participation": _cmd_participation,
    "simulate": _cmd_simulate,
    "map": _cmd_map,
}


def run_pipeline(config: formats.PipelineConfig, command: str) -> Dict:
    """Run one subcommand against a prepared config; returns its summary."""
    if command not in _HANDLERS:
        raise UsageError(f"unknown subcommand {command!r}")
    return _HANDLERS[command](config)


def _report_error(code: str, message: str) -> None:
    print(json.dumps({"error": {"code": code, "message": message}}), file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required")
        config = _merge_config(args)
        summary = run_pipeline(config, args.command)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        _report_error(exc.code, str(exc))
        return 1
    except (ParseError, EmptyInputError, ConfigError) as exc:
        _report_error(exc.code, str(exc))
        return 2
    except CarpoolError as exc:
        _report_error(exc.code, str(exc))
        return 3
    except Exception as exc:  # pragma: no cover - safety net
        _report_error("internal", f"{type(exc).__name__}: {exc}")
        return 3
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
