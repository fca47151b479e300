"""Command-line frontend wiring the pipeline end to end.

Subcommands: validate, metrics, scan-k, analyze, synth. Stage outputs are
plain files (delimited tables and JSON) so each stage can be re-run and
diffed independently. Exit codes: 0 success, 1 usage or config error,
2 data error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from datetime import date
from pathlib import Path

from .cluster import (
    ClusteringResult,
    DEFAULT_HIER_CAP,
    avg_silhouette,
    denormalize,
    hierarchical_cluster,
    range_normalize,
    scan_k,
    seeded_kmeans,
)
from .errors import ConfigError, DataError, InvariantError
from .ingest import EligibilityPolicy, derive_project_window, filter_participants, parse_log_file
from .metrics import descriptive_stats, engagement_matrix
from .profiles import importance_table, label_profiles, profile_report
from .sessions import build_timelines
from .synth import CorpusSpec, generate_corpus
from . import tables

_THRESHOLD_PATTERN = re.compile(r"^fixed:(\d+(?:\.\d+)?)([smh]?)$")
_THRESHOLD_UNITS = {"": 1.0, "s": 1.0, "m": 60.0, "h": 3600.0}


class _Parser(argparse.ArgumentParser):
    """argparse reports usage problems via ConfigError so they exit 1."""

    def error(self, message):
        raise ConfigError(message)


def _parse_threshold(text: str) -> float | None:
    if text == "auto":
        return None
    match = _THRESHOLD_PATTERN.match(text)
    if not match:
        raise ConfigError(
            f"--threshold must be 'auto' or 'fixed:<duration>' with an "
            f"optional s/m/h unit (e.g. fixed:1800, fixed:30m), got {text!r}"
        )
    return float(match.group(1)) * _THRESHOLD_UNITS[match.group(2)]


def _parse_date(text: str, flag: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError as error:
        raise ConfigError(f"{flag}: expected YYYY-MM-DD, got {text!r}") from error


def _out_dir(args) -> Path:
    directory = Path(args.out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def cmd_validate(args) -> int:
    _, report = parse_log_file(args.log)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_metrics(args) -> int:
    threshold = _parse_threshold(args.threshold)
    start = _parse_date(args.start, "--start") if args.start else None
    end = _parse_date(args.end, "--end") if args.end else None
    policy = EligibilityPolicy(
        min_active_days=args.min_active_days, join_quantile=args.join_quantile
    )

    events_by_volunteer, report = parse_log_file(args.log)
    if not events_by_volunteer:
        raise DataError(f"{args.log}: no events parsed")
    window = derive_project_window(
        events_by_volunteer,
        join_quantile=args.join_quantile,
        start_override=start,
        end_override=end,
    )
    eligible, excluded = filter_participants(events_by_volunteer, window, policy)
    if not eligible:
        counts: dict[str, int] = {}
        for reasons in excluded.values():
            for reason in reasons:
                counts[reason] = counts.get(reason, 0) + 1
        raise DataError(
            f"no volunteers pass the eligibility filter "
            f"(of {len(excluded)} total; exclusions by reason: {counts})"
        )

    timelines, thresholds, sessions = build_timelines(
        eligible, window, fixed_threshold_seconds=threshold, workers=args.workers
    )
    ids, matrix = engagement_matrix(timelines)

    meta = {
        "command": "metrics",
        "input": args.log,
        "window_start": window.start.isoformat(),
        "window_end": window.end.isoformat(),
        "eligibility_cutoff": window.eligibility_cutoff.isoformat(),
        "join_quantile": args.join_quantile,
        "min_active_days": args.min_active_days,
        "threshold": args.threshold,
        "eligible_volunteers": len(ids),
    }
    out = _out_dir(args)
    tables.write_metrics_csv(out / "metrics.csv", ids, matrix, meta)
    tables.write_thresholds_csv(out / "thresholds.csv", thresholds, meta)
    tables.write_timelines_csv(out / "timelines.csv", timelines, meta)
    if args.dump_sessions:
        tables.write_sessions_csv(out / "sessions.csv", sessions, meta)

    stats: dict[str, object] = {"config": dict(meta), "n_volunteers": len(ids)}
    if len(ids) >= 2:
        stats["metrics"] = descriptive_stats(matrix)
        stats["ks_note"] = (
            "normality p-values are approximate: distribution parameters "
            "are estimated from the same sample"
        )
    tables.write_json(out / "stats.json", stats)
    tables.write_json(
        out / "parse_report.json", {"config": dict(meta), **report.to_dict()}
    )
    exclusion_counts: dict[str, int] = {}
    for reasons in excluded.values():
        for reason in reasons:
            exclusion_counts[reason] = exclusion_counts.get(reason, 0) + 1
    tables.write_json(
        out / "exclusions.json",
        {
            "config": dict(meta),
            "eligible": len(ids),
            "excluded": {vid: sorted(excluded[vid]) for vid in sorted(excluded)},
            "counts": exclusion_counts,
        },
    )

    print(f"eligible volunteers: {len(ids)}")
    print(f"excluded volunteers: {len(excluded)}")
    print(f"window: {window.start} .. {window.end} (cutoff {window.eligibility_cutoff})")
    print(f"outputs written to {out}")
    return 0


def cmd_scan_k(args) -> int:
    if not 2 <= args.k_min <= args.k_max:
        raise ConfigError(
            f"need 2 <= --k-min <= --k-max, got {args.k_min}..{args.k_max}"
        )
    ids, matrix = tables.read_metrics_csv(args.metrics)
    normalized, _ = range_normalize(matrix)
    report = scan_k(
        normalized,
        k_range=(args.k_min, args.k_max),
        seed=args.seed,
        hier_cap=args.hier_cap,
    )

    meta = {
        "command": "scan-k",
        "input": args.metrics,
        "k_min": args.k_min,
        "k_max": args.k_max,
        "seed": args.seed,
        "hier_cap": args.hier_cap,
        "n_volunteers": len(ids),
    }
    out = _out_dir(args)
    tables.write_kscan_csv(out / "kscan.csv", report, meta)

    print("k,wss,avg_silhouette")
    for entry in report.entries:
        print(f"{entry.k},{entry.wss!r},{entry.avg_silhouette!r}")
    print(
        f"suggested k: {report.suggested_k} "
        f"({report.interpretation} structure); wss elbow at k={report.elbow_k}"
    )
    return 0


def cmd_analyze(args) -> int:
    ids, matrix = tables.read_metrics_csv(args.metrics)
    timelines_path = (
        Path(args.timelines)
        if args.timelines
        else Path(args.metrics).parent / "timelines.csv"
    )
    if not timelines_path.exists():
        raise DataError(
            f"timelines table not found at {timelines_path}; pass --timelines "
            "(it is written by the metrics command)"
        )
    timelines = tables.read_timelines_csv(timelines_path)
    missing = [volunteer_id for volunteer_id in ids if volunteer_id not in timelines]
    if missing:
        raise DataError(
            f"{len(missing)} volunteers absent from {timelines_path} "
            f"(first: {missing[0]!r})"
        )

    normalized, params = range_normalize(matrix)
    hierarchy = hierarchical_cluster(normalized, cap=args.hier_cap, seed=args.seed)
    fit = seeded_kmeans(normalized, hierarchy, args.k, seed=args.seed)
    silhouette_value, interpretation = avg_silhouette(normalized, fit.labels)
    clustering = ClusteringResult(
        k=args.k,
        assignments={vid: int(label) for vid, label in zip(ids, fit.labels)},
        centroids_normalized=fit.centroids,
        centroids_raw=denormalize(fit.centroids, params),
        wss=fit.wss,
        avg_silhouette=silhouette_value,
        interpretation=interpretation,
        iterations=fit.iterations,
        seed=args.seed,
    )
    labeling = label_profiles(fit.centroids)
    report = profile_report(clustering, labeling, ids, matrix, timelines)
    importance = importance_table(clustering.assignments, labeling, timelines)

    meta = {
        "command": "analyze",
        "input": args.metrics,
        "timelines": str(timelines_path),
        "k": args.k,
        "seed": args.seed,
        "hier_cap": args.hier_cap,
        "n_volunteers": len(ids),
    }
    out = _out_dir(args)
    tables.write_assignments_csv(out / "assignments.csv", clustering.assignments, meta)
    tables.write_json(
        out / "clustering.json",
        {
            "config": dict(meta),
            "k": clustering.k,
            "seed": clustering.seed,
            "wss": clustering.wss,
            "avg_silhouette": clustering.avg_silhouette,
            "interpretation": clustering.interpretation,
            "iterations": clustering.iterations,
            "converged": fit.converged,
            "normalization": {
                "x_min": list(params.x_min),
                "x_max": list(params.x_max),
            },
            "centroids_normalized": [
                [float(value) for value in row] for row in fit.centroids
            ],
            "centroids_raw": [
                [float(value) for value in row] for row in clustering.centroids_raw
            ],
            "labels": {
                str(index): labeling.labels[index] for index in range(args.k)
            },
            "rules": {
                str(index): labeling.rules[index] for index in range(args.k)
            },
        },
    )
    tables.write_json(out / "profile_report.json", {"config": dict(meta), **report})
    tables.write_profiles_csv(
        out / "profiles.csv",
        importance,
        {labeling.labels[i]: labeling.rules[i] for i in range(args.k)},
        meta,
    )

    print(
        f"k={clustering.k} wss={clustering.wss!r} "
        f"avg_silhouette={clustering.avg_silhouette!r} ({interpretation} structure)"
    )
    for row in importance:
        print(
            f"{row.label}: {row.volunteer_count} volunteers "
            f"({row.volunteer_share_pct:.2f}%), "
            f"{row.devoted_hours:.2f} devoted hours ({row.devoted_share_pct:.2f}%)"
        )
    print(f"outputs written to {out}")
    return 0


def cmd_synth(args) -> int:
    spec_path = Path(args.spec)
    try:
        document = json.loads(spec_path.read_text(encoding="utf-8"))
    except OSError as error:
        raise DataError(f"{spec_path}: cannot read spec ({error})") from error
    except json.JSONDecodeError as error:
        raise ConfigError(f"{spec_path}: invalid JSON ({error})") from error
    if args.seed is not None:
        if not isinstance(document, dict):
            raise ConfigError(f"{spec_path}: top level must be a JSON object")
        document["seed"] = args.seed
    spec = CorpusSpec.from_json(document)
    result = generate_corpus(spec)

    out = _out_dir(args)
    tables.write_lines(out / "corpus.csv", result.log_lines())
    tables.write_lines(out / "truth.csv", result.truth_lines())
    tables.write_json(
        out / "manifest.json",
        {
            "spec": spec.to_json(),
            "volunteers": len(result.truth),
            "events": len(result.events),
            "per_archetype": {
                archetype.name: archetype.count for archetype in spec.archetypes
            },
        },
    )
    print(f"generated {len(result.truth)} volunteers, {len(result.events)} events")
    print(f"outputs written to {out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(
        prog="volprof",
        description=(
            "Volunteer engagement profiles from task-execution logs: "
            "session reconstruction, engagement metrics, seeded clustering, "
            "profile labeling, and a synthetic corpus generator."
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)

    validate = commands.add_parser(
        "validate", help="parse a log and print its parse report"
    )
    validate.add_argument("log", help="task-execution log (CSV or TSV)")
    validate.set_defaults(func=cmd_validate)

    metrics = commands.add_parser(
        "metrics", help="sessions + engagement metrics from a log"
    )
    metrics.add_argument("log", help="task-execution log (CSV or TSV)")
    metrics.add_argument("--start", help="window start override (YYYY-MM-DD)")
    metrics.add_argument("--end", help="window end override (YYYY-MM-DD)")
    metrics.add_argument(
        "--join-quantile",
        type=float,
        default=0.75,
        help="late-join cutoff as a fraction of the window (default 0.75)",
    )
    metrics.add_argument(
        "--min-active-days",
        type=int,
        default=2,
        help="minimum distinct active days for eligibility (default 2)",
    )
    metrics.add_argument(
        "--threshold",
        default="auto",
        help="session gap threshold: auto (per-volunteer detection) or "
        "fixed:<duration>[s|m|h] (default auto)",
    )
    metrics.add_argument(
        "--workers",
        type=int,
        default=1,
        help="worker threads for the session stage (default 1; output "
        "is identical regardless)",
    )
    metrics.add_argument(
        "--dump-sessions",
        action="store_true",
        help="also write the per-session table (sessions.csv)",
    )
    metrics.add_argument("--out-dir", default=".", help="output directory")
    metrics.set_defaults(func=cmd_metrics)

    scan = commands.add_parser(
        "scan-k", help="score a k range on an existing metrics table"
    )
    scan.add_argument("metrics", help="metrics.csv from the metrics command")
    scan.add_argument("--k-min", type=int, default=2, help="smallest k (default 2)")
    scan.add_argument("--k-max", type=int, default=10, help="largest k (default 10)")
    scan.add_argument(
        "--seed", type=int, default=0, help="seed for capped subsampling (default 0)"
    )
    scan.add_argument(
        "--hier-cap",
        type=int,
        default=DEFAULT_HIER_CAP,
        help="max rows clustered hierarchically before subsampling "
        f"(default {DEFAULT_HIER_CAP})",
    )
    scan.add_argument("--out-dir", default=".", help="output directory")
    scan.set_defaults(func=cmd_scan_k)

    analyze = commands.add_parser(
        "analyze", help="cluster at a fixed k, label profiles, report"
    )
    analyze.add_argument("metrics", help="metrics.csv from the metrics command")
    analyze.add_argument("--k", type=int, required=True, help="number of clusters")
    analyze.add_argument("--seed", type=int, required=True, help="run seed")
    analyze.add_argument(
        "--timelines",
        help="timelines.csv path (default: next to the metrics table)",
    )
    analyze.add_argument(
        "--hier-cap",
        type=int,
        default=DEFAULT_HIER_CAP,
        help="max rows clustered hierarchically before subsampling "
        f"(default {DEFAULT_HIER_CAP})",
    )
    analyze.add_argument("--out-dir", default=".", help="output directory")
    analyze.set_defaults(func=cmd_analyze)

    synth = commands.add_parser(
        "synth", help="generate a synthetic corpus with ground truth"
    )
    synth.add_argument("spec", help="corpus spec JSON")
    synth.add_argument(
        "--seed", type=int, default=None, help="overrides the seed in the spec"
    )
    synth.add_argument("--out-dir", default=".", help="output directory")
    synth.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as error:
        print(f"error: {error}", file=sys.stderr)
        return 1
    except DataError as error:
        print(f"error: {error}", file=sys.stderr)
        return 2
    except InvariantError as error:
        print(f"internal error: {error}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
