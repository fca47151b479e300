"""Deterministic file formats for every pipeline artifact.

All delimited outputs start with '#' metadata comment lines recording the
config that produced them (the ingest parser skips such lines, and so do the
readers here). Floats are written with repr's shortest round-trip form, so
reading a table back reproduces the exact values and reruns are
byte-identical. No wall-clock timestamps appear anywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError
from .cluster import KScanReport
from .profiles import ImportanceRow
from .sessions import GapThreshold, Session, VolunteerTimeline

METRICS_HEADER = "volunteer_id,a,d,r,v"


@dataclass(frozen=True)
class TimelineSummary:
    """Per-volunteer timeline facts carried between pipeline stages."""

    volunteer_id: str
    join_date: date
    window_days: int
    n_active_days: int
    devoted_hours: float
    midnight_spillover_days: int

    @property
    def total_devoted_hours(self) -> float:
        return self.devoted_hours


def format_float(value: float) -> str:
    return repr(float(value))


def metadata_lines(meta: Mapping[str, object]) -> list[str]:
    return [f"# {key}: {meta[key]}" for key in meta]


def write_lines(path: str | Path, lines: Sequence[str]) -> None:
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_json(path: str | Path, obj: object) -> None:
    Path(path).write_text(
        json.dumps(obj, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
        newline="\n",
    )


def _data_lines(path: str | Path) -> list[str]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as error:
        raise DataError(f"cannot read table {str(path)!r}: {error}") from error
    content = [line for line in lines if line.strip()]
    start = 0
    while start < len(content) and content[start].lstrip().startswith("#"):
        start += 1
    if start >= len(content):
        raise DataError(f"{path}: no header line found")
    return content[start:]


def write_metrics_csv(
    path: str | Path,
    ids: Sequence[str],
    matrix: np.ndarray,
    meta: Mapping[str, object],
) -> None:
    lines = metadata_lines(meta)
    lines.append(METRICS_HEADER)
    for row_index, volunteer_id in enumerate(ids):
        row = matrix[row_index]
        lines.append(
            f"{volunteer_id},{format_float(row[0])},{format_float(row[1])},"
            f"{format_float(row[2])},{format_float(row[3])}"
        )
    write_lines(path, lines)


def read_metrics_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    lines = _data_lines(path)
    header = [name.strip() for name in lines[0].split(",")]
    if header != METRICS_HEADER.split(","):
        raise DataError(
            f"{path}: expected header {METRICS_HEADER!r}, got {lines[0]!r}"
        )
    ids: list[str] = []
    rows: list[list[float]] = []
    for line_number, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != 5:
            raise DataError(f"{path}:{line_number}: expected 5 fields")
        try:
            rows.append([float(field) for field in fields[1:]])
        except ValueError as error:
            raise DataError(f"{path}:{line_number}: non-numeric value ({error})") from error
        ids.append(fields[0])
    if not ids:
        raise DataError(f"{path}: no metric rows")
    return ids, np.asarray(rows, dtype=float)


def write_timelines_csv(
    path: str | Path,
    timelines: Mapping[str, VolunteerTimeline],
    meta: Mapping[str, object],
) -> None:
    lines = metadata_lines(meta)
    lines.append(
        "volunteer_id,join_date,window_days,n_active_days,"
        "devoted_hours,midnight_spillover_days"
    )
    for volunteer_id in sorted(timelines):
        timeline = timelines[volunteer_id]
        lines.append(
            f"{volunteer_id},{timeline.join_date.isoformat()},"
            f"{timeline.window_days},{len(timeline.active_days)},"
            f"{format_float(timeline.total_devoted_hours)},"
            f"{timeline.midnight_spillover_days}"
        )
    write_lines(path, lines)


def read_timelines_csv(path: str | Path) -> dict[str, TimelineSummary]:
    lines = _data_lines(path)
    expected = (
        "volunteer_id,join_date,window_days,n_active_days,"
        "devoted_hours,midnight_spillover_days"
    )
    if lines[0] != expected:
        raise DataError(f"{path}: unexpected header {lines[0]!r}")
    summaries: dict[str, TimelineSummary] = {}
    for line_number, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != 6:
            raise DataError(f"{path}:{line_number}: expected 6 fields")
        try:
            summaries[fields[0]] = TimelineSummary(
                volunteer_id=fields[0],
                join_date=date.fromisoformat(fields[1]),
                window_days=int(fields[2]),
                n_active_days=int(fields[3]),
                devoted_hours=float(fields[4]),
                midnight_spillover_days=int(fields[5]),
            )
        except ValueError as error:
            raise DataError(f"{path}:{line_number}: bad value ({error})") from error
    if not summaries:
        raise DataError(f"{path}: no timeline rows")
    return summaries


def write_thresholds_csv(
    path: str | Path,
    thresholds: Mapping[str, GapThreshold],
    meta: Mapping[str, object],
) -> None:
    lines = metadata_lines(meta)
    lines.append("volunteer_id,threshold_seconds,source")
    for volunteer_id in sorted(thresholds):
        threshold = thresholds[volunteer_id]
        lines.append(
            f"{volunteer_id},{format_float(threshold.threshold_seconds)},"
            f"{threshold.source}"
        )
    write_lines(path, lines)


def write_sessions_csv(
    path: str | Path,
    sessions_by_volunteer: Mapping[str, Sequence[Session]],
    meta: Mapping[str, object],
) -> None:
    lines = metadata_lines(meta)
    lines.append("volunteer_id,session_index,start,end,event_count,duration_hours")
    for volunteer_id in sorted(sessions_by_volunteer):
        for index, session in enumerate(sessions_by_volunteer[volunteer_id]):
            start = session.start.strftime("%Y-%m-%dT%H:%M:%SZ")
            end = session.end.strftime("%Y-%m-%dT%H:%M:%SZ")
            lines.append(
                f"{volunteer_id},{index},{start},{end},"
                f"{session.event_count},{format_float(session.duration_hours)}"
            )
    write_lines(path, lines)


def write_kscan_csv(
    path: str | Path, report: KScanReport, meta: Mapping[str, object]
) -> None:
    lines = metadata_lines(meta)
    lines.extend(
        metadata_lines(
            {
                "suggested_k": report.suggested_k,
                "interpretation": report.interpretation,
                "wss_elbow_k": report.elbow_k,
            }
        )
    )
    lines.append("k,wss,avg_silhouette")
    for entry in report.entries:
        lines.append(
            f"{entry.k},{format_float(entry.wss)},{format_float(entry.avg_silhouette)}"
        )
    write_lines(path, lines)


def write_assignments_csv(
    path: str | Path, assignments: Mapping[str, int], meta: Mapping[str, object]
) -> None:
    lines = metadata_lines(meta)
    lines.append("volunteer_id,cluster_id")
    for volunteer_id in sorted(assignments):
        lines.append(f"{volunteer_id},{assignments[volunteer_id]}")
    write_lines(path, lines)


def read_assignments_csv(path: str | Path) -> dict[str, int]:
    lines = _data_lines(path)
    if lines[0] != "volunteer_id,cluster_id":
        raise DataError(f"{path}: unexpected header {lines[0]!r}")
    assignments: dict[str, int] = {}
    for line_number, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != 2:
            raise DataError(f"{path}:{line_number}: expected 2 fields")
        assignments[fields[0]] = int(fields[1])
    return assignments


def write_profiles_csv(
    path: str | Path,
    rows: Sequence[ImportanceRow],
    rules: Mapping[str, str],
    meta: Mapping[str, object],
) -> None:
    """Flat spreadsheet export of the importance table, with a totals row."""
    lines = metadata_lines(meta)
    lines.append(
        "label,volunteer_count,volunteer_share_pct,"
        "devoted_hours,devoted_share_pct,rule"
    )
    total_count = 0
    total_hours = 0.0
    for row in rows:
        total_count += row.volunteer_count
        total_hours += row.devoted_hours
        rule = rules.get(row.label, "").replace(",", ";")
        lines.append(
            f"{row.label},{row.volunteer_count},"
            f"{format_float(row.volunteer_share_pct)},"
            f"{format_float(row.devoted_hours)},"
            f"{format_float(row.devoted_share_pct)},{rule}"
        )
    lines.append(
        f"total,{total_count},{format_float(100.0)},"
        f"{format_float(total_hours)},{format_float(100.0)},"
    )
    write_lines(path, lines)


def read_truth_csv(path: str | Path) -> dict[str, str]:
    lines = _data_lines(path)
    if lines[0] != "volunteer_id,archetype":
        raise DataError(f"{path}: unexpected header {lines[0]!r}")
    truth: dict[str, str] = {}
    for line in lines[1:]:
        volunteer_id, _, archetype = line.partition(",")
        truth[volunteer_id] = archetype
    return truth
