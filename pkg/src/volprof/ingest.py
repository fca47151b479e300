"""Parse, validate, and filter raw task-execution logs.

Input logs are delimited text (comma or tab, auto-detected) with a header row
naming the columns ``project_id, task_id, user_id, datetime`` in any order.
Timestamps are ISO-8601 (``2011-03-04T16:05:00Z``) or ``YYYY-MM-DD HH:MM:SS``
and are interpreted as UTC when no offset is given.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, Mapping

from .errors import ConfigError, DataError, LogFormatError

REQUIRED_COLUMNS = ("project_id", "task_id", "user_id", "datetime")

REJECT_BAD_TIMESTAMP = "bad_timestamp"
REJECT_EMPTY_FIELD = "empty_field"
REJECT_BAD_FIELD_COUNT = "bad_field_count"

EXCLUDE_MIN_ACTIVE_DAYS = "min_active_days"
EXCLUDE_LATE_JOIN = "late_join"


@dataclass(frozen=True)
class TaskEvent:
    """One task execution: who, what, when (UTC, second resolution)."""

    project_id: str
    task_id: str
    volunteer_id: str
    timestamp: datetime

    @property
    def event_date(self) -> date:
        """UTC calendar date of the execution."""
        return self.timestamp.date()


@dataclass(frozen=True)
class ProjectWindow:
    """Project lifetime and the join-date cutoff for volunteer eligibility."""

    start: date
    end: date
    eligibility_cutoff: date

    def __post_init__(self) -> None:
        if not (self.start <= self.eligibility_cutoff <= self.end):
            raise ConfigError(
                f"window requires start <= cutoff <= end, got "
                f"{self.start} / {self.eligibility_cutoff} / {self.end}"
            )

    @property
    def total_days(self) -> int:
        """Window length in days, both endpoints inclusive."""
        return (self.end - self.start).days + 1


@dataclass(frozen=True)
class EligibilityPolicy:
    """Filters separating volunteers from drive-by participants."""

    min_active_days: int = 2
    join_quantile: float = 0.75

    def __post_init__(self) -> None:
        if self.min_active_days < 2:
            raise ConfigError(
                f"min_active_days must be >= 2, got {self.min_active_days}"
            )
        if not 0.0 < self.join_quantile <= 1.0:
            raise ConfigError(
                f"join_quantile must be in (0, 1], got {self.join_quantile}"
            )


@dataclass
class ParseReport:
    """Row-level accounting for one parsed log."""

    accepted: int = 0
    rejected: int = 0
    duplicates_dropped: int = 0
    total_rows: int = 0
    reject_reasons: dict[str, int] = field(default_factory=dict)
    delimiter: str = ","
    volunteers: int = 0

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "duplicates_dropped": self.duplicates_dropped,
            "total_rows": self.total_rows,
            "reject_reasons": dict(sorted(self.reject_reasons.items())),
            "delimiter": "tab" if self.delimiter == "\t" else self.delimiter,
            "volunteers": self.volunteers,
        }


def parse_timestamp(raw: str) -> datetime:
    """Parse an ISO-8601-ish timestamp into a tz-aware UTC datetime.

    A trailing ``Z`` and a space separator are both accepted; naive values
    are assumed to be UTC already.
    """
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    moment = datetime.fromisoformat(text)
    if moment.tzinfo is None:
        return moment.replace(tzinfo=timezone.utc)
    return moment.astimezone(timezone.utc)


def _split_header(line: str) -> tuple[list[str], str]:
    delimiter = "\t" if "\t" in line else ","
    names = [part.strip().lower() for part in line.rstrip("\r\n").split(delimiter)]
    return names, delimiter


def parse_log(lines: Iterable[str]) -> tuple[dict[str, list[TaskEvent]], ParseReport]:
    """Parse a delimited task-execution log into per-volunteer event streams.

    Leading ``#`` comment lines are skipped. Well-formed rows become
    :class:`TaskEvent` objects grouped by volunteer id (groups in lexicographic
    id order, events time-sorted within each group). Malformed rows are
    rejected and tallied by reason; exact full-row duplicates are dropped and
    counted separately.

    Raises:
        LogFormatError: missing/incomplete header, or more than half of the
            data rows were rejected.
    """
    iterator = iter(lines)
    header_line = None
    for line in iterator:
        if line.startswith("#"):
            continue
        header_line = line
        break
    if header_line is None or not header_line.strip():
        raise LogFormatError("log has no header line")

    names, delimiter = _split_header(header_line)
    missing = [column for column in REQUIRED_COLUMNS if column not in names]
    if missing:
        raise LogFormatError(f"header is missing columns: {', '.join(missing)}")
    positions = {column: names.index(column) for column in REQUIRED_COLUMNS}
    width = len(names)

    report = ParseReport(delimiter=delimiter)
    groups: dict[str, list[TaskEvent]] = {}
    seen: set[tuple[str, str, str, datetime]] = set()

    def reject(reason: str) -> None:
        report.rejected += 1
        report.reject_reasons[reason] = report.reject_reasons.get(reason, 0) + 1

    for line in iterator:
        stripped = line.rstrip("\r\n")
        if not stripped:
            continue
        report.total_rows += 1
        fields = stripped.split(delimiter)
        if len(fields) != width:
            reject(REJECT_BAD_FIELD_COUNT)
            continue
        values = [fields[positions[column]].strip() for column in REQUIRED_COLUMNS]
        if any(not value for value in values):
            reject(REJECT_EMPTY_FIELD)
            continue
        project_id, task_id, volunteer_id, raw_timestamp = values
        try:
            timestamp = parse_timestamp(raw_timestamp)
        except ValueError:
            reject(REJECT_BAD_TIMESTAMP)
            continue
        key = (project_id, task_id, volunteer_id, timestamp)
        if key in seen:
            report.duplicates_dropped += 1
            continue
        seen.add(key)
        groups.setdefault(volunteer_id, []).append(
            TaskEvent(project_id, task_id, volunteer_id, timestamp)
        )
        report.accepted += 1

    if report.total_rows > 0 and report.rejected * 2 > report.total_rows:
        raise LogFormatError(
            f"{report.rejected} of {report.total_rows} rows rejected "
            f"(reasons: {report.reject_reasons}); refusing to continue"
        )

    ordered = {
        volunteer_id: sorted(events, key=lambda event: event.timestamp)
        for volunteer_id, events in sorted(groups.items())
    }
    report.volunteers = len(ordered)
    return ordered, report


def parse_log_file(path: str) -> tuple[dict[str, list[TaskEvent]], ParseReport]:
    """Parse a log from disk; see :func:`parse_log`."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return parse_log(handle)
    except OSError as error:
        raise DataError(f"cannot read log {path!r}: {error}") from error


def _iter_events(
    events: Mapping[str, list[TaskEvent]] | Iterable[TaskEvent],
) -> Iterable[TaskEvent]:
    if isinstance(events, Mapping):
        for group in events.values():
            yield from group
    else:
        yield from events


def derive_project_window(
    events: Mapping[str, list[TaskEvent]] | Iterable[TaskEvent],
    join_quantile: float = 0.75,
    start_override: date | None = None,
    end_override: date | None = None,
) -> ProjectWindow:
    """Infer the project window from the event span, or honor explicit dates.

    The eligibility cutoff sits ``floor(q * (end - start))`` days after the
    start. Overrides exist because real project lifetimes are defined by the
    project, not by whatever slice of the log happens to be on hand.
    """
    if not 0.0 < join_quantile <= 1.0:
        raise ConfigError(f"join_quantile must be in (0, 1], got {join_quantile}")

    start = start_override
    end = end_override
    if start is None or end is None:
        dates = [event.event_date for event in _iter_events(events)]
        if not dates:
            raise DataError("cannot derive a project window from zero events")
        if start is None:
            start = min(dates)
        if end is None:
            end = max(dates)
    if start > end:
        raise ConfigError(f"window start {start} is after end {end}")

    cutoff = start + timedelta(days=math.floor(join_quantile * (end - start).days))
    return ProjectWindow(start=start, end=end, eligibility_cutoff=cutoff)


def filter_participants(
    events_by_volunteer: Mapping[str, list[TaskEvent]],
    window: ProjectWindow,
    policy: EligibilityPolicy | None = None,
) -> tuple[dict[str, list[TaskEvent]], dict[str, list[str]]]:
    """Keep volunteers with enough active days who joined early enough.

    A volunteer is retained iff they were active on at least
    ``policy.min_active_days`` distinct UTC dates AND their first event falls
    on or before the window's eligibility cutoff. Returns the retained groups
    plus, per excluded volunteer, every rule that fired.
    """
    if policy is None:
        policy = EligibilityPolicy()

    eligible: dict[str, list[TaskEvent]] = {}
    excluded: dict[str, list[str]] = {}
    for volunteer_id, events in sorted(events_by_volunteer.items()):
        if not events:
            excluded[volunteer_id] = [EXCLUDE_MIN_ACTIVE_DAYS]
            continue
        active_dates = {event.event_date for event in events}
        first_date = min(active_dates)
        reasons = []
        if len(active_dates) < policy.min_active_days:
            reasons.append(EXCLUDE_MIN_ACTIVE_DAYS)
        if first_date > window.eligibility_cutoff:
            reasons.append(EXCLUDE_LATE_JOIN)
        if reasons:
            excluded[volunteer_id] = reasons
        else:
            eligible[volunteer_id] = list(events)
    return eligible, excluded
