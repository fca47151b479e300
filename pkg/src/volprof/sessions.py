"""Working-session reconstruction and per-volunteer timeline derivation.

Sessions are maximal runs of task executions whose inter-event gaps stay at
or below a per-volunteer threshold. The threshold is detected from the
volunteer's own gap distribution (valley between the short-gap and long-gap
modes of a log-scale histogram) and clamped to [5 min, 12 h], falling back to
30 min when the distribution is too small or unimodal.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date, datetime
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, InvariantError
from .ingest import ProjectWindow, TaskEvent

THRESHOLD_FLOOR_SECONDS = 300.0
THRESHOLD_CEIL_SECONDS = 43_200.0
FALLBACK_THRESHOLD_SECONDS = 1_800.0
MIN_GAPS_FOR_DETECTION = 30
LOG_BIN_WIDTH = 0.1
SMOOTHING_WINDOW = 3
SECONDARY_PEAK_RATIO = 0.25
DEFAULT_PAD_SECONDS = 30.0

SOURCE_DETECTED = "detected"
SOURCE_FALLBACK = "fallback"
SOURCE_FIXED = "fixed"


@dataclass(frozen=True)
class GapThreshold:
    """Per-volunteer session boundary, in seconds, and how it was obtained."""

    volunteer_id: str
    threshold_seconds: float
    source: str


@dataclass(frozen=True)
class Session:
    """One working session. ``duration_hours`` includes the padding quantum."""

    volunteer_id: str
    start: datetime
    end: datetime
    event_count: int
    duration_hours: float


@dataclass(frozen=True)
class VolunteerTimeline:
    """Derived per-volunteer quantities feeding the engagement metrics.

    ``active_days`` are the distinct UTC dates with at least one task
    execution; ``daily_hours`` aligns with them; ``day_gaps`` are the day
    counts between consecutive active days; ``window_days`` counts join date
    through project end, inclusive.
    """

    volunteer_id: str
    join_date: date
    window_days: int
    active_days: tuple[date, ...]
    daily_hours: tuple[float, ...]
    day_gaps: tuple[int, ...]
    midnight_spillover_days: int = 0

    @property
    def span_days(self) -> int:
        """First to last active day, inclusive."""
        return (self.active_days[-1] - self.active_days[0]).days + 1

    @property
    def total_devoted_hours(self) -> float:
        return float(sum(self.daily_hours))


def compute_gaps(events: Sequence[TaskEvent]) -> list[float]:
    """Positive inter-event gaps in seconds, for threshold detection.

    Same-second executions produce zero gaps, which carry no information
    about session boundaries and are excluded here (the events themselves
    still join sessions normally).
    """
    gaps = []
    for previous, current in zip(events, events[1:]):
        seconds = (current.timestamp - previous.timestamp).total_seconds()
        if seconds < 0:
            raise DataError(
                f"events for {current.volunteer_id!r} are not time-sorted"
            )
        if seconds > 0:
            gaps.append(seconds)
    return gaps


def _local_maxima(values: np.ndarray) -> list[int]:
    maxima = []
    for index in range(len(values)):
        left = values[index - 1] if index > 0 else -np.inf
        right = values[index + 1] if index + 1 < len(values) else -np.inf
        if values[index] >= left and values[index] >= right:
            maxima.append(index)
    return maxima


def detect_session_threshold(
    gaps: Iterable[float], volunteer_id: str = ""
) -> GapThreshold:
    """Find the gap duration separating intra-session from inter-session gaps.

    Histogram of log10(gap seconds) at 0.1 bin width, smoothed by a centered
    3-bin moving average. The threshold is the deepest local minimum between
    the global-maximum bin and a later peak reaching at least 25% of that
    maximum. Fewer than 30 gaps, or no qualifying valley, yields the 30-min
    fallback.
    """
    positive = [gap for gap in gaps if gap > 0]
    if len(positive) < MIN_GAPS_FOR_DETECTION:
        return GapThreshold(volunteer_id, FALLBACK_THRESHOLD_SECONDS, SOURCE_FALLBACK)

    log_gaps = np.log10(np.asarray(positive, dtype=float))
    bin_indices = np.floor(log_gaps / LOG_BIN_WIDTH).astype(int)
    low = int(bin_indices.min())
    counts = np.bincount(bin_indices - low).astype(float)
    if len(counts) < SMOOTHING_WINDOW:
        # a histogram this narrow cannot hold a peak-valley-peak shape (and
        # np.convolve in "same" mode would pad it out to the kernel length)
        return GapThreshold(volunteer_id, FALLBACK_THRESHOLD_SECONDS, SOURCE_FALLBACK)
    smoothed = np.convolve(
        counts, np.ones(SMOOTHING_WINDOW) / SMOOTHING_WINDOW, mode="same"
    )

    peak = int(np.argmax(smoothed))
    peak_height = smoothed[peak]
    later_peaks = [
        index
        for index in _local_maxima(smoothed)
        if index > peak and smoothed[index] >= SECONDARY_PEAK_RATIO * peak_height
    ]
    if not later_peaks or later_peaks[-1] < peak + 2:
        return GapThreshold(volunteer_id, FALLBACK_THRESHOLD_SECONDS, SOURCE_FALLBACK)

    valley_region = smoothed[peak + 1 : later_peaks[-1]]
    valley = peak + 1 + int(np.argmin(valley_region))
    center = (low + valley + 0.5) * LOG_BIN_WIDTH
    threshold = min(max(10.0**center, THRESHOLD_FLOOR_SECONDS), THRESHOLD_CEIL_SECONDS)
    return GapThreshold(volunteer_id, threshold, SOURCE_DETECTED)


def split_sessions(
    events: Sequence[TaskEvent], threshold_seconds: float
) -> list[list[TaskEvent]]:
    """Partition time-sorted events into session runs at gaps > threshold."""
    if not events:
        return []
    runs: list[list[TaskEvent]] = [[events[0]]]
    for previous, current in zip(events, events[1:]):
        seconds = (current.timestamp - previous.timestamp).total_seconds()
        if seconds < 0:
            raise DataError(
                f"events for {current.volunteer_id!r} are not time-sorted"
            )
        if seconds <= threshold_seconds:
            runs[-1].append(current)
        else:
            runs.append([current])
    return runs


def intra_session_gaps(
    events: Sequence[TaskEvent], threshold_seconds: float
) -> list[float]:
    """Positive gaps that fall within sessions (gap <= threshold)."""
    return [
        gap for gap in compute_gaps(events) if gap <= threshold_seconds
    ]


def build_sessions(
    events: Sequence[TaskEvent],
    threshold_seconds: float,
    pad_seconds: float = 0.0,
) -> list[Session]:
    """Build :class:`Session` records; duration = raw span + pad, in hours.

    The pad keeps single-task sessions (raw span zero) from contributing zero
    devoted time; callers supply the volunteer's median intra-session gap.
    """
    sessions = []
    for run in split_sessions(events, threshold_seconds):
        start = run[0].timestamp
        end = run[-1].timestamp
        duration = ((end - start).total_seconds() + pad_seconds) / 3600.0
        sessions.append(
            Session(
                volunteer_id=run[0].volunteer_id,
                start=start,
                end=end,
                event_count=len(run),
                duration_hours=duration,
            )
        )
    return sessions


def build_timeline(
    events: Sequence[TaskEvent],
    sessions: Sequence[Session],
    window: ProjectWindow,
    pad_seconds: float = DEFAULT_PAD_SECONDS,
) -> VolunteerTimeline:
    """Derive the volunteer's timeline from their events and sessions.

    Active days come from raw event dates. Each session's devoted time is
    attributed wholly to the session's start date; an active day that only
    continues a session begun the previous day (midnight spillover) receives
    the pad quantum so every active day keeps positive devoted time. Daily
    totals are clamped to 24 h.
    """
    if not sessions or not events:
        raise DataError("timeline requires at least one session")

    active_days = sorted({event.event_date for event in events})
    if active_days[-1] > window.end:
        raise DataError(
            f"volunteer {events[0].volunteer_id!r} has activity on "
            f"{active_days[-1]}, after the window end {window.end}"
        )

    per_day: dict[date, float] = {}
    for session in sessions:
        day = session.start.date()
        per_day[day] = per_day.get(day, 0.0) + session.duration_hours

    spillover = 0
    daily_hours = []
    for day in active_days:
        hours = per_day.get(day, 0.0)
        if hours == 0.0:
            hours = pad_seconds / 3600.0
            spillover += 1
        daily_hours.append(min(hours, 24.0))

    day_gaps = tuple(
        (later - earlier).days
        for earlier, later in zip(active_days, active_days[1:])
    )
    join_date = active_days[0]
    window_days = (window.end - join_date).days + 1
    span = (active_days[-1] - join_date).days + 1
    if window_days < span:
        raise InvariantError(
            f"window_days {window_days} < active span {span} for "
            f"{events[0].volunteer_id!r}"
        )
    return VolunteerTimeline(
        volunteer_id=events[0].volunteer_id,
        join_date=join_date,
        window_days=window_days,
        active_days=tuple(active_days),
        daily_hours=tuple(daily_hours),
        day_gaps=day_gaps,
        midnight_spillover_days=spillover,
    )


def _volunteer_pass_one(
    volunteer_id: str,
    events: Sequence[TaskEvent],
    fixed_threshold_seconds: float | None,
) -> tuple[GapThreshold, list[list[TaskEvent]], list[float]]:
    if fixed_threshold_seconds is not None:
        clamped = min(
            max(fixed_threshold_seconds, THRESHOLD_FLOOR_SECONDS),
            THRESHOLD_CEIL_SECONDS,
        )
        threshold = GapThreshold(volunteer_id, clamped, SOURCE_FIXED)
    else:
        threshold = detect_session_threshold(compute_gaps(events), volunteer_id)
    runs = split_sessions(events, threshold.threshold_seconds)
    intra = intra_session_gaps(events, threshold.threshold_seconds)
    return threshold, runs, intra


def build_timelines(
    events_by_volunteer: Mapping[str, Sequence[TaskEvent]],
    window: ProjectWindow,
    fixed_threshold_seconds: float | None = None,
    workers: int = 1,
) -> tuple[
    dict[str, VolunteerTimeline],
    dict[str, GapThreshold],
    dict[str, list[Session]],
]:
    """Run the full session stage for every volunteer.

    Two passes: detection + sessionization per volunteer (parallelizable),
    then timelines once the global pad fallback is known. Output is keyed and
    ordered by volunteer id, independent of worker scheduling.
    """
    ordered_ids = sorted(events_by_volunteer)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            first_pass = list(
                pool.map(
                    lambda volunteer_id: _volunteer_pass_one(
                        volunteer_id,
                        events_by_volunteer[volunteer_id],
                        fixed_threshold_seconds,
                    ),
                    ordered_ids,
                )
            )
    else:
        first_pass = [
            _volunteer_pass_one(
                volunteer_id, events_by_volunteer[volunteer_id], fixed_threshold_seconds
            )
            for volunteer_id in ordered_ids
        ]

    pooled_intra: list[float] = []
    for _, _, intra in first_pass:
        pooled_intra.extend(intra)
    global_pad = statistics.median(pooled_intra) if pooled_intra else DEFAULT_PAD_SECONDS

    timelines: dict[str, VolunteerTimeline] = {}
    thresholds: dict[str, GapThreshold] = {}
    sessions_by_volunteer: dict[str, list[Session]] = {}
    for volunteer_id, (threshold, runs, intra) in zip(ordered_ids, first_pass):
        pad = statistics.median(intra) if intra else global_pad
        sessions = []
        for run in runs:
            start, end = run[0].timestamp, run[-1].timestamp
            duration = ((end - start).total_seconds() + pad) / 3600.0
            sessions.append(
                Session(volunteer_id, start, end, len(run), duration)
            )
        events = events_by_volunteer[volunteer_id]
        timelines[volunteer_id] = build_timeline(events, sessions, window, pad)
        thresholds[volunteer_id] = threshold
        sessions_by_volunteer[volunteer_id] = sessions
    return timelines, thresholds, sessions_by_volunteer
