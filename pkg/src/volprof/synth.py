"""Seeded synthetic task-execution logs with exact planted ground truth.

Archetypes are parameterized directly in metric space: target activity ratio
and relative activity duration are realized constructively (active days are
placed, not estimated), so the generator's bookkeeping is the ground truth.
Gap irregularity perturbs the spacing of active days by moving whole days
between gaps, preserving the gap sum, which raises the periodicity variation
without touching the other metrics.

Intra-session gaps stay below every inter-session gap by construction:
sessions sit inside the day with half the inter-session floor as margin on
both sides, so gaps across midnight are at least the floor as well.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .ingest import TaskEvent

SECONDS_PER_DAY = 86_400
INTER_SESSION_FLOOR = 1_800.0
MODE_SEPARATION_FACTOR = 10.0**1.5
MAX_DRAW_ATTEMPTS = 100
_MAX_INTRA_GAP_UPPER = 1_200.0
_MAX_SESSION_MINUTES = 600.0


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self) -> None:
        if not self.low <= self.high:
            raise ConfigError(f"uniform bounds inverted: [{self.low}, {self.high}]")

    @property
    def upper(self) -> float:
        return self.high

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class TruncNormal:
    mean: float
    sd: float
    low: float
    high: float

    def __post_init__(self) -> None:
        if not self.low <= self.high:
            raise ConfigError(f"truncnormal bounds inverted: [{self.low}, {self.high}]")
        if self.sd < 0:
            raise ConfigError(f"truncnormal sd must be >= 0, got {self.sd}")

    @property
    def upper(self) -> float:
        return self.high

    def sample(self, rng: np.random.Generator) -> float:
        for _ in range(1000):
            value = float(rng.normal(self.mean, self.sd))
            if self.low <= value <= self.high:
                return value
        return float(min(max(self.mean, self.low), self.high))


Distribution = Uniform | TruncNormal


def _require(obj: Mapping, key: str, path: str):
    if key not in obj:
        raise ConfigError(f"{path}.{key}: missing")
    return obj[key]


def distribution_from_json(obj, path: str) -> Distribution:
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{path}: expected an object with a 'type' field")
    kind = _require(obj, "type", path)
    try:
        if kind == "uniform":
            return Uniform(float(_require(obj, "low", path)), float(_require(obj, "high", path)))
        if kind == "truncnormal":
            return TruncNormal(
                float(_require(obj, "mean", path)),
                float(_require(obj, "sd", path)),
                float(_require(obj, "low", path)),
                float(_require(obj, "high", path)),
            )
    except (TypeError, ValueError) as error:
        raise ConfigError(f"{path}: non-numeric parameter ({error})") from error
    raise ConfigError(f"{path}.type: unknown distribution {kind!r}")


def _distribution_to_json(dist: Distribution) -> dict:
    if isinstance(dist, Uniform):
        return {"type": "uniform", "low": dist.low, "high": dist.high}
    return {
        "type": "truncnormal",
        "mean": dist.mean,
        "sd": dist.sd,
        "low": dist.low,
        "high": dist.high,
    }


@dataclass(frozen=True)
class ArchetypeSpec:
    """Generation parameters for one engagement profile archetype."""

    name: str
    count: int
    join_day_range: tuple[int, int]
    target_a: Distribution
    target_r: Distribution
    sessions_per_active_day: Distribution
    session_length_minutes: Distribution
    intra_gap_seconds: Distribution
    gap_irregularity: float

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("archetype name must be non-empty")
        if self.count < 1:
            raise ConfigError(f"{self.name}: count must be >= 1, got {self.count}")
        lo, hi = self.join_day_range
        if lo < 0 or hi < lo:
            raise ConfigError(
                f"{self.name}: join_day_range [{lo}, {hi}] must satisfy 0 <= lo <= hi"
            )
        for field_name, dist in (("target_a", self.target_a), ("target_r", self.target_r)):
            bounds_low = dist.low if isinstance(dist, Uniform) else dist.low
            if bounds_low <= 0 or dist.upper > 1:
                raise ConfigError(
                    f"{self.name}.{field_name}: bounds must lie in (0, 1]"
                )
        if self.intra_gap_seconds.upper > _MAX_INTRA_GAP_UPPER:
            raise ConfigError(
                f"{self.name}.intra_gap_seconds: upper bound "
                f"{self.intra_gap_seconds.upper} exceeds {_MAX_INTRA_GAP_UPPER}; "
                "sessions would not fit inside a day with the separation margin"
            )
        if self.session_length_minutes.upper > _MAX_SESSION_MINUTES:
            raise ConfigError(
                f"{self.name}.session_length_minutes: upper bound exceeds "
                f"{_MAX_SESSION_MINUTES}"
            )
        if self.gap_irregularity < 0:
            raise ConfigError(
                f"{self.name}.gap_irregularity: must be >= 0, got {self.gap_irregularity}"
            )

    @property
    def inter_session_floor(self) -> float:
        """Minimum inter-session gap: keeps the two gap modes separated by
        at least 1.5 orders of magnitude so threshold detection has a valley."""
        return max(INTER_SESSION_FLOOR, self.intra_gap_seconds.upper * MODE_SEPARATION_FACTOR)


@dataclass(frozen=True)
class CorpusSpec:
    window_start: date
    window_end: date
    seed: int
    archetypes: tuple[ArchetypeSpec, ...]

    def __post_init__(self) -> None:
        if self.window_start > self.window_end:
            raise ConfigError(
                f"window: start {self.window_start} after end {self.window_end}"
            )
        if not self.archetypes:
            raise ConfigError("archetypes: must not be empty")
        total_days = (self.window_end - self.window_start).days + 1
        for index, archetype in enumerate(self.archetypes):
            if archetype.join_day_range[1] > total_days - 2:
                raise ConfigError(
                    f"archetypes[{index}].join_day_range: upper bound "
                    f"{archetype.join_day_range[1]} leaves fewer than 2 days "
                    f"in a {total_days}-day window"
                )

    @property
    def total_days(self) -> int:
        return (self.window_end - self.window_start).days + 1

    @classmethod
    def from_json(cls, document: str | Mapping) -> "CorpusSpec":
        obj = json.loads(document) if isinstance(document, str) else document
        if not isinstance(obj, Mapping):
            raise ConfigError("corpus spec: expected a JSON object")
        window = _require(obj, "window", "corpus")
        if not isinstance(window, Mapping):
            raise ConfigError("corpus.window: expected an object")
        try:
            start = date.fromisoformat(str(_require(window, "start", "corpus.window")))
            end = date.fromisoformat(str(_require(window, "end", "corpus.window")))
        except ValueError as error:
            raise ConfigError(f"corpus.window: bad date ({error})") from error
        seed = _require(obj, "seed", "corpus")
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError(f"corpus.seed: expected an integer, got {seed!r}")
        raw_archetypes = _require(obj, "archetypes", "corpus")
        if not isinstance(raw_archetypes, Sequence) or isinstance(raw_archetypes, str):
            raise ConfigError("corpus.archetypes: expected a list")
        archetypes = []
        for index, raw in enumerate(raw_archetypes):
            path = f"corpus.archetypes[{index}]"
            if not isinstance(raw, Mapping):
                raise ConfigError(f"{path}: expected an object")
            join_range = _require(raw, "join_day_range", path)
            if (
                not isinstance(join_range, Sequence)
                or isinstance(join_range, str)
                or len(join_range) != 2
            ):
                raise ConfigError(f"{path}.join_day_range: expected [low, high]")
            try:
                count = int(_require(raw, "count", path))
                irregularity = float(raw.get("gap_irregularity", 0.0))
            except (TypeError, ValueError) as error:
                raise ConfigError(f"{path}: non-numeric field ({error})") from error
            archetypes.append(
                ArchetypeSpec(
                    name=str(_require(raw, "name", path)),
                    count=count,
                    join_day_range=(int(join_range[0]), int(join_range[1])),
                    target_a=distribution_from_json(_require(raw, "target_a", path), f"{path}.target_a"),
                    target_r=distribution_from_json(_require(raw, "target_r", path), f"{path}.target_r"),
                    sessions_per_active_day=distribution_from_json(
                        _require(raw, "sessions_per_active_day", path),
                        f"{path}.sessions_per_active_day",
                    ),
                    session_length_minutes=distribution_from_json(
                        _require(raw, "session_length_minutes", path),
                        f"{path}.session_length_minutes",
                    ),
                    intra_gap_seconds=distribution_from_json(
                        _require(raw, "intra_gap_seconds", path),
                        f"{path}.intra_gap_seconds",
                    ),
                    gap_irregularity=irregularity,
                )
            )
        return cls(
            window_start=start, window_end=end, seed=seed, archetypes=tuple(archetypes)
        )

    def to_json(self) -> dict:
        return {
            "window": {
                "start": self.window_start.isoformat(),
                "end": self.window_end.isoformat(),
            },
            "seed": self.seed,
            "archetypes": [
                {
                    "name": archetype.name,
                    "count": archetype.count,
                    "join_day_range": list(archetype.join_day_range),
                    "target_a": _distribution_to_json(archetype.target_a),
                    "target_r": _distribution_to_json(archetype.target_r),
                    "sessions_per_active_day": _distribution_to_json(
                        archetype.sessions_per_active_day
                    ),
                    "session_length_minutes": _distribution_to_json(
                        archetype.session_length_minutes
                    ),
                    "intra_gap_seconds": _distribution_to_json(
                        archetype.intra_gap_seconds
                    ),
                    "gap_irregularity": archetype.gap_irregularity,
                }
                for archetype in self.archetypes
            ],
        }


@dataclass(frozen=True)
class VolunteerPlan:
    """Exact bookkeeping of what was generated for one volunteer."""

    volunteer_id: str
    archetype: str
    join_date: date
    window_days: int
    active_days: tuple[date, ...]
    day_gaps: tuple[int, ...]
    activity_ratio: float
    relative_activity_duration: float
    variation_in_periodicity: float
    session_spans: dict[date, tuple[int, ...]]
    intra_gaps: tuple[int, ...]
    event_count: int


@dataclass(frozen=True)
class CorpusResult:
    spec: CorpusSpec
    events: tuple[TaskEvent, ...]
    truth: dict[str, str]
    plans: dict[str, VolunteerPlan]

    def log_lines(self) -> list[str]:
        """Full log file content: metadata comments, header, shuffled rows."""
        lines = [
            "# synthetic task-execution log",
            f"# seed: {self.spec.seed}",
            f"# window: {self.spec.window_start.isoformat()}"
            f"..{self.spec.window_end.isoformat()}",
            "project_id,task_id,user_id,datetime",
        ]
        for event in self.events:
            stamp = event.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ")
            lines.append(
                f"{event.project_id},{event.task_id},{event.volunteer_id},{stamp}"
            )
        return lines

    def truth_lines(self) -> list[str]:
        lines = [f"# seed: {self.spec.seed}", "volunteer_id,archetype"]
        for volunteer_id in sorted(self.truth):
            lines.append(f"{volunteer_id},{self.truth[volunteer_id]}")
        return lines


def _sample_int(dist: Distribution, rng: np.random.Generator, minimum: int = 1) -> int:
    return max(minimum, int(round(dist.sample(rng))))


def _draw_span(archetype: ArchetypeSpec, window_days: int, rng: np.random.Generator) -> int:
    for _ in range(MAX_DRAW_ATTEMPTS):
        span = round(archetype.target_r.sample(rng) * window_days)
        if span >= 2:
            return int(span)
    raise ConfigError(
        f"{archetype.name}: target_r never produced a span >= 2 days in a "
        f"{window_days}-day window after {MAX_DRAW_ATTEMPTS} attempts"
    )


def _draw_active_count(archetype: ArchetypeSpec, span: int, rng: np.random.Generator) -> int:
    for _ in range(MAX_DRAW_ATTEMPTS):
        active = round(archetype.target_a.sample(rng) * span)
        if active >= 2:
            return int(active)
    raise ConfigError(
        f"{archetype.name}: target_a never produced >= 2 active days over a "
        f"{span}-day span after {MAX_DRAW_ATTEMPTS} attempts"
    )


def _place_active_days(
    span: int, active_count: int, irregularity: float, rng: np.random.Generator
) -> list[int]:
    """Gaps between consecutive active days: near-equal base spacing, then
    whole days moved between gaps, preserving total and keeping every gap >= 1."""
    if active_count == span:
        return [1] * (span - 1)
    step = (span - 1) / (active_count - 1)
    offsets = [math.floor(index * step + 0.5) for index in range(active_count)]
    gaps = [later - earlier for earlier, later in zip(offsets, offsets[1:])]
    if irregularity > 0 and len(gaps) > 1:
        mean_gap = (span - 1) / (active_count - 1)
        for _ in range(len(gaps)):
            donor = int(rng.integers(len(gaps)))
            receiver = int(rng.integers(len(gaps)))
            if donor == receiver:
                continue
            slack = gaps[donor] - 1
            if slack <= 0:
                continue
            amount = min(slack, int(round(rng.exponential(irregularity * mean_gap))))
            gaps[donor] -= amount
            gaps[receiver] += amount
    return gaps


def generate_volunteer(
    archetype: ArchetypeSpec,
    window_start: date,
    window_end: date,
    rng: np.random.Generator,
    volunteer_id: str,
) -> tuple[list[TaskEvent], VolunteerPlan]:
    """Construct one volunteer's events plus exact bookkeeping.

    Join day, span, and active-day count are drawn first (with redraws for
    infeasible combinations), then active days are placed to realize the
    span and count exactly: ground truth holds by construction.
    """
    total_days = (window_end - window_start).days + 1
    join_lo, join_hi = archetype.join_day_range
    join_hi = min(join_hi, total_days - 2)
    join_day = int(rng.integers(join_lo, join_hi + 1))
    window_days = total_days - join_day

    span = _draw_span(archetype, window_days, rng)
    active_count = _draw_active_count(archetype, span, rng)
    gaps = _place_active_days(span, active_count, archetype.gap_irregularity, rng)

    day_offsets = [0]
    for gap in gaps:
        day_offsets.append(day_offsets[-1] + gap)
    join_date = window_start + timedelta(days=join_day)
    active_days = tuple(join_date + timedelta(days=offset) for offset in day_offsets)

    inter_floor = archetype.inter_session_floor
    margin = inter_floor / 2.0
    day_limit = SECONDS_PER_DAY - margin
    intra_upper_int = int(archetype.intra_gap_seconds.upper)

    events: list[TaskEvent] = []
    intra_gaps: list[int] = []
    session_spans: dict[date, tuple[int, ...]] = {}
    task_counter = 0
    for day in active_days:
        midnight = datetime(day.year, day.month, day.day, tzinfo=timezone.utc)
        wanted = _sample_int(archetype.sessions_per_active_day, rng)
        position = margin
        spans_today: list[int] = []
        for session_index in range(wanted):
            length_target = archetype.session_length_minutes.sample(rng) * 60.0
            offsets_in_session = [0]
            while offsets_in_session[-1] < length_target:
                gap = min(
                    intra_upper_int,
                    max(1, int(round(archetype.intra_gap_seconds.sample(rng)))),
                )
                if position + offsets_in_session[-1] + gap > day_limit:
                    break
                offsets_in_session.append(offsets_in_session[-1] + gap)
                intra_gaps.append(gap)
            for offset in offsets_in_session:
                task_counter += 1
                stamp = midnight + timedelta(seconds=int(position) + offset)
                events.append(
                    TaskEvent(
                        project_id="synth",
                        task_id=f"{volunteer_id}-t{task_counter:06d}",
                        volunteer_id=volunteer_id,
                        timestamp=stamp,
                    )
                )
            spans_today.append(offsets_in_session[-1])
            if session_index + 1 == wanted:
                break
            position += offsets_in_session[-1]
            position += inter_floor * float(rng.uniform(1.0, 1.8))
            if position + 60.0 > day_limit:
                break
        session_spans[day] = tuple(spans_today)

    plan = VolunteerPlan(
        volunteer_id=volunteer_id,
        archetype=archetype.name,
        join_date=join_date,
        window_days=window_days,
        active_days=active_days,
        day_gaps=tuple(gaps),
        activity_ratio=active_count / span,
        relative_activity_duration=span / window_days,
        variation_in_periodicity=float(np.sqrt(np.mean((np.asarray(gaps, dtype=float) - np.mean(gaps)) ** 2)))
        if gaps
        else 0.0,
        session_spans=session_spans,
        intra_gaps=tuple(intra_gaps),
        event_count=len(events),
    )
    return events, plan


def generate_corpus(spec: CorpusSpec) -> CorpusResult:
    """Generate every archetype's volunteers and shuffle the combined rows.

    Volunteer i draws from default_rng([seed, i]), so generation order (or a
    parallel split) cannot change any volunteer's events; the row shuffle
    draws from default_rng([seed, total]).
    """
    events: list[TaskEvent] = []
    truth: dict[str, str] = {}
    plans: dict[str, VolunteerPlan] = {}
    index = 0
    for archetype in spec.archetypes:
        for _ in range(archetype.count):
            volunteer_id = f"v{index:05d}"
            rng = np.random.default_rng([spec.seed, index])
            try:
                volunteer_events, plan = generate_volunteer(
                    archetype, spec.window_start, spec.window_end, rng, volunteer_id
                )
            except ConfigError as error:
                raise ConfigError(f"volunteer {volunteer_id}: {error}") from error
            events.extend(volunteer_events)
            truth[volunteer_id] = archetype.name
            plans[volunteer_id] = plan
            index += 1

    shuffle_rng = np.random.default_rng([spec.seed, index])
    order = shuffle_rng.permutation(len(events))
    shuffled = tuple(events[position] for position in order)
    return CorpusResult(spec=spec, events=shuffled, truth=truth, plans=plans)
