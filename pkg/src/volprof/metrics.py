"""Engagement metrics per volunteer and corpus-level descriptive statistics.

Four quantities summarize a volunteer's timeline:

* activity ratio: share of days active within their own first-to-last span
* daily devoted time: mean hours of task work per active day
* relative activity duration: span length over days from join to project end
* variation in periodicity: spread of the day gaps between active days

Raw values keep their natural units; normalization happens in the clustering
stage.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError
from .sessions import VolunteerTimeline

METRIC_COLUMNS = ("a", "d", "r", "v")

KS_MIN_SAMPLE = 8
_KS_SERIES_TERMS = 100


def activity_ratio(timeline: VolunteerTimeline) -> float:
    """Active days over span days; 1.0 means active every day of the span."""
    if len(timeline.active_days) < 2:
        raise DataError(
            f"volunteer {timeline.volunteer_id!r} has fewer than 2 active days"
        )
    return len(timeline.active_days) / timeline.span_days


def daily_devoted_time(timeline: VolunteerTimeline) -> float:
    """Mean devoted hours per active day, in (0, 24]."""
    if not timeline.daily_hours:
        raise DataError(f"volunteer {timeline.volunteer_id!r} has no daily hours")
    return float(sum(timeline.daily_hours)) / len(timeline.daily_hours)


def relative_activity_duration(timeline: VolunteerTimeline) -> float:
    """Span days over window days; 1.0 means still active at project end."""
    if timeline.window_days < timeline.span_days:
        raise DataError(
            f"volunteer {timeline.volunteer_id!r}: window of "
            f"{timeline.window_days} days is shorter than the active span "
            f"of {timeline.span_days} days"
        )
    return timeline.span_days / timeline.window_days


def variation_in_periodicity(timeline: VolunteerTimeline) -> float:
    """Population standard deviation of the gaps between active days.

    Population (divide by n) rather than sample, so a volunteer with exactly
    two active days gets 0 instead of an undefined value.
    """
    if not timeline.day_gaps:
        raise DataError(
            f"volunteer {timeline.volunteer_id!r} has no day gaps "
            "(fewer than 2 active days)"
        )
    gaps = np.asarray(timeline.day_gaps, dtype=float)
    return float(np.sqrt(np.mean((gaps - gaps.mean()) ** 2)))


def engagement_vector(timeline: VolunteerTimeline) -> tuple[float, float, float, float]:
    return (
        activity_ratio(timeline),
        daily_devoted_time(timeline),
        relative_activity_duration(timeline),
        variation_in_periodicity(timeline),
    )


def engagement_matrix(
    timelines: Mapping[str, VolunteerTimeline],
) -> tuple[list[str], np.ndarray]:
    """Stack engagement vectors into an n x 4 matrix.

    Rows follow lexicographic volunteer id so the matrix is independent of
    input ordering; columns follow METRIC_COLUMNS.
    """
    ordered_ids = sorted(timelines)
    rows = [engagement_vector(timelines[volunteer_id]) for volunteer_id in ordered_ids]
    matrix = np.asarray(rows, dtype=float).reshape(len(ordered_ids), 4)
    return ordered_ids, matrix


def ks_normality(sample: Sequence[float]) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov distance from a fitted normal.

    D is the sup distance between the empirical CDF and the normal CDF with
    the sample's own mean and sd. The p-value uses the asymptotic Kolmogorov
    distribution with the finite-sample correction
    lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) * D. Because the parameters are
    estimated from the same sample, the p-value is approximate (conservative).
    A constant sample is maximally non-normal by convention: (1, 0).
    """
    values = np.asarray(sorted(sample), dtype=float)
    n = len(values)
    if n < KS_MIN_SAMPLE:
        raise DataError(f"normality check needs at least {KS_MIN_SAMPLE} values, got {n}")
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    if sd == 0.0:
        return 1.0, 0.0

    z = (values - mean) / sd
    cdf = np.array([0.5 * (1.0 + math.erf(value / math.sqrt(2.0))) for value in z])
    steps = np.arange(1, n + 1) / n
    statistic = float(
        max(np.max(steps - cdf), np.max(cdf - (steps - 1.0 / n)))
    )

    lam = (math.sqrt(n) + 0.12 + 0.11 / math.sqrt(n)) * statistic
    total = 0.0
    for term in range(1, _KS_SERIES_TERMS + 1):
        total += (-1.0) ** (term - 1) * math.exp(-2.0 * term * term * lam * lam)
    p_value = min(max(2.0 * total, 0.0), 1.0)
    return statistic, p_value


def descriptive_stats(
    matrix: np.ndarray, columns: Sequence[str] = METRIC_COLUMNS
) -> dict[str, dict[str, float]]:
    """Per-column mean, sample sd, min, max, median, and normality check.

    The KS entries are omitted for corpora smaller than the normality check's
    minimum sample size.
    """
    data = np.asarray(matrix, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise DataError("descriptive statistics need a matrix with at least 2 rows")
    if data.shape[1] != len(columns):
        raise DataError(
            f"matrix has {data.shape[1]} columns but {len(columns)} names given"
        )
    stats: dict[str, dict[str, float]] = {}
    for index, name in enumerate(columns):
        column = data[:, index]
        entry = {
            "mean": float(column.mean()),
            "sd": float(column.std(ddof=1)),
            "min": float(column.min()),
            "max": float(column.max()),
            "median": float(np.median(column)),
        }
        if len(column) >= KS_MIN_SAMPLE:
            statistic, p_value = ks_normality(column)
            entry["ks_statistic"] = statistic
            entry["ks_p_value"] = p_value
        stats[name] = entry
    return stats
