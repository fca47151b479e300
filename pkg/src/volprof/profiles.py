"""Profile labeling, per-profile correlation structure, and importance shares.

With five clusters, ordinal rules on the normalized centroids assign the five
named engagement profiles; any other k gets generic labels. Correlations are
Spearman's rank coefficient between metric pairs within each profile, and the
importance table accounts for each profile's share of volunteers and of total
devoted hours.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as _scipy_stats

from .errors import DataError
from .cluster import ClusteringResult
from .sessions import VolunteerTimeline

PROFILE_HARDWORKING = "hardworking"
PROFILE_SPASMODIC = "spasmodic"
PROFILE_PERSISTENT = "persistent"
PROFILE_LASTING = "lasting"
PROFILE_MODERATE = "moderate"
NAMED_PROFILE_ORDER = (
    PROFILE_HARDWORKING,
    PROFILE_SPASMODIC,
    PROFILE_PERSISTENT,
    PROFILE_LASTING,
    PROFILE_MODERATE,
)

METRIC_PAIRS = (
    ("a", "r"),
    ("a", "v"),
    ("a", "d"),
    ("r", "v"),
    ("r", "d"),
    ("v", "d"),
)
_COLUMN_INDEX = {"a": 0, "d": 1, "r": 2, "v": 3}

SIGNIFICANCE_LEVEL = 0.05
EXACT_PERMUTATION_MAX_N = 12
_PERMUTATION_BATCH = 10_000


@dataclass(frozen=True)
class ProfileLabeling:
    """Label and audit rule per cluster index."""

    labels: tuple[str, ...]
    rules: tuple[str, ...]

    @property
    def named(self) -> bool:
        return set(self.labels) == set(NAMED_PROFILE_ORDER)


@dataclass(frozen=True)
class CorrelationEntry:
    pair: tuple[str, str]
    rho: float | None
    p_value: float | None
    significant: bool
    strength: str | None
    note: str = ""


@dataclass(frozen=True)
class ImportanceRow:
    label: str
    volunteer_count: int
    volunteer_share_pct: float
    devoted_hours: float
    devoted_share_pct: float


def correlation_strength(rho: float) -> str:
    """Conventional verbal band for |rho|."""
    magnitude = abs(rho)
    if magnitude < 0.2:
        return "very weak"
    if magnitude < 0.4:
        return "weak"
    if magnitude < 0.6:
        return "moderate"
    if magnitude < 0.8:
        return "strong"
    return "very strong"


def _summary(centroid: np.ndarray) -> str:
    return (
        f"a={centroid[0]:.3f} d={centroid[1]:.3f} "
        f"r={centroid[2]:.3f} v={centroid[3]:.3f}"
    )


def _argmax_with_tie(values: Sequence[tuple[int, float]]) -> tuple[int, bool]:
    """Index holding the max value; flag says whether a tie was broken."""
    best_index, best_value = values[0]
    tied = False
    for index, value in values[1:]:
        if value > best_value:
            best_index, best_value = index, value
            tied = False
        elif value == best_value:
            tied = True
    return best_index, tied


def label_profiles(centroids_normalized: np.ndarray) -> ProfileLabeling:
    """Assign profile names to clusters from their normalized centroids.

    Five clusters get the named profiles through an ordinal rule sequence:
    persistent takes the largest relative activity duration; hardworking the
    largest activity ratio among the rest; moderate is the remaining centroid
    nearest the mean of the remaining three; of the final pair the higher
    activity ratio is spasmodic and the other lasting. All ties break toward
    the lower cluster index and are noted in the audit rule. Any other k
    yields generic labels with a metric summary.
    """
    centroids = np.asarray(centroids_normalized, dtype=float)
    k = len(centroids)
    if k != 5:
        labels = tuple(f"cluster-{index}" for index in range(k))
        rules = tuple(
            f"generic (k={k}): {_summary(centroids[index])}" for index in range(k)
        )
        return ProfileLabeling(labels=labels, rules=rules)

    labels: dict[int, str] = {}
    rules: dict[int, str] = {}

    def tie_note(tied: bool) -> str:
        return "; tie broken toward lower cluster index" if tied else ""

    remaining = list(range(5))
    persistent, tied = _argmax_with_tie(
        [(index, centroids[index, _COLUMN_INDEX["r"]]) for index in remaining]
    )
    labels[persistent] = PROFILE_PERSISTENT
    rules[persistent] = (
        "largest relative activity duration "
        f"(r={centroids[persistent, 2]:.3f}){tie_note(tied)}"
    )
    remaining.remove(persistent)

    hardworking, tied = _argmax_with_tie(
        [(index, centroids[index, _COLUMN_INDEX["a"]]) for index in remaining]
    )
    labels[hardworking] = PROFILE_HARDWORKING
    rules[hardworking] = (
        "largest activity ratio among remaining "
        f"(a={centroids[hardworking, 0]:.3f}){tie_note(tied)}"
    )
    remaining.remove(hardworking)

    center = centroids[remaining].mean(axis=0)
    moderate, tied = _argmax_with_tie(
        [
            (index, -float(np.sum((centroids[index] - center) ** 2)))
            for index in remaining
        ]
    )
    labels[moderate] = PROFILE_MODERATE
    rules[moderate] = (
        "nearest to the mean of the remaining centroids "
        f"({_summary(centroids[moderate])}){tie_note(tied)}"
    )
    remaining.remove(moderate)

    spasmodic, tied = _argmax_with_tie(
        [(index, centroids[index, _COLUMN_INDEX["a"]]) for index in remaining]
    )
    labels[spasmodic] = PROFILE_SPASMODIC
    rules[spasmodic] = (
        "higher activity ratio of the final pair "
        f"(a={centroids[spasmodic, 0]:.3f}){tie_note(tied)}"
    )
    remaining.remove(spasmodic)

    lasting = remaining[0]
    labels[lasting] = PROFILE_LASTING
    rules[lasting] = (
        "remaining centroid of the final pair "
        f"(r={centroids[lasting, 2]:.3f}, v={centroids[lasting, 3]:.3f})"
    )

    return ProfileLabeling(
        labels=tuple(labels[index] for index in range(5)),
        rules=tuple(rules[index] for index in range(5)),
    )


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank positions."""
    data = np.asarray(values, dtype=float)
    order = np.argsort(data, kind="stable")
    ranks = np.empty(len(data))
    start = 0
    while start < len(data):
        stop = start
        while stop + 1 < len(data) and data[order[stop + 1]] == data[order[start]]:
            stop += 1
        ranks[order[start : stop + 1]] = (start + stop + 2) / 2.0
        start = stop + 1
    return ranks


def _rank_correlation(rank_x: np.ndarray, rank_y: np.ndarray) -> float:
    dx = rank_x - rank_x.mean()
    dy = rank_y - rank_y.mean()
    denominator = math.sqrt(float(np.sum(dx * dx)) * float(np.sum(dy * dy)))
    return float(np.clip(float(np.sum(dx * dy)) / denominator, -1.0, 1.0))


def _exact_permutation_p(rank_x: np.ndarray, rank_y: np.ndarray, observed: float) -> float:
    """Two-sided p over all permutations of y's ranks."""
    n = len(rank_x)
    dx = rank_x - rank_x.mean()
    sum_dx2 = float(np.sum(dx * dx))
    dy = rank_y - rank_y.mean()
    sum_dy2 = float(np.sum(dy * dy))
    denominator = math.sqrt(sum_dx2 * sum_dy2)
    threshold = abs(observed) * denominator - 1e-12

    total = 0
    hits = 0
    permutations = itertools.permutations(rank_y)
    while True:
        batch = list(itertools.islice(permutations, _PERMUTATION_BATCH))
        if not batch:
            break
        covariances = np.abs((np.asarray(batch) - rank_y.mean()) @ dx)
        hits += int(np.sum(covariances >= threshold))
        total += len(batch)
    return hits / total


def spearman(
    x: Sequence[float],
    y: Sequence[float],
    pair: tuple[str, str] = ("x", "y"),
    exact_permutation: bool = False,
) -> CorrelationEntry:
    """Spearman rank correlation with a two-sided significance test.

    Ties get average ranks; rho is the Pearson correlation of the rank
    vectors. The p-value comes from the t approximation
    t = rho * sqrt((n-2)/(1-rho^2)) with n-2 degrees of freedom, or from the
    full permutation distribution when ``exact_permutation`` is set (only
    allowed for n < 12; factorially expensive). Fewer than 5 observations
    leave the p-value unavailable; zero variance in either input leaves rho
    undefined.
    """
    x_values = np.asarray(x, dtype=float)
    y_values = np.asarray(y, dtype=float)
    if len(x_values) != len(y_values):
        raise DataError(
            f"samples differ in length: {len(x_values)} vs {len(y_values)}"
        )
    n = len(x_values)
    if n < 2 or np.all(x_values == x_values[0]) or np.all(y_values == y_values[0]):
        return CorrelationEntry(
            pair=pair,
            rho=None,
            p_value=None,
            significant=False,
            strength=None,
            note="undefined: zero variance",
        )

    rank_x = average_ranks(x_values)
    rank_y = average_ranks(y_values)
    rho = _rank_correlation(rank_x, rank_y)

    if n < 5:
        return CorrelationEntry(
            pair=pair,
            rho=rho,
            p_value=None,
            significant=False,
            strength=correlation_strength(rho),
            note="p unavailable: n < 5",
        )

    if exact_permutation:
        if n >= EXACT_PERMUTATION_MAX_N:
            raise DataError(
                f"exact permutation test limited to n < {EXACT_PERMUTATION_MAX_N}, "
                f"got n={n}"
            )
        p_value = _exact_permutation_p(rank_x, rank_y, rho)
        note = "exact permutation p"
    elif abs(rho) >= 1.0:
        p_value = 0.0
        note = ""
    else:
        t_statistic = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p_value = float(2.0 * _scipy_stats.t.sf(abs(t_statistic), n - 2))
        note = ""

    return CorrelationEntry(
        pair=pair,
        rho=rho,
        p_value=p_value,
        significant=p_value < SIGNIFICANCE_LEVEL,
        strength=correlation_strength(rho),
        note=note,
    )


def profile_order(labeling: ProfileLabeling) -> list[int]:
    """Cluster indices in reporting order: named profile order when k = 5,
    ascending cluster index otherwise."""
    if labeling.named:
        by_label = {label: index for index, label in enumerate(labeling.labels)}
        return [by_label[label] for label in NAMED_PROFILE_ORDER]
    return list(range(len(labeling.labels)))


def profile_correlations(
    ids: Sequence[str],
    matrix_raw: np.ndarray,
    assignments: Mapping[str, int],
    labeling: ProfileLabeling,
) -> dict[str, tuple[CorrelationEntry, ...]]:
    """Six metric-pair Spearman entries per profile, on raw metric values.

    Rank correlation is invariant under the monotone normalization map, so
    raw versus normalized input is immaterial; raw keeps reported values in
    natural units.
    """
    data = np.asarray(matrix_raw, dtype=float)
    rows_by_cluster: dict[int, list[int]] = {}
    for row, volunteer_id in enumerate(ids):
        rows_by_cluster.setdefault(assignments[volunteer_id], []).append(row)

    result: dict[str, tuple[CorrelationEntry, ...]] = {}
    for cluster_index in profile_order(labeling):
        rows = rows_by_cluster.get(cluster_index, [])
        block = data[rows]
        entries = tuple(
            spearman(
                block[:, _COLUMN_INDEX[first]],
                block[:, _COLUMN_INDEX[second]],
                pair=(first, second),
            )
            for first, second in METRIC_PAIRS
        )
        result[labeling.labels[cluster_index]] = entries
    return result


def importance_table(
    assignments: Mapping[str, int],
    labeling: ProfileLabeling,
    timelines: Mapping[str, VolunteerTimeline],
) -> list[ImportanceRow]:
    """Volunteer-count and devoted-time shares per profile, in percent.

    Each share column sums to 100 up to float rounding.
    """
    counts: dict[int, int] = {}
    hours: dict[int, float] = {}
    total_hours = 0.0
    for volunteer_id, cluster_index in assignments.items():
        devoted = timelines[volunteer_id].total_devoted_hours
        counts[cluster_index] = counts.get(cluster_index, 0) + 1
        hours[cluster_index] = hours.get(cluster_index, 0.0) + devoted
        total_hours += devoted
    total_count = sum(counts.values())
    if total_count == 0:
        raise DataError("importance table needs at least one assignment")

    rows = []
    for cluster_index in profile_order(labeling):
        count = counts.get(cluster_index, 0)
        devoted = hours.get(cluster_index, 0.0)
        rows.append(
            ImportanceRow(
                label=labeling.labels[cluster_index],
                volunteer_count=count,
                volunteer_share_pct=100.0 * count / total_count,
                devoted_hours=devoted,
                devoted_share_pct=(
                    100.0 * devoted / total_hours if total_hours > 0 else 0.0
                ),
            )
        )
    return rows


def _correlation_entry_dict(entry: CorrelationEntry) -> dict:
    return {
        "pair": f"{entry.pair[0]},{entry.pair[1]}",
        "rho": entry.rho,
        "p_value": entry.p_value,
        "significant": entry.significant,
        "strength": entry.strength,
        "note": entry.note,
    }


def profile_report(
    clustering: ClusteringResult,
    labeling: ProfileLabeling,
    ids: Sequence[str],
    matrix_raw: np.ndarray,
    timelines: Mapping[str, VolunteerTimeline],
) -> dict:
    """Full JSON-ready report: one block per profile in reporting order."""
    correlations = profile_correlations(ids, matrix_raw, clustering.assignments, labeling)
    importance = {row.label: row for row in importance_table(
        clustering.assignments, labeling, timelines
    )}

    blocks = []
    for cluster_index in profile_order(labeling):
        label = labeling.labels[cluster_index]
        row = importance[label]
        blocks.append(
            {
                "label": label,
                "cluster_id": cluster_index,
                "rule": labeling.rules[cluster_index],
                "centroid_normalized": [
                    float(value) for value in clustering.centroids_normalized[cluster_index]
                ],
                "centroid_raw": [
                    float(value) for value in clustering.centroids_raw[cluster_index]
                ],
                "volunteer_count": row.volunteer_count,
                "volunteer_share_pct": row.volunteer_share_pct,
                "devoted_hours": row.devoted_hours,
                "devoted_share_pct": row.devoted_share_pct,
                "correlations": [
                    _correlation_entry_dict(entry) for entry in correlations[label]
                ],
            }
        )
    return {
        "k": clustering.k,
        "wss": clustering.wss,
        "avg_silhouette": clustering.avg_silhouette,
        "interpretation": clustering.interpretation,
        "seed": clustering.seed,
        "profiles": blocks,
    }
