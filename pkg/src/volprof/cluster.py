"""Normalization, hierarchical seeding, k-means, and partition scoring.

The pipeline is: range-normalize the engagement matrix, build a Ward
dendrogram (on a seeded subsample past the cap), cut it at each candidate k
to get initial centroids, refine with Lloyd k-means, then score every
partition with the within-cluster sum of squares and the average silhouette
width. Everything is deterministic given (matrix, seed): assignment ties
break toward the lowest cluster index and reductions run in fixed order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError, InvariantError

DEFAULT_HIER_CAP = 10_000
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100
DEFAULT_K_RANGE = (2, 10)
DEFAULT_RESTARTS = 8

# below this many distinct-row seed subsets, try them all instead of sampling
_EXHAUSTIVE_START_CAP = 256

INTERPRETATION_STRONG = "strong"
INTERPRETATION_REASONABLE = "reasonable"
INTERPRETATION_WEAK = "weak"
INTERPRETATION_NONE = "none"

_SILHOUETTE_CHUNK = 512


@dataclass(frozen=True)
class NormalizationParams:
    """Per-column raw min and max, kept to map centroids back to raw units."""

    x_min: tuple[float, ...]
    x_max: tuple[float, ...]


@dataclass(frozen=True)
class Dendrogram:
    """Agglomerative merge tree in linkage-table form.

    Each merge is (left id, right id, height, size): leaf ids are 0..n-1,
    merge i creates id n+i, heights are non-decreasing under Ward linkage.
    """

    n_leaves: int
    merges: tuple[tuple[int, int, float, int], ...]


@dataclass(frozen=True)
class HierarchicalResult:
    dendrogram: Dendrogram
    sample_indices: np.ndarray | None = None


@dataclass(frozen=True)
class KMeansFit:
    labels: np.ndarray
    centroids: np.ndarray
    wss: float
    iterations: int
    converged: bool
    wss_history: tuple[float, ...]


@dataclass(frozen=True)
class ClusteringResult:
    k: int
    assignments: dict[str, int]
    centroids_normalized: np.ndarray
    centroids_raw: np.ndarray
    wss: float
    avg_silhouette: float
    interpretation: str
    iterations: int
    seed: int


@dataclass(frozen=True)
class KScanEntry:
    k: int
    wss: float
    avg_silhouette: float
    interpretation: str


@dataclass(frozen=True)
class KScanReport:
    entries: tuple[KScanEntry, ...]
    suggested_k: int
    interpretation: str
    elbow_k: int


def range_normalize(matrix: np.ndarray) -> tuple[np.ndarray, NormalizationParams]:
    """Map each column onto [0,1] by its own min and max.

    A constant column maps to all zeros rather than NaN, keeping the
    dimensionality stable; it carries no information either way.
    """
    data = np.asarray(matrix, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise DataError("normalization needs a matrix with at least 2 rows")
    if not np.all(np.isfinite(data)):
        raise DataError("matrix contains non-finite values")
    x_min = data.min(axis=0)
    x_max = data.max(axis=0)
    span = x_max - x_min
    normalized = np.zeros_like(data)
    for column in range(data.shape[1]):
        if span[column] > 0:
            normalized[:, column] = (data[:, column] - x_min[column]) / span[column]
    return normalized, NormalizationParams(tuple(x_min), tuple(x_max))


def denormalize(matrix: np.ndarray, params: NormalizationParams) -> np.ndarray:
    """Invert :func:`range_normalize` (constant columns return their min)."""
    data = np.asarray(matrix, dtype=float)
    x_min = np.asarray(params.x_min)
    x_max = np.asarray(params.x_max)
    return data * (x_max - x_min) + x_min


def _condensed_index(n: int, i: int, j: int) -> int:
    if i > j:
        i, j = j, i
    return n * i - (i * (i + 1)) // 2 + (j - i - 1)


def _ward_linkage(points: np.ndarray) -> np.ndarray:
    """Nearest-neighbor-chain agglomeration with the Lance-Williams update.

    Works on squared Euclidean distances (the Ward recursion is exact there);
    reported heights are their square roots. Output rows are sorted by height
    and relabeled so merge i creates cluster id n+i.
    """
    n = len(points)
    squared = np.empty(n * (n - 1) // 2)
    position = 0
    for i in range(n - 1):
        diff = points[i + 1 :] - points[i]
        count = n - i - 1
        squared[position : position + count] = np.einsum("ij,ij->i", diff, diff)
        position += count

    size = np.ones(n)
    merges = np.empty((n - 1, 4))
    chain = np.empty(n, dtype=np.intp)
    chain_length = 0
    for merge_index in range(n - 1):
        if chain_length == 0:
            for i in range(n):
                if size[i] > 0:
                    chain[0] = i
                    chain_length = 1
                    break
        while True:
            x = int(chain[chain_length - 1])
            if chain_length > 1:
                y = int(chain[chain_length - 2])
                current_min = squared[_condensed_index(n, x, y)]
            else:
                y = -1
                current_min = np.inf
            for i in range(n):
                if size[i] == 0 or i == x:
                    continue
                distance = squared[_condensed_index(n, x, i)]
                if distance < current_min:
                    current_min = distance
                    y = i
            if chain_length > 1 and y == int(chain[chain_length - 2]):
                break
            chain[chain_length] = y
            chain_length += 1
        chain_length -= 2

        if x > y:
            x, y = y, x
        nx, ny = size[x], size[y]
        merges[merge_index] = (x, y, current_min, nx + ny)
        size[x] = 0
        size[y] = nx + ny
        for i in range(n):
            ni = size[i]
            if ni == 0 or i == y:
                continue
            squared[_condensed_index(n, i, y)] = (
                (nx + ni) * squared[_condensed_index(n, i, x)]
                + (ny + ni) * squared[_condensed_index(n, i, y)]
                - ni * current_min
            ) / (nx + ny + ni)

    order = np.argsort(merges[:, 2], kind="stable")
    merges = merges[order]
    merges[:, 2] = np.sqrt(merges[:, 2])

    # relabel slot indices to sequential cluster ids via union-find
    parent = np.arange(2 * n - 1, dtype=np.intp)

    def find(node: int) -> int:
        root = node
        while parent[root] != root:
            root = parent[root]
        while parent[node] != root:
            parent[node], node = root, parent[node]
        return root

    for i in range(n - 1):
        left = find(int(merges[i, 0]))
        right = find(int(merges[i, 1]))
        if left > right:
            left, right = right, left
        merges[i, 0] = left
        merges[i, 1] = right
        parent[left] = n + i
        parent[right] = n + i
    return merges


def hierarchical_cluster(
    matrix: np.ndarray,
    cap: int = DEFAULT_HIER_CAP,
    seed: int = 0,
) -> HierarchicalResult:
    """Ward dendrogram of the rows, Euclidean distance.

    Above ``cap`` rows the quadratic distance store stops being desk-scale,
    so a seeded uniform subsample of size ``cap`` is clustered instead and
    the row indices of the subsample are returned for mapping cuts back.
    """
    data = np.asarray(matrix, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise DataError("hierarchical clustering needs at least 2 rows")
    if cap < 2:
        raise ConfigError(f"hierarchical cap must be >= 2, got {cap}")

    sample_indices = None
    if data.shape[0] > cap:
        rng = np.random.default_rng(seed)
        sample_indices = np.sort(rng.choice(data.shape[0], size=cap, replace=False))
        data = data[sample_indices]

    table = _ward_linkage(data)
    merges = tuple(
        (int(row[0]), int(row[1]), float(row[2]), int(row[3])) for row in table
    )
    return HierarchicalResult(
        dendrogram=Dendrogram(n_leaves=len(data), merges=merges),
        sample_indices=sample_indices,
    )


def cut_dendrogram(dendrogram: Dendrogram, k: int) -> list[list[int]]:
    """Leaf-index groups after stopping the merge sequence at k clusters.

    Groups are ordered by their smallest leaf index, so the cut is
    deterministic and independent of merge bookkeeping.
    """
    n = dendrogram.n_leaves
    if not 2 <= k <= n:
        raise ConfigError(f"cut needs 2 <= k <= {n}, got k={k}")
    members: dict[int, list[int]] = {leaf: [leaf] for leaf in range(n)}
    for index, (left, right, _, _) in enumerate(dendrogram.merges[: n - k]):
        merged = members.pop(left) + members.pop(right)
        members[n + index] = merged
    groups = [sorted(group) for group in members.values()]
    groups.sort(key=lambda group: group[0])
    return groups


def cut_to_centroids(
    result: HierarchicalResult, k: int, matrix: np.ndarray
) -> np.ndarray:
    """Mean row of each dendrogram group at the k-cluster cut.

    ``matrix`` is the full normalized matrix; when the dendrogram was built
    on a subsample, leaf indices are mapped through it.
    """
    data = np.asarray(matrix, dtype=float)
    groups = cut_dendrogram(result.dendrogram, k)
    centroids = np.empty((k, data.shape[1]))
    for position, group in enumerate(groups):
        rows = (
            data[group]
            if result.sample_indices is None
            else data[result.sample_indices[group]]
        )
        centroids[position] = rows.mean(axis=0)
    return centroids


def wss(matrix: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    """Sum of squared Euclidean distances from each row to its centroid."""
    data = np.asarray(matrix, dtype=float)
    differences = data - np.asarray(centroids)[np.asarray(labels)]
    return float(np.sum(differences * differences))


def kmeans(
    matrix: np.ndarray,
    initial_centroids: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
) -> KMeansFit:
    """Lloyd iterations from the given centroids.

    Assignment ties break toward the lowest cluster index. An empty cluster
    is reseeded with the point farthest from its own centroid (drawn only
    from clusters that keep at least one member). Stops on stable
    assignments, squared centroid movement below tol, or max_iter.
    """
    data = np.asarray(matrix, dtype=float)
    centroids = np.array(initial_centroids, dtype=float, copy=True)
    if not np.all(np.isfinite(data)) or not np.all(np.isfinite(centroids)):
        raise DataError("k-means requires finite inputs")
    k = len(centroids)
    if len(np.unique(centroids, axis=0)) != k:
        raise ConfigError("initial centroids must be distinct")
    if tol <= 0:
        raise ConfigError(f"tol must be positive, got {tol}")

    labels = np.full(len(data), -1, dtype=np.intp)
    history: list[float] = []
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        if len(data) * k <= 1_000_000:
            # direct differences keep exactly-tied distances exactly tied
            squared = np.sum((data[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        else:
            squared = (
                np.sum(data * data, axis=1)[:, None]
                - 2.0 * data @ centroids.T
                + np.sum(centroids * centroids, axis=1)[None, :]
            )
        new_labels = np.argmin(squared, axis=1).astype(np.intp)

        counts = np.bincount(new_labels, minlength=k)
        for cluster_index in range(k):
            if counts[cluster_index] > 0:
                continue
            to_own = np.sum((data - centroids[new_labels]) ** 2, axis=1)
            to_own[counts[new_labels] < 2] = -np.inf
            donor = int(np.argmax(to_own))
            if not np.isfinite(to_own[donor]):
                raise InvariantError("cannot repair empty cluster: no donor point")
            counts[new_labels[donor]] -= 1
            new_labels[donor] = cluster_index
            counts[cluster_index] = 1
            centroids[cluster_index] = data[donor]

        stable = np.array_equal(new_labels, labels)
        labels = new_labels

        updated = np.empty_like(centroids)
        for cluster_index in range(k):
            updated[cluster_index] = data[labels == cluster_index].mean(axis=0)
        movement = float(np.max(np.sum((updated - centroids) ** 2, axis=1)))
        centroids = updated

        current = wss(data, labels, centroids)
        if history and current > history[-1] + 1e-9 * max(1.0, history[-1]):
            raise InvariantError(
                f"objective rose from {history[-1]} to {current} at "
                f"iteration {iterations}"
            )
        history.append(current)

        if stable or movement < tol:
            converged = True
            break

    return KMeansFit(
        labels=labels,
        centroids=centroids,
        wss=history[-1],
        iterations=iterations,
        converged=converged,
        wss_history=tuple(history),
    )


def _plus_plus_centroids(
    data: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray | None:
    """One k-means++ draw; None when the data cannot yield k distinct centers."""
    chosen = [int(rng.integers(len(data)))]
    for _ in range(k - 1):
        squared = np.min(
            np.sum((data[:, None, :] - data[chosen][None, :, :]) ** 2, axis=2),
            axis=1,
        )
        total = float(squared.sum())
        if total <= 0.0:
            return None
        chosen.append(int(rng.choice(len(data), p=squared / total)))
    centers = data[chosen]
    if len(np.unique(centers, axis=0)) != k:
        return None
    return centers


def seeded_kmeans(
    matrix: np.ndarray,
    hierarchy: HierarchicalResult,
    k: int,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> KMeansFit:
    """Dendrogram-cut start refined by Lloyd, hardened with extra starts.

    The cut centroids stay the canonical start and win all ties; extra starts
    replace the fit only on a strictly lower WSS. A single descent
    occasionally stalls a few percent above the best partition on small
    awkward instances, so on small inputs every k-subset of distinct rows is
    tried as a start; on large inputs a fixed number of k-means++ draws from
    rng([seed, k, restart]) is used instead. Either way the whole procedure
    is a pure function of (matrix, k, seed).
    """
    data = np.asarray(matrix, dtype=float)
    best = kmeans(
        data, cut_to_centroids(hierarchy, k, data), tol=tol, max_iter=max_iter, seed=seed
    )

    distinct = np.unique(data, axis=0)
    if math.comb(len(distinct), k) <= _EXHAUSTIVE_START_CAP:
        starts: Iterable[np.ndarray] = (
            distinct[list(subset)]
            for subset in itertools.combinations(range(len(distinct)), k)
        )
    else:
        starts = (
            centers
            for restart in range(restarts)
            if (
                centers := _plus_plus_centroids(
                    data, k, np.random.default_rng([seed, k, restart])
                )
            )
            is not None
        )
    for centers in starts:
        candidate = kmeans(data, centers, tol=tol, max_iter=max_iter, seed=seed)
        if candidate.wss < best.wss * (1.0 - 1e-12):
            best = candidate
    return best


def interpret_silhouette(value: float) -> str:
    """Structure-strength band for an average silhouette width."""
    if value >= 0.71:
        return INTERPRETATION_STRONG
    if value >= 0.51:
        return INTERPRETATION_REASONABLE
    if value >= 0.26:
        return INTERPRETATION_WEAK
    return INTERPRETATION_NONE


def avg_silhouette(matrix: np.ndarray, labels: np.ndarray) -> tuple[float, str]:
    """Mean silhouette width of the partition, plus its strength band.

    s(i) = (b - a) / max(a, b) with a = mean distance to own cluster
    (excluding self) and b = the smallest mean distance to another cluster.
    Singleton-cluster points score 0, as do points with a = b = 0. Distances
    are computed in row chunks to keep memory linear.
    """
    data = np.asarray(matrix, dtype=float)
    labels = np.asarray(labels)
    cluster_ids = np.unique(labels)
    k = len(cluster_ids)
    if k < 2:
        raise DataError("silhouette needs at least 2 clusters")
    n = len(data)
    remap = {cluster: index for index, cluster in enumerate(cluster_ids)}
    compact = np.array([remap[label] for label in labels], dtype=np.intp)
    counts = np.bincount(compact, minlength=k)

    scores = np.zeros(n)
    for start in range(0, n, _SILHOUETTE_CHUNK):
        stop = min(start + _SILHOUETTE_CHUNK, n)
        block = data[start:stop]
        squared = (
            np.sum(block * block, axis=1)[:, None]
            - 2.0 * block @ data.T
            + np.sum(data * data, axis=1)[None, :]
        )
        np.maximum(squared, 0.0, out=squared)
        distances = np.sqrt(squared)

        sums = np.zeros((stop - start, k))
        for cluster_index in range(k):
            sums[:, cluster_index] = distances[:, compact == cluster_index].sum(axis=1)

        for offset in range(stop - start):
            point = start + offset
            own = compact[point]
            if counts[own] == 1:
                continue
            a_value = sums[offset, own] / (counts[own] - 1)
            b_value = np.inf
            for cluster_index in range(k):
                if cluster_index == own:
                    continue
                b_value = min(b_value, sums[offset, cluster_index] / counts[cluster_index])
            denom = max(a_value, b_value)
            scores[point] = 0.0 if denom == 0.0 else (b_value - a_value) / denom

    value = float(scores.mean())
    if not -1.0 <= value <= 1.0:
        raise InvariantError(f"silhouette {value} outside [-1, 1]")
    return value, interpret_silhouette(value)


def _elbow_k(ks: Sequence[int], wss_values: Sequence[float]) -> int:
    """k whose point lies farthest from the chord between the curve's ends."""
    if len(ks) == 1:
        return ks[0]
    first = np.array([ks[0], wss_values[0]], dtype=float)
    last = np.array([ks[-1], wss_values[-1]], dtype=float)
    chord = last - first
    norm = float(np.hypot(*chord))
    if norm == 0.0:
        return ks[0]
    best_k, best_distance = ks[0], -1.0
    for k, value in zip(ks, wss_values):
        offset = np.array([k, value], dtype=float) - first
        distance = abs(chord[0] * offset[1] - chord[1] * offset[0]) / norm
        if distance > best_distance:
            best_k, best_distance = k, distance
    return best_k


def scan_k(
    matrix: np.ndarray,
    k_range: tuple[int, int] = DEFAULT_K_RANGE,
    seed: int = 0,
    hier_cap: int = DEFAULT_HIER_CAP,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> KScanReport:
    """Score every k in the range on the normalized matrix.

    One dendrogram seeds all runs. suggested_k maximizes average silhouette
    (ties toward smaller k); the WSS elbow is reported for human review, not
    used for the suggestion.
    """
    data = np.asarray(matrix, dtype=float)
    k_min, k_max = k_range
    if not 2 <= k_min <= k_max <= len(data) - 1:
        raise ConfigError(
            f"k range [{k_min}, {k_max}] invalid for {len(data)} rows "
            "(need 2 <= k_min <= k_max <= n-1)"
        )
    hierarchy = hierarchical_cluster(data, cap=hier_cap, seed=seed)

    entries = []
    for k in range(k_min, k_max + 1):
        fit = seeded_kmeans(data, hierarchy, k, seed=seed, tol=tol, max_iter=max_iter)
        value, interpretation = avg_silhouette(data, fit.labels)
        entries.append(KScanEntry(k, fit.wss, value, interpretation))

    best = max(entries, key=lambda entry: (entry.avg_silhouette, -entry.k))
    elbow = _elbow_k([e.k for e in entries], [e.wss for e in entries])
    return KScanReport(
        entries=tuple(entries),
        suggested_k=best.k,
        interpretation=best.interpretation,
        elbow_k=elbow,
    )
