"""Curve clustering: mean squared L2 distances, complete linkage and a Hartigan cut."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.cluster import hierarchy
from scipy.integrate import trapezoid
from scipy.spatial.distance import squareform
from scipy.special import comb

from .errors import InputError, ShapeError
from .fda.basis import Curve, CurveLike, Grid, sample_many

LOGGER = logging.getLogger(__name__)

METRIC = "mean_squared_l2"


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    values: np.ndarray
    labels: List[str] = field(default_factory=list)
    metric: str = METRIC

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ShapeError(f"Distance matrix must be square, got {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InputError("Distances must be finite and nonnegative")
        if not np.array_equal(values, values.T) or np.any(np.diag(values) != 0):
            raise InputError("Distance matrix must be symmetric with a zero diagonal")
        object.__setattr__(self, "values", values)
        if not self.labels:
            object.__setattr__(self, "labels", [str(i) for i in range(values.shape[0])])
        elif len(self.labels) != values.shape[0]:
            raise ShapeError("One label per row of the distance matrix is required")

    @property
    def size(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class Dendrogram:
    """Complete-linkage merge history in scipy's linkage-matrix layout."""

    linkage: np.ndarray
    labels: List[str]

    @property
    def merges(self) -> List[tuple]:
        return [(int(a), int(b), float(h)) for a, b, h, _ in self.linkage]

    @property
    def heights(self) -> np.ndarray:
        return self.linkage[:, 2]

    @property
    def leaf_order(self) -> List[int]:
        return [int(i) for i in hierarchy.leaves_list(self.linkage)]


def _as_matrix(curves: Union[Mapping[str, CurveLike], Sequence[CurveLike]], grid: Optional[Grid]):
    if isinstance(curves, Mapping):
        labels = [str(k) for k in curves]
        items = list(curves.values())
    else:
        items = list(curves)
        labels = [str(i) for i in range(len(items))]
    if grid is None:
        if not items or not isinstance(items[0], Curve):
            raise InputError("A grid is required for sampled series")
        grid = items[0].grid
    return labels, sample_many(items, grid), grid


def _shared_basis(items: Sequence[CurveLike], grid: Grid) -> bool:
    if not items or not all(isinstance(c, Curve) for c in items):
        return False
    first = items[0]
    if abs(float(first.basis.domain_length) - float(grid.domain_length)) > 1e-9:
        return False
    return all(c.basis.same_as(first.basis) and c.grid.same_as(grid) for c in items)


def l2_distance_matrix(
    curves: Union[Mapping[str, CurveLike], Sequence[CurveLike]],
    grid: Optional[Grid] = None,
) -> DistanceMatrix:
    """d(x, v) = (1/c) * integral of (x - v)^2 over [0, c].

    Curves on one basis are integrated exactly through the basis Gram
    matrix; sampled series use the trapezoid rule on the grid.
    """
    if isinstance(curves, Mapping):
        items = list(curves.values())
    else:
        items = list(curves)
    labels, values, grid = _as_matrix(curves, grid)
    if _shared_basis(items, grid):
        coefs = np.vstack([c.coefs for c in items])
        diff = coefs[:, None, :] - coefs[None, :, :]
        integral = np.einsum("ijk,kl,ijl->ij", diff, items[0].basis.gram, diff)
        dist = np.clip(integral, 0.0, None) / items[0].basis.domain_length
    else:
        diff = values[:, None, :] - values[None, :, :]
        dist = trapezoid(diff ** 2, grid.points, axis=-1) / grid.domain_length
    dist = 0.5 * (dist + dist.T)
    np.fill_diagonal(dist, 0.0)
    return DistanceMatrix(dist, labels)


def hclust_complete(dist: DistanceMatrix) -> Dendrogram:
    if dist.size < 2:
        raise InputError("Clustering needs at least two curves")
    condensed = squareform(dist.values, checks=False)
    linkage = hierarchy.linkage(condensed, method="complete")
    return Dendrogram(linkage=linkage, labels=list(dist.labels))


def cut_tree_labels(dendrogram: Dendrogram, k: int) -> np.ndarray:
    """Flat labels for exactly ``k`` clusters, numbered by first appearance."""
    n = len(dendrogram.labels)
    if not 1 <= k <= n:
        raise InputError(f"Cannot cut {n} leaves into {k} clusters")
    return hierarchy.cut_tree(dendrogram.linkage, n_clusters=k).ravel().astype(int)


def within_ss(values: np.ndarray, labels: Sequence[int], grid: Grid) -> float:
    """Sum over clusters of the integrated squared deviation of members from their cluster mean."""
    labels = np.asarray(labels)
    total = 0.0
    for label in np.unique(labels):
        members = values[labels == label]
        deviation = members - members.mean(axis=0)
        total += float(np.sum(trapezoid(deviation ** 2, grid.points, axis=-1)))
    return total


def hartigan_table(
    values: np.ndarray,
    labels_by_k: Mapping[int, Sequence[int]],
    grid: Grid,
) -> pd.DataFrame:
    n = values.shape[0]
    ks = sorted(labels_by_k)
    w = {k: within_ss(values, labels_by_k[k], grid) for k in ks}
    rows = []
    for k in ks:
        if k + 1 not in w:
            continue
        if w[k] <= 0:
            h = 0.0
        elif w[k + 1] <= 0:
            h = np.inf
        else:
            h = (w[k] / w[k + 1] - 1.0) * (n - k - 1)
        rows.append({"k": k, "within_ss": w[k], "within_ss_next": w[k + 1], "hartigan": h})
    return pd.DataFrame(rows, columns=["k", "within_ss", "within_ss_next", "hartigan"])


def select_k_hartigan(
    curves: Union[Mapping[str, CurveLike], Sequence[CurveLike], np.ndarray],
    labels_by_k: Mapping[int, Sequence[int]],
    k_max: int = 10,
    threshold: float = 10.0,
    grid: Optional[Grid] = None,
) -> int:
    """Smallest k with H(k) <= threshold; k_max when no k qualifies."""
    if isinstance(curves, np.ndarray):
        if grid is None:
            raise InputError("A grid is required for sampled series")
        values = sample_many(curves, grid)
    else:
        _, values, grid = _as_matrix(curves, grid)
    k_max = min(int(k_max), values.shape[0])
    table = hartigan_table(values, {k: v for k, v in labels_by_k.items() if k <= k_max}, grid)
    for row in table.itertuples(index=False):
        if row.hartigan <= threshold:
            return int(row.k)
    return k_max


def severity_order(labels: Sequence[int], peak_values: Sequence[float]) -> np.ndarray:
    """Severity rank per unit: clusters ranked ascending by mean member peak height (0 = mildest)."""
    labels = np.asarray(labels)
    peaks = np.asarray(peak_values, dtype=float)
    if labels.shape != peaks.shape:
        raise ShapeError("One peak value per labelled unit is required")
    clusters = np.unique(labels)
    means = np.array([peaks[labels == c].mean() for c in clusters])
    order = np.lexsort((clusters, means))
    rank_of = {int(clusters[pos]): rank for rank, pos in enumerate(order)}
    return np.array([rank_of[int(label)] for label in labels], dtype=int)


def adjusted_rand_index(labels_a: Sequence[int], labels_b: Sequence[int]) -> float:
    """Chance-corrected agreement of two partitions; 1 when they group units identically."""
    a, b = np.asarray(labels_a), np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError("Partitions must label the same units")
    table = pd.crosstab(a, b).to_numpy()
    together = float(comb(table, 2).sum())
    rows = float(comb(table.sum(axis=1), 2).sum())
    cols = float(comb(table.sum(axis=0), 2).sum())
    expected = rows * cols / float(comb(a.size, 2)) if a.size > 1 else 0.0
    ceiling = 0.5 * (rows + cols)
    if ceiling == expected:
        return 1.0
    return (together - expected) / (ceiling - expected)


@dataclass
class ClusteringResult:
    units: List[str]
    distance: DistanceMatrix
    dendrogram: Dendrogram
    k: int
    labels: np.ndarray
    severity: np.ndarray
    hartigan: pd.DataFrame

    def severity_by_unit(self) -> Dict[str, int]:
        return {u: int(s) for u, s in zip(self.units, self.severity)}

    def cluster_sizes(self) -> List[int]:
        """Cluster sizes from mildest to hardest hit."""
        return [int(np.sum(self.severity == r)) for r in range(self.k)]


def cluster_curves(
    curves: Mapping[str, Curve],
    peak_values: Mapping[str, float],
    k_max: int = 10,
    threshold: float = 10.0,
) -> ClusteringResult:
    """Distance matrix, complete linkage, Hartigan cut and severity ranking in one pass."""
    dist = l2_distance_matrix(curves)
    tree = hclust_complete(dist)
    _, values, grid = _as_matrix(curves, None)
    k_max = min(k_max, dist.size)
    labels_by_k = {k: cut_tree_labels(tree, k) for k in range(1, k_max + 1)}
    table = hartigan_table(values, labels_by_k, grid)
    k = select_k_hartigan(values, labels_by_k, k_max, threshold, grid)
    labels = labels_by_k[k]
    severity = severity_order(labels, [peak_values[u] for u in dist.labels])
    LOGGER.info("Clustered %d curves into k=%d groups (sizes mild->hard %s)", dist.size, k,
                [int(np.sum(severity == r)) for r in range(k)])
    return ClusteringResult(
        units=list(dist.labels),
        distance=dist,
        dendrogram=tree,
        k=k,
        labels=labels,
        severity=severity,
        hartigan=table,
    )


def clusters_table(result: ClusteringResult, wave_id: str) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "unit": result.units,
            "wave": wave_id,
            "label": result.labels.astype(int),
            "severity_rank": result.severity.astype(int),
        }
    )


def dendrogram_payload(result: ClusteringResult, wave_id: str) -> Dict[str, Any]:
    tree = result.dendrogram
    return {
        "wave": wave_id,
        "metric": result.distance.metric,
        "linkage": "complete",
        "units": list(tree.labels),
        "leaf_order": tree.leaf_order,
        "merges": [
            {"left": int(a), "right": int(b), "height": float(h), "size": int(s)}
            for a, b, h, s in tree.linkage
        ],
        "k": int(result.k),
    }
