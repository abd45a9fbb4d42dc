from __future__ import annotations

import numpy as np
import pytest

from wavecurve.clustering import (
    DistanceMatrix,
    adjusted_rand_index,
    cluster_curves,
    clusters_table,
    cut_tree_labels,
    dendrogram_payload,
    hartigan_table,
    hclust_complete,
    l2_distance_matrix,
    select_k_hartigan,
    severity_order,
)
from wavecurve.errors import InputError, ShapeError


def _constants(grid, levels):
    return np.vstack([np.full(grid.size, level) for level in levels])


def test_distance_of_constant_curves(grid):
    dist = l2_distance_matrix(_constants(grid, [0.0, 2.0]), grid)
    assert dist.values[0, 1] == pytest.approx(4.0)
    assert dist.values[1, 0] == dist.values[0, 1]
    assert dist.labels == ["0", "1"]


def test_distance_matrix_is_validated():
    with pytest.raises(ShapeError):
        DistanceMatrix(np.zeros((2, 3)))
    with pytest.raises(InputError):
        DistanceMatrix(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(InputError):
        DistanceMatrix(np.array([[0.0, -1.0], [-1.0, 0.0]]))
    with pytest.raises(ShapeError):
        DistanceMatrix(np.zeros((2, 2)), labels=["a"])


def test_complete_linkage_cut(grid):
    dist = l2_distance_matrix(_constants(grid, [0.0, 0.1, 5.0, 5.1, 10.0]), grid)
    tree = hclust_complete(dist)
    assert len(tree.merges) == 4
    assert np.all(np.diff(tree.heights) >= 0)
    labels = cut_tree_labels(tree, 3)
    assert labels[0] == labels[1]
    assert labels[2] == labels[3]
    assert len(set(labels.tolist())) == 3
    with pytest.raises(InputError):
        cut_tree_labels(tree, 6)
    with pytest.raises(InputError):
        hclust_complete(DistanceMatrix(np.zeros((1, 1))))


def test_hartigan_statistic_and_choice(grid):
    offsets = [0.0, 0.01, 0.02, 0.03, 0.04]
    values = _constants(grid, offsets + [5.0 + o for o in offsets])
    labels_by_k = {
        1: [0] * 10,
        2: [0] * 5 + [1] * 5,
        3: [0] * 5 + [1, 1, 2, 2, 2],
    }
    table = hartigan_table(values, labels_by_k, grid).set_index("k")
    assert list(table.index) == [1, 2]
    w2 = 149.0 * 2 * 0.001
    w3 = 149.0 * (0.001 + 0.00005 + 0.0002)
    assert table.loc[2, "within_ss"] == pytest.approx(w2)
    assert table.loc[2, "hartigan"] == pytest.approx((w2 / w3 - 1.0) * 7)
    assert table.loc[1, "hartigan"] > 10
    assert select_k_hartigan(values, labels_by_k, k_max=3, grid=grid) == 2
    # no k qualifies below the threshold
    assert select_k_hartigan(values, labels_by_k, k_max=3, threshold=-1.0, grid=grid) == 3


def test_severity_rank_by_mean_peak():
    ranks = severity_order([0, 0, 1, 1, 2], [5.0, 5.0, 1.0, 1.0, 3.0])
    assert ranks.tolist() == [2, 2, 0, 0, 1]
    with pytest.raises(ShapeError):
        severity_order([0, 1], [1.0])


def test_cluster_curves_recovers_families(smooth, bumps):
    heights = [1.0] * 4 + [3.0] * 4 + [6.0] * 4
    raw = bumps([40] * 12, heights) + np.arange(12)[:, None] * 1e-3
    curves = dict(zip([f"u{i:02d}" for i in range(12)], smooth(raw)))
    peaks = {u: float(c.values.max()) for u, c in curves.items()}
    result = cluster_curves(curves, peaks, k_max=3)
    assert result.k == 3
    assert result.cluster_sizes() == [4, 4, 4]
    severity = result.severity_by_unit()
    assert [severity[f"u{i:02d}"] for i in (0, 5, 11)] == [0, 1, 2]

    table = clusters_table(result, "W1")
    assert list(table.columns) == ["unit", "wave", "label", "severity_rank"]
    payload = dendrogram_payload(result, "W1")
    assert payload["k"] == 3 and len(payload["merges"]) == 11
    assert sorted(payload["leaf_order"]) == list(range(12))


def test_curve_distances_match_a_fine_riemann_sum(smooth, bumps):
    curves = smooth(bumps([30, 38, 45, 60, 75], [1.0, 2.5, 0.6, 4.0, 3.0]))
    dist = l2_distance_matrix(curves)
    basis = curves[0].basis
    n = 100_000
    step = basis.domain_length / n
    mid = (np.arange(n) + 0.5) * step
    dense = np.vstack([c.evaluate(mid) for c in curves])
    for i in range(len(curves)):
        assert dist.values[i, i] == 0.0
        for j in range(i + 1, len(curves)):
            riemann = np.sum((dense[i] - dense[j]) ** 2) * step / basis.domain_length
            assert dist.values[i, j] == pytest.approx(riemann, rel=1e-6)


def test_adjusted_rand_index():
    assert adjusted_rand_index([0, 0, 1, 1, 2, 2], [2, 2, 0, 0, 1, 1]) == 1.0
    assert adjusted_rand_index([0, 0, 1, 1], [0, 0, 1, 2]) == pytest.approx(4.0 / 7.0)
    assert adjusted_rand_index([0, 1, 0, 1], [0, 0, 1, 1]) < 0
    with pytest.raises(ShapeError):
        adjusted_rand_index([0, 1, 2], [0, 1])


def test_default_settings_recover_three_families_exactly(grid, smooth, bumps):
    rng = np.random.default_rng(11)
    families = np.repeat([0, 1, 2], 10)
    heights = [(0.6, 2.5, 6.0)[f] for f in families]
    raw = bumps([40] * 30, heights) + rng.normal(0.0, 0.04, (30, grid.size))
    curves = dict(zip([f"u{i:02d}" for i in range(30)], smooth(raw)))
    peaks = {u: float(c.values.max()) for u, c in curves.items()}
    result = cluster_curves(curves, peaks)
    assert result.k == 3
    assert result.cluster_sizes() == [10, 10, 10]
    assert adjusted_rand_index(result.labels, families) == 1.0
    assert result.severity.tolist() == families.tolist()
