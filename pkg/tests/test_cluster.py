import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.cluster.hierarchy import linkage
from scipy.spatial.distance import squareform

import oracles
from protoclust.cluster import (cosine_dissimilarity, cosine_similarity, cut_dendrogram, kmeans,
                                select_k_kmeans, upgma)


def test_cosine_examples():
    assert cosine_similarity([1, 2], [1, 2]) == pytest.approx(1.0)
    assert cosine_similarity([1, 0], [0, 3]) == 0.0
    assert cosine_similarity([1, 2, 3], [3, 2, 1]) == pytest.approx(10 / 14)
    with pytest.raises(ValueError):
        cosine_similarity([0, 0], [1, 1])


def test_cosine_dissimilarity_zero_rows():
    D = cosine_dissimilarity([[1, 0], [0, 0], [2, 0]])
    assert D[0, 2] == pytest.approx(0.0) and D[0, 1] == 1.0 and D[1, 1] == 0.0


def test_upgma_three_points():
    D = [[0, 0.1, 0.9], [0.1, 0, 0.9], [0.9, 0.9, 0]]
    a, tree = upgma(D, 0.5)
    assert a.labels == [0, 0, 1] and a.k == 2
    assert tree.merges[0][:2] == (0, 1)
    assert upgma(D, 0.0)[0].k == 3


def _random_dissim(rng, n, integer=False):
    X = rng.integers(1, 4, (n, n)).astype(float) if integer else rng.random((n, n))
    D = np.triu(X, 1)
    return D + D.T


@pytest.mark.parametrize("seed", range(20))
def test_upgma_oracle(seed):
    rng = np.random.default_rng(seed)
    D = _random_dissim(rng, 9, integer=seed % 2 == 0)
    _, tree = upgma(D)
    want = oracles.upgma_merges(D.tolist())
    assert [m[:2] + m[3:] for m in tree.merges] == [m[:2] + m[3:] for m in want]
    np.testing.assert_allclose([m[2] for m in tree.merges], [m[2] for m in want], atol=1e-12)


def test_upgma_heights_match_scipy():
    rng = np.random.default_rng(9)
    D = _random_dissim(rng, 30)
    _, tree = upgma(D)
    Z = linkage(squareform(D), "average")
    np.testing.assert_allclose([m[2] for m in tree.merges], Z[:, 2], atol=1e-12)
    assert [m[3] for m in tree.merges] == Z[:, 3].astype(int).tolist()


def test_upgma_validation():
    with pytest.raises(ValueError):
        upgma([[0, 1], [2, 0]])
    with pytest.raises(ValueError):
        upgma([[0, -1], [-1, 0]])


@given(st.integers(2, 12), st.floats(0, 1), st.integers(0, 10_000))
def test_cut_monotone(n, thr, seed):
    D = _random_dissim(np.random.default_rng(seed), n)
    a, tree = upgma(D, thr)
    assert a.k == cut_dendrogram(tree, thr).k
    assert upgma(D, min(1.0, thr + 0.2))[0].k <= a.k
    assert len(tree.merges) == n - 1 and tree.merges[-1][3] == n


def _blobs(rng, centers, n=30, scale=0.05):
    X = np.vstack([rng.normal(c, scale, (n, len(c))) for c in centers])
    return X, np.repeat(np.arange(len(centers)), n)


def test_kmeans_k_equals_p():
    X = np.random.default_rng(0).random((6, 2))
    a = kmeans(X, 6, seed=1)
    assert a.k == 6 and a.params["wss"] == pytest.approx(0.0)


def test_kmeans_two_blobs_and_determinism():
    X, y = _blobs(np.random.default_rng(3), [(0, 0), (5, 5)])
    a = kmeans(X, 2, seed=4)
    assert {(p, t) for p, t in zip(a.labels, y)} in ({(0, 0), (1, 1)}, {(0, 1), (1, 0)})
    assert kmeans(X, 2, seed=4).labels == a.labels


def test_select_k_three_blobs():
    X, _ = _blobs(np.random.default_rng(5), [(0, 0), (4, 0), (0, 4)])
    assert select_k_kmeans(X, range(1, 9), seed=0) == 3
    assert select_k_kmeans(X, range(1, 9), seed=0) == select_k_kmeans(X, range(1, 9), seed=0)


def test_select_k_flat_fallback():
    assert select_k_kmeans(np.ones((10, 2)), range(2, 6), seed=0) == 2


def test_kmeans_validation():
    with pytest.raises(ValueError):
        kmeans(np.ones((3, 2)), 4)
