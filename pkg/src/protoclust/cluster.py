"""UPGMA and K-means clustering of packet features."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .optimize import NoKneeError, kneedle_elbow

log = logging.getLogger(__name__)

# linkage values this close are treated as tied
TIE_TOL = 1e-12


@dataclass
class ClusterAssignment:
    labels: list
    k: int
    method: str
    params: dict = field(default_factory=dict)


@dataclass
class Dendrogram:
    """Merge list in scipy numbering: leaves are 0..n-1, merge ``t`` creates ``n + t``."""
    merges: list
    n_leaves: int

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cluster_a", "cluster_b", "dissimilarity", "size"])
            for a, b, h, size in self.merges:
                w.writerow([a, b, repr(h), size])

    def as_lists(self) -> list:
        return [[a, b, h, size] for a, b, h, size in self.merges]


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError("vectors differ in dimension")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(np.dot(u, v) / (nu * nv))


def cosine_dissimilarity(X) -> np.ndarray:
    """Pairwise ``1 - cos`` over the rows of ``X``.

    Rows that are all zero get dissimilarity 1 to everything else.
    """
    X = np.asarray(X, dtype=float)
    norms = np.linalg.norm(X, axis=1)
    zero = norms == 0
    if zero.any():
        log.warning("%d zero feature rows; their dissimilarity is set to 1", int(zero.sum()))
    safe = np.where(zero, 1.0, norms)
    U = X / safe[:, None]
    D = 1.0 - np.clip(U @ U.T, -1.0, 1.0)
    D[zero, :] = 1.0
    D[:, zero] = 1.0
    D = (D + D.T) / 2
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, 0.0)


def relabel(labels: Sequence[int]) -> list:
    """Renumber cluster ids 0..k-1 in order of first appearance."""
    seen: dict = {}
    return [seen.setdefault(lab, len(seen)) for lab in labels]


def upgma(dissim, threshold: float = 0.5) -> tuple:
    """Average-linkage agglomerative clustering cut at ``threshold``.

    The full dendrogram is built; the assignment keeps only merges whose
    linkage is at most ``threshold``.  Among (near-)tied pairs the one with
    the lexicographically smallest (min member of A, min member of B) is
    merged first.
    """
    D = np.array(dissim, dtype=float)
    n = D.shape[0]
    if D.ndim != 2 or D.shape[1] != n:
        raise ValueError("dissimilarity matrix must be square")
    if not np.allclose(D, D.T, rtol=0, atol=1e-12):
        raise ValueError("dissimilarity matrix is not symmetric")
    if np.any(D < 0):
        raise ValueError("dissimilarities must be non-negative")

    # slot i holds the cluster whose smallest member is i
    size = np.ones(n, dtype=np.int64)
    node = np.arange(n)
    active = np.ones(n, dtype=bool)
    work = D.copy()
    work[np.tril_indices(n)] = np.inf
    parent = np.arange(2 * n - 1)
    merges = []
    for t in range(n - 1):
        best = work.min()
        i, j = np.argwhere(work <= best + TIE_TOL)[0]
        a, b = node[i], node[j]
        merges.append((int(min(a, b)), int(max(a, b)), float(best), int(size[i] + size[j])))
        new = n + t
        parent[a] = parent[b] = new
        # Lance-Williams update for UPGMA
        row = (size[i] * D[i] + size[j] * D[j]) / (size[i] + size[j])
        D[i, :] = row
        D[:, i] = row
        size[i] += size[j]
        node[i] = new
        active[j] = False
        work[j, :] = np.inf
        work[:, j] = np.inf
        upper = np.arange(i + 1, n)
        work[i, upper] = np.where(active[upper], row[upper], np.inf)
        lower = np.arange(0, i)
        work[lower, i] = np.where(active[lower], row[lower], np.inf)

    dendro = Dendrogram(merges, n)
    return cut_dendrogram(dendro, threshold), dendro


def cut_dendrogram(dendro: Dendrogram, threshold: float) -> ClusterAssignment:
    """Flat clusters from the merges at or below ``threshold``."""
    n = dendro.n_leaves
    root = list(range(2 * n - 1))

    def find(x):
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    for t, (a, b, h, _size) in enumerate(dendro.merges):
        if h > threshold:
            break
        root[find(a)] = n + t
        root[find(b)] = n + t
    labels = relabel([find(i) for i in range(n)])
    return ClusterAssignment(labels, len(set(labels)), "upgma", {"threshold": threshold})


# --------------------------------------------------------------------------
# K-means

def _kmeans_pp(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=float)


def _assign(X: np.ndarray, C: np.ndarray) -> tuple:
    d2 = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
    lab = d2.argmin(axis=1)
    return lab, d2[np.arange(len(X)), lab]


def within_ss(X, labels) -> float:
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    return float(sum(((X[labels == c] - X[labels == c].mean(axis=0)) ** 2).sum()
                     for c in np.unique(labels)))


def kmeans(f, K: int, seed: int = 0, max_iters: int = 300) -> ClusterAssignment:
    """Lloyd's K-means with seeded k-means++ initialisation."""
    X = np.asarray(getattr(f, "values", f), dtype=float)
    n = X.shape[0]
    if K < 1 or K > n:
        raise ValueError(f"K={K} must lie in 1..{n}")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature rows must be finite")
    rng = np.random.default_rng(seed)
    C = _kmeans_pp(X, K, rng)
    labels, dist = _assign(X, C)
    wss_trace = [float(dist.sum())]
    for _ in range(max_iters):
        for c in range(K):
            members = labels == c
            if members.any():
                C[c] = X[members].mean(axis=0)
            else:
                far = int(np.argmax(dist))
                C[c] = X[far]
                dist[far] = 0.0
        new, dist = _assign(X, C)
        wss_trace.append(float(dist.sum()))
        if np.array_equal(new, labels):
            break
        labels = new
    wss = within_ss(X, labels)
    return ClusterAssignment(relabel(labels.tolist()), len(set(labels.tolist())), "kmeans",
                             {"K": K, "seed": seed, "wss": wss, "wss_trace": wss_trace})


def select_k_kmeans(f, k_range: Sequence[int], seed: int = 0, max_iters: int = 300) -> int:
    """Elbow of the within-cluster sum of squares over ``k_range`` (Kneedle)."""
    X = np.asarray(getattr(f, "values", f), dtype=float)
    ks = sorted(k for k in set(k_range) if k <= X.shape[0])
    if len(ks) < 3:
        raise ValueError("need at least three candidate K values")
    wss = [kmeans(X, k, seed, max_iters).params["wss"] for k in ks]
    try:
        return ks[kneedle_elbow(ks, wss)]
    except NoKneeError:
        log.warning("no elbow in the WSS curve; using K=%d", ks[0])
        return ks[0]
