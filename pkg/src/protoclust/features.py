"""Packet feature representations: term counts, LDA posteriors, alignment scores."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .tokenize import TokenCorpus

TF_COUNTS = "tf_counts"
LDA_POSTERIOR = "lda_posterior"
ALIGNMENT_SIMILARITY = "alignment_similarity"


@dataclass
class FeatureMatrix:
    values: np.ndarray
    kind: str
    names: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape

    def to_csv(self, path) -> None:
        names = self.names or [str(i) for i in range(self.values.shape[1])]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["packet"] + list(names))
            for i, row in enumerate(self.values):
                w.writerow([i] + [repr(float(x)) if self.kind != TF_COUNTS else int(x) for x in row])


def build_tf_matrix(c: TokenCorpus) -> FeatureMatrix:
    """Raw token counts, one row per packet, columns in vocabulary order."""
    if len(c.docs) == 0:
        raise ValueError("empty corpus")
    counts = np.zeros((len(c.docs), len(c.vocab)), dtype=np.int64)
    for row, ids in enumerate(c.as_ids()):
        np.add.at(counts[row], ids, 1)
    return FeatureMatrix(counts, TF_COUNTS, list(c.vocab))


# --------------------------------------------------------------------------
# LDA by collapsed Gibbs sampling

@dataclass
class LDAModel:
    K: int
    beta: np.ndarray    # K x V, n_kv + eta
    theta: np.ndarray   # D x K
    alpha: float
    eta: float
    seed: int
    iters: int
    vocab: list = field(default_factory=list)

    @property
    def topic_word(self) -> np.ndarray:
        return self.beta / self.beta.sum(axis=1, keepdims=True)


@numba.njit(cache=True)
def _gibbs(words, doc_of, K, V, D, alpha, eta, iters, seed):
    np.random.seed(seed)
    n_tok = words.shape[0]
    z = np.empty(n_tok, dtype=np.int64)
    n_dk = np.zeros((D, K), dtype=np.int64)
    n_vk = np.zeros((V, K), dtype=np.int64)
    n_k = np.zeros(K, dtype=np.int64)
    v_eta = V * eta
    for t in range(n_tok):
        k = np.random.randint(0, K)
        z[t] = k
        n_dk[doc_of[t], k] += 1
        n_vk[words[t], k] += 1
        n_k[k] += 1
    cum = np.empty(K)
    for _ in range(iters):
        for t in range(n_tok):
            d = doc_of[t]
            w = words[t]
            k = z[t]
            n_dk[d, k] -= 1
            n_vk[w, k] -= 1
            n_k[k] -= 1
            total = 0.0
            for j in range(K):
                total += (n_dk[d, j] + alpha) * (n_vk[w, j] + eta) / (n_k[j] + v_eta)
                cum[j] = total
            u = np.random.random() * total
            k = 0
            while k < K - 1 and cum[k] <= u:
                k += 1
            z[t] = k
            n_dk[d, k] += 1
            n_vk[w, k] += 1
            n_k[k] += 1
    return n_dk, n_vk.T.copy()


def fit_lda(c: TokenCorpus, K: int, alpha: Optional[float] = None, eta: float = 0.01,
            iters: int = 500, seed: int = 0) -> LDAModel:
    """Fit LDA with a collapsed Gibbs sampler.

    ``alpha`` defaults to ``50 / K``.  The returned ``beta`` keeps the
    unnormalised weights ``n_kv + eta``; ``theta`` is the smoothed
    document-topic posterior.
    """
    if K < 2:
        raise ValueError("K must be >= 2")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    ids = c.as_ids()
    for i, doc in enumerate(ids):
        if len(doc) == 0:
            raise ValueError(f"document {i} is empty; drop empty documents before LDA")
    n_tok = sum(len(d) for d in ids)
    if K > n_tok:
        raise ValueError(f"K={K} exceeds the {n_tok} token occurrences in the corpus")
    if alpha is None:
        alpha = 50.0 / K
    words = np.concatenate(ids).astype(np.int64)
    doc_of = np.repeat(np.arange(len(ids), dtype=np.int64), [len(d) for d in ids])
    n_dk, n_kv = _gibbs(words, doc_of, K, len(c.vocab), len(ids), float(alpha), float(eta),
                        int(iters), int(seed) % (2 ** 32))
    lengths = n_dk.sum(axis=1, keepdims=True)
    theta = (n_dk + alpha) / (lengths + K * alpha)
    return LDAModel(K, n_kv + eta, theta, float(alpha), float(eta), seed, iters, list(c.vocab))


def doc_topic_features(m: LDAModel) -> FeatureMatrix:
    return FeatureMatrix(m.theta.copy(), LDA_POSTERIOR, [f"topic_{k}" for k in range(m.K)])


# --------------------------------------------------------------------------
# Needleman-Wunsch global alignment

@dataclass(frozen=True)
class AlignmentScoring:
    match: int = 1
    mismatch: int = -1
    gap: int = -1

    def __post_init__(self):
        if not (self.match > self.mismatch and self.match > self.gap):
            raise ValueError("match must exceed both mismatch and gap")


@numba.njit(cache=True)
def _nw(a, b, match, mismatch, gap):
    n, m = a.shape[0], b.shape[0]
    prev = np.empty(m + 1, dtype=np.int64)
    cur = np.empty(m + 1, dtype=np.int64)
    for j in range(m + 1):
        prev[j] = j * gap
    for i in range(1, n + 1):
        cur[0] = i * gap
        ai = a[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1] + (match if ai == b[j - 1] else mismatch)
            up = prev[j] + gap
            if up > best:
                best = up
            left = cur[j - 1] + gap
            if left > best:
                best = left
            cur[j] = best
        prev, cur = cur, prev
    return prev[m]


@numba.njit(cache=True)
def _nw_upper(seqs, offsets, match, mismatch, gap):
    p = offsets.shape[0] - 1
    out = np.zeros((p, p), dtype=np.int64)
    count = 0
    for i in range(p):
        a = seqs[offsets[i]:offsets[i + 1]]
        out[i, i] = _nw(a, a, match, mismatch, gap)
        for j in range(i + 1, p):
            s = _nw(a, seqs[offsets[j]:offsets[j + 1]], match, mismatch, gap)
            out[i, j] = s
            out[j, i] = s
            count += 1
    return out, count


def _encode(seqs) -> list:
    """Map sequences to int64 symbol arrays.

    Bytes map to their byte values; anything else (strings, token lists)
    goes through one symbol table shared by all sequences.
    """
    if all(isinstance(x, (bytes, bytearray, memoryview)) or hasattr(x, "bytes") for x in seqs):
        return [np.frombuffer(bytes(getattr(x, "bytes", x)), dtype=np.uint8).astype(np.int64)
                for x in seqs]
    table: dict = {}
    return [np.array([table.setdefault(sym, len(table)) for sym in x], dtype=np.int64)
            for x in seqs]


def nwsa_score(a, b, s: AlignmentScoring = AlignmentScoring()) -> int:
    """Global alignment score of two non-empty sequences (linear gap cost)."""
    if len(a) == 0 or len(b) == 0:
        raise ValueError("sequences must be non-empty")
    sa, sb = _encode([a, b])
    return int(_nw(sa, sb, s.match, s.mismatch, s.gap))


def nwsa_matrix(d: Sequence, s: AlignmentScoring = AlignmentScoring()) -> FeatureMatrix:
    """Pairwise global alignment scores over byte sequences.

    Only the upper triangle is aligned; ``stats['alignments']`` counts the
    off-diagonal alignments performed (self-scores are not counted).
    """
    if len(d) < 2:
        raise ValueError("need at least two sequences")
    arrays = _encode(list(d))
    if any(len(a) == 0 for a in arrays):
        raise ValueError("sequences must be non-empty")
    offsets = np.zeros(len(arrays) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(a) for a in arrays])
    scores, count = _nw_upper(np.concatenate(arrays), offsets, s.match, s.mismatch, s.gap)
    return FeatureMatrix(scores.astype(float), ALIGNMENT_SIMILARITY,
                         [str(i) for i in range(len(d))], {"alignments": int(count)})


def alignment_distance(scores: np.ndarray) -> np.ndarray:
    """``1 - score(i,j) / max(score(i,i), score(j,j))`` with a zero diagonal, floored at 0."""
    diag = np.diag(scores).astype(float)
    denom = np.maximum.outer(diag, diag)
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = 1.0 - scores / denom
    dist[~np.isfinite(dist)] = 1.0
    np.fill_diagonal(dist, 0.0)
    # exotic scorings can push s_ij above both self-scores
    return np.maximum(dist, 0.0)
