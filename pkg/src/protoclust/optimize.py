"""Automatic choice of LDA topic size, extracted header length and K-means K.

Topic size is scored by mean FREX exclusivity and mean semantic coherence
of each topic's top tokens.  Both means are min-max normalised over the
candidate sizes and the size farthest from the origin wins.  Header
length is chosen as the one whose topic-size trace has the most isolated
optimum.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .capture import Dataset, Layer, extract_header, strip_dataset
from .config import SEED_LDA, RunConfig, derive_seed
from .features import LDAModel, fit_lda
from .tokenize import TokenCorpus, tokenize_corpus

log = logging.getLogger(__name__)


class NoKneeError(ValueError):
    pass


@dataclass
class TopicSizeScore:
    K: int
    mean_exclusivity: float
    mean_coherence: float
    norm_excl: float = 0.0
    norm_coh: float = 0.0
    origin_distance: float = 0.0


@dataclass
class HeaderLengthScore:
    length: int
    best_K: int
    isolation: float


# --------------------------------------------------------------------------
# topic quality

def ecdf(values: np.ndarray) -> np.ndarray:
    """Empirical CDF of each entry within ``values`` (average rank / n)."""
    values = np.asarray(values, dtype=float)
    return rankdata(values, method="average") / len(values)


def frex_matrix(m: LDAModel, omega: float = 0.7) -> np.ndarray:
    """FREX of every (topic, token) pair, shape ``K x V``."""
    if not 0.0 <= omega <= 1.0:
        raise ValueError("omega must lie in [0, 1]")
    beta = np.asarray(m.beta, dtype=float)
    excl = beta / beta.sum(axis=0, keepdims=True)
    out = np.empty_like(beta)
    for k in range(beta.shape[0]):
        e_excl = ecdf(excl[k])
        e_freq = ecdf(beta[k])
        out[k] = 1.0 / (omega / e_excl + (1.0 - omega) / e_freq)
    return out


def frex(m: LDAModel, k: int, v: int, omega: float = 0.7) -> float:
    """Weighted harmonic mean of token ``v``'s exclusivity and frequency ranks in topic ``k``."""
    beta = np.asarray(m.beta, dtype=float)
    if not 0.0 <= omega <= 1.0:
        raise ValueError("omega must lie in [0, 1]")
    e_excl = ecdf(beta[k] / beta.sum(axis=0))[v]
    e_freq = ecdf(beta[k])[v]
    return 1.0 / (omega / e_excl + (1.0 - omega) / e_freq)


def top_tokens(m: LDAModel, k: int, M: int) -> np.ndarray:
    """Indices of the ``M`` highest-weight tokens of topic ``k``; ties keep vocab order."""
    return np.argsort(-np.asarray(m.beta[k], dtype=float), kind="stable")[:M]


def doc_presence(corpus: TokenCorpus) -> np.ndarray:
    """Boolean documents x vocab matrix of token presence."""
    pres = np.zeros((len(corpus.docs), len(corpus.vocab)), dtype=bool)
    for row, ids in enumerate(corpus.as_ids()):
        pres[row, ids] = True
    return pres


def semantic_coherence(m: LDAModel, k: int, M: int, corpus: TokenCorpus,
                       presence: Optional[np.ndarray] = None) -> float:
    if M < 2:
        raise ValueError("M must be >= 2")
    if M > len(corpus.vocab):
        raise ValueError(f"M={M} exceeds vocabulary size {len(corpus.vocab)}")
    if presence is None:
        presence = doc_presence(corpus)
    top = top_tokens(m, k, M)
    sub = presence[:, top].astype(np.int64)
    co = sub.T @ sub
    df = np.diag(co)
    total = 0.0
    for i in range(1, M):
        for j in range(i):
            if df[j] == 0:
                raise ValueError(f"token {corpus.vocab[top[j]]!r} occurs in no document")
            total += math.log((co[i, j] + 1) / df[j])
    return total


def score_topic_size(c: TokenCorpus, K: int, cfg: RunConfig = RunConfig(), seed: Optional[int] = None,
                     presence: Optional[np.ndarray] = None) -> TopicSizeScore:
    """Fit LDA at ``K`` and return its mean exclusivity and coherence (unnormalised)."""
    if K < 2:
        raise ValueError("K must be >= 2")
    model = fit_lda(c, K, cfg.alpha, cfg.eta, cfg.iters, cfg.seed if seed is None else seed)
    if presence is None:
        presence = doc_presence(c)
    M = min(cfg.coherence_m, len(c.vocab))
    fx = frex_matrix(model, cfg.omega)
    excl, coh = [], []
    for k in range(K):
        top = top_tokens(model, k, M)
        excl.append(fx[k, top].mean())
        coh.append(semantic_coherence(model, k, M, c, presence))
    return TopicSizeScore(K, float(np.mean(excl)), float(np.mean(coh)))


def _minmax(x: np.ndarray) -> np.ndarray:
    span = x.max() - x.min()
    if span <= 0:
        return np.zeros_like(x)
    return (x - x.min()) / span


def normalise_scores(scores: Sequence[TopicSizeScore]) -> list:
    """Fill the normalised fields and origin distance in place (sorted by K)."""
    scores = sorted(scores, key=lambda s: s.K)
    ex = _minmax(np.array([s.mean_exclusivity for s in scores]))
    co = _minmax(np.array([s.mean_coherence for s in scores]))
    for s, e, c in zip(scores, ex, co):
        s.norm_excl, s.norm_coh = float(e), float(c)
        s.origin_distance = float(math.hypot(e, c))
    return scores


def choose_topic_size(scores: Sequence[TopicSizeScore]) -> int:
    """Index (into K-sorted ``scores``) of the point farthest from the origin."""
    dist = np.array([s.origin_distance for s in scores])
    if np.all(dist == dist[0]):
        log.warning("topic-size scores are degenerate; falling back to the smallest K")
        return 0
    return int(np.argmax(dist))


def lda_seed(cfg: RunConfig, header_len: Optional[int], K: int) -> int:
    return derive_seed(cfg.seed, SEED_LDA, header_len or 0, K)


def select_topic_size(c: TokenCorpus, K_range: Sequence[int], cfg: RunConfig = RunConfig(),
                      header_len: Optional[int] = None) -> tuple:
    """Sweep ``K_range`` and pick the topic size farthest from the origin.

    Returns ``(K*, scores)`` with ``scores`` ordered by K.  Each K gets its
    own Gibbs seed derived from ``(cfg.seed, header_len, K)``.
    """
    ks = sorted(set(int(k) for k in K_range))
    if len(ks) < 3:
        raise ValueError("need at least three candidate topic sizes")
    n_tok = sum(len(d) for d in c.docs)
    usable = [k for k in ks if k <= n_tok]
    if len(usable) < len(ks):
        log.warning("topic sizes %s exceed the token count and are skipped", ks[len(usable):])
    if not usable:
        raise ValueError("corpus has fewer tokens than the smallest topic size")
    presence = doc_presence(c)
    scores = [score_topic_size(c, K, cfg, lda_seed(cfg, header_len, K), presence) for K in usable]
    scores = normalise_scores(scores)
    best = choose_topic_size(scores)
    return scores[best].K, scores


def isolation(distances: Sequence[float], opt_index: int) -> float:
    """Mean gap between the optimum's distance and each adjacent neighbour's."""
    d = [getattr(x, "origin_distance", x) for x in distances]
    if len(d) < 2:
        raise ValueError("isolation needs at least two points")
    gaps = [d[opt_index] - d[j] for j in (opt_index - 1, opt_index + 1) if 0 <= j < len(d)]
    return float(np.mean(gaps))


def header_corpus(payloads: Sequence[bytes], header_len: int, layer, cfg: RunConfig,
                  method: str = "ngram") -> TokenCorpus:
    slices = [extract_header(p, header_len, layer, i) for i, p in enumerate(payloads)]
    return tokenize_corpus(slices, method, cfg.gram_bytes, cfg.sigma, cfg.max_field)


def _sweep_one(args) -> dict:
    payloads, L, layer, K_range, cfg = args
    corpus = header_corpus(payloads, L, layer, cfg)
    K, scores = select_topic_size(corpus, K_range, cfg, header_len=L)
    opt = [s.K for s in scores].index(K)
    return {"length": L, "best_K": K, "isolation": isolation(scores, opt),
            "scores": [asdict(s) for s in scores]}


def select_header_length(d: Dataset, len_range: Sequence[int], K_range: Sequence[int],
                         cfg: RunConfig = RunConfig(), payloads: Optional[list] = None) -> tuple:
    """Choose the header length whose topic-size trace has the most isolated optimum.

    Returns ``(L*, K*, sweep)`` where ``sweep`` is a list of per-length
    dicts (``length``, ``best_K``, ``isolation``, ``scores``) sorted by length.
    """
    if d.osi_target == Layer.APPLICATION:
        raise ValueError("application-layer datasets use the full payload; no header length to select")
    lengths = sorted(set(int(x) for x in len_range))
    if not lengths:
        raise ValueError("empty header length range")
    if payloads is None:
        payloads, _ = strip_dataset(d)
    jobs = [(payloads, L, d.osi_target, tuple(K_range), cfg) for L in lengths]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            sweep = list(pool.map(_sweep_one, jobs))
    else:
        sweep = [_sweep_one(j) for j in jobs]
    best = int(np.argmax([row["isolation"] for row in sweep]))
    return sweep[best]["length"], sweep[best]["best_K"], sweep


# --------------------------------------------------------------------------
# elbow detection

def kneedle_elbow(xs: Sequence[float], ys: Sequence[float]) -> int:
    """Index of the knee of a diminishing-returns curve.

    Both axes are scaled to [0, 1]; a decreasing curve is flipped so that
    the knee is the maximum of ``y_norm - x_norm``.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if len(x) < 3 or len(x) != len(y):
        raise NoKneeError("need at least three (x, y) points")
    if np.any(np.diff(x) <= 0):
        raise ValueError("xs must be strictly increasing")
    if y.max() == y.min():
        raise NoKneeError("flat curve has no knee")
    xn = (x - x[0]) / (x[-1] - x[0])
    yn = (y - y.min()) / (y.max() - y.min())
    if y[0] > y[-1]:
        yn = 1.0 - yn
    diff = yn - xn
    knee = int(np.argmax(diff))
    if diff[knee] <= 1e-12:
        raise NoKneeError("difference curve never rises above the diagonal")
    return knee


# --------------------------------------------------------------------------
# CSV export

TOPIC_COLUMNS = ["K", "mean_exclusivity", "mean_coherence", "norm_excl", "norm_coh", "origin_distance"]


def write_topic_sweep(path, scores: Sequence[TopicSizeScore], extra: Optional[dict] = None) -> None:
    """One row per K; ``extra`` maps column name -> {K: value} (e.g. ARI)."""
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TOPIC_COLUMNS + list(extra))
        for s in scores:
            row = asdict(s) if not isinstance(s, dict) else s
            w.writerow([row[c] for c in TOPIC_COLUMNS] + [extra[c].get(row["K"], "") for c in extra])


def write_header_sweep(path, sweep: Sequence[dict], extra: Optional[dict] = None) -> None:
    """One row per (length, K): topic-size columns plus length, isolation and best_K."""
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["length", "isolation", "best_K"] + TOPIC_COLUMNS + list(extra))
        for row in sweep:
            for s in row["scores"]:
                w.writerow([row["length"], row["isolation"], row["best_K"]]
                           + [s[c] for c in TOPIC_COLUMNS]
                           + [extra[c].get(row["length"], "") for c in extra])
