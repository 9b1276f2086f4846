"""End-to-end pipeline, the five approach configurations and benchmarking."""
from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .capture import Dataset, Layer, detect_text_protocol, extract_header, strip_dataset
from .cluster import cosine_dissimilarity, kmeans, select_k_kmeans, upgma
from .config import SEED_KMEANS, RunConfig, derive_seed
from .features import (AlignmentScoring, alignment_distance, build_tf_matrix, doc_topic_features,
                       fit_lda, nwsa_matrix)
from .metrics import evaluate
from .optimize import lda_seed, select_header_length, select_topic_size
from .tokenize import tokenize_corpus

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """A pipeline stage failed; carries the stage name and packet indices involved."""

    def __init__(self, stage: str, message: str, packets: Sequence[int] = ()):
        self.stage = stage
        self.packets = list(packets)
        where = f" (packets {self.packets[:10]}{'...' if len(self.packets) > 10 else ''})" if self.packets else ""
        super().__init__(f"[{stage}] {message}{where}")


@dataclass(frozen=True)
class Strategy:
    name: str
    tokenizer: Optional[str]   # "ngram3" | "nemesys" | None (alignment works on bytes)
    features: str              # "tf" | "lda" | "nwsa"
    clusterer: str             # "upgma" | "kmeans"

    def __post_init__(self):
        if self.features == "nwsa" and self.clusterer != "upgma":
            raise ValueError("alignment scores are only clustered with UPGMA")

    def to_dict(self) -> dict:
        return {"name": self.name, "tokenizer": self.tokenizer, "features": self.features,
                "clusterer": self.clusterer}


NETZOB_LIKE = Strategy("NETZOB-like", None, "nwsa", "upgma")
LDA_KMEANS = Strategy("LDA+KMEANS", "ngram3", "lda", "kmeans")
LDA_UPGMA = Strategy("LDA+UPGMA", "ngram3", "lda", "upgma")
TF_UPGMA = Strategy("TF+UPGMA", "ngram3", "tf", "upgma")
# resolved per dataset by method_for
HYBRID = Strategy("HYBRID", "auto", "auto", "upgma")

STRATEGIES = {s.name: s for s in (NETZOB_LIKE, LDA_KMEANS, LDA_UPGMA, TF_UPGMA, HYBRID)}
STRATEGY_ALIASES = {"netzob": NETZOB_LIKE, "lda-kmeans": LDA_KMEANS, "lda-upgma": LDA_UPGMA,
                    "tf-upgma": TF_UPGMA, "hybrid": HYBRID}


def get_strategy(name) -> Strategy:
    if isinstance(name, Strategy):
        return name
    key = str(name)
    if key in STRATEGIES:
        return STRATEGIES[key]
    try:
        return STRATEGY_ALIASES[key.lower()]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; choose from {sorted(STRATEGY_ALIASES)}") from None


def method_for(d: Dataset, text_threshold: float = 0.75, textual_features: str = "tf") -> Strategy:
    """The concrete approach the hybrid uses for ``d``.

    TF + UPGMA on 3-byte n-grams by default; LDA features for binary
    application protocols; field tokens for textual application protocols.
    """
    if d.osi_target != Layer.APPLICATION:
        return Strategy("HYBRID", "ngram3", "tf", "upgma")
    if detect_text_protocol(d, text_threshold) == "textual":
        return Strategy("HYBRID", "nemesys", textual_features, "upgma")
    return Strategy("HYBRID", "ngram3", "lda", "upgma")


@dataclass
class AnalysisReport:
    dataset: str
    strategy: dict
    header_len: Optional[int]
    topic_size: Optional[int]
    labels: list                      # per input packet; None where the packet was skipped
    k: int
    method: str
    seed: int
    config: dict
    decisions: dict = field(default_factory=dict)
    dendrogram: Optional[list] = None
    scores: Optional[dict] = None
    stats: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self, timing: bool = True) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if not timing:
            d.pop("seconds")
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(_plain(self.to_dict(timing)), sort_keys=True, indent=2) + "\n"


def _plain(obj):
    """Convert numpy scalars/arrays nested in ``obj`` to JSON-native types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _stage(name):
    """Wrap unexpected errors from a stage into :class:`PipelineError`."""
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, PipelineError):
                raise PipelineError(name, str(exc)) from exc
            return False
    return _Ctx()


def run_pipeline(d: Dataset, s, cfg: RunConfig = RunConfig(), truth: Optional[Sequence] = None,
                 header_sweep: Optional[tuple] = None) -> AnalysisReport:
    """Strip, choose header length and topic size, extract features, cluster, score.

    ``header_sweep`` may carry a precomputed ``(L*, K*, sweep)`` result of
    :func:`select_header_length` so several strategies can share it.
    """
    t0 = time.perf_counter()
    requested = get_strategy(s)
    if requested.name == "HYBRID":
        strategy = method_for(d, cfg.text_threshold, cfg.textual_features)
    else:
        strategy = requested
    decisions: dict = {}
    stats: dict = {}
    if truth is None:
        truth = d.labels

    with _stage("strip"):
        payloads, kept = strip_dataset(d)
        if len(payloads) < 2:
            raise PipelineError("strip", f"only {len(payloads)} packets survive lower-layer stripping")
        stats["packets"] = len(d.packets)
        kept_set = set(kept)
        stats["skipped"] = [i for i in range(len(d.packets)) if i not in kept_set]

    header_len = None
    sweep_K = None
    if d.osi_target != Layer.APPLICATION:
        if cfg.header_len is not None:
            header_len = int(cfg.header_len)
            decisions["header_len"] = "config"
        else:
            with _stage("header-length"):
                if header_sweep is None:
                    header_sweep = select_header_length(d, cfg.len_range, cfg.k_range, cfg, payloads)
                header_len, sweep_K, sweep = header_sweep
                decisions["header_len"] = "optimised"
                decisions["header_sweep"] = [
                    {"length": r["length"], "best_K": r["best_K"], "isolation": r["isolation"]} for r in sweep]

    with _stage("extract"):
        slices = [extract_header(p, header_len, d.osi_target, kept[i]) for i, p in enumerate(payloads)]

    topic_size = None
    dendro = None
    if strategy.features == "nwsa":
        with _stage("features"):
            fm = nwsa_matrix(slices, AlignmentScoring(cfg.match, cfg.mismatch, cfg.gap))
            stats["alignments"] = fm.stats["alignments"]
            dissim = alignment_distance(fm.values)
            features = None
    else:
        with _stage("tokenize"):
            method = "field" if strategy.tokenizer == "nemesys" else "ngram"
            corpus = tokenize_corpus(slices, method, cfg.gram_bytes, cfg.sigma, cfg.max_field)
            stats["vocab"] = len(corpus.vocab)
        with _stage("features"):
            if strategy.features == "tf":
                features = build_tf_matrix(corpus).values
            else:
                rows = [i for i, doc in enumerate(corpus.docs) if doc]
                if len(rows) < len(corpus.docs):
                    # empty documents cannot enter LDA; remember where the rest came from
                    stats["lda_dropped"] = [kept[i] for i in range(len(corpus.docs)) if not corpus.docs[i]]
                    corpus = corpus.subset(rows)
                if cfg.topic_size is not None:
                    topic_size = int(cfg.topic_size)
                    decisions["topic_size"] = "config"
                elif sweep_K is not None and method == "ngram":
                    topic_size = int(sweep_K)
                    decisions["topic_size"] = "header-sweep"
                else:
                    topic_size, scores = select_topic_size(corpus, cfg.k_range, cfg, header_len)
                    decisions["topic_size"] = "optimised"
                    decisions["topic_sweep"] = [
                        {"K": sc.K, "origin_distance": sc.origin_distance} for sc in scores]
                seed = lda_seed(cfg, header_len, topic_size)
                model = fit_lda(corpus, topic_size, cfg.alpha, cfg.eta, cfg.iters, seed)
                stats["lda_seed"] = seed
                lda_x = doc_topic_features(model).values
                features = np.zeros((len(slices), topic_size))
                features[rows] = lda_x
            dissim = cosine_dissimilarity(features) if strategy.clusterer == "upgma" else None

    with _stage("cluster"):
        if strategy.clusterer == "upgma":
            assignment, tree = upgma(dissim, cfg.threshold)
            dendro = tree.as_lists()
        else:
            kseed = derive_seed(cfg.seed, SEED_KMEANS)
            if cfg.kmeans_k is not None:
                K = int(cfg.kmeans_k)
                decisions["kmeans_k"] = "config"
            else:
                K = select_k_kmeans(features, cfg.kmeans_k_range, kseed, cfg.kmeans_max_iters)
                decisions["kmeans_k"] = "elbow"
            assignment = kmeans(features, K, kseed, cfg.kmeans_max_iters)
            stats["kmeans_seed"] = kseed

    labels: list = [None] * len(d.packets)
    for i, lab in zip(kept, assignment.labels):
        labels[i] = int(lab)

    scores = None
    if truth is not None:
        with _stage("metrics"):
            if len(truth) != len(d.packets):
                raise PipelineError("metrics", "truth labels do not match the packet count")
            scores = evaluate(assignment.labels, [truth[i] for i in kept]).to_dict()

    params = {k: v for k, v in assignment.params.items() if k not in ("wss_trace",)}
    return AnalysisReport(
        dataset=d.name, strategy={**strategy.to_dict(), "requested": requested.name},
        header_len=header_len, topic_size=topic_size, labels=labels, k=assignment.k,
        method=assignment.method, seed=cfg.seed, config=cfg.to_dict(),
        decisions={**decisions, "cluster_params": params}, dendrogram=dendro, scores=scores,
        stats=stats, seconds=time.perf_counter() - t0)


# --------------------------------------------------------------------------
# benchmark

GRID_COLUMNS = ["dataset", "strategy", "ari", "fms", "ami", "voting_accuracy", "k",
                "header_len", "topic_size", "seconds"]


def _needs_header_sweep(d: Dataset, cfg: RunConfig) -> bool:
    return d.osi_target != Layer.APPLICATION and cfg.header_len is None


def _bench_dataset(args) -> list:
    d, strategies, cfg = args
    rows = []
    shared = None
    if _needs_header_sweep(d, cfg):
        try:
            payloads, _ = strip_dataset(d)
            shared = select_header_length(d, cfg.len_range, cfg.k_range, cfg, payloads)
        except Exception as exc:  # every cell of this dataset will fail the same way
            log.error("header sweep failed for %s: %s", d.name, exc)
    for s in strategies:
        s = get_strategy(s)
        row = dict.fromkeys(GRID_COLUMNS)
        row["dataset"], row["strategy"] = d.name, s.name
        try:
            if _needs_header_sweep(d, cfg) and shared is None:
                raise PipelineError("header-length", "header sweep failed")
            rep = run_pipeline(d, s, cfg, header_sweep=shared)
            row.update({k: rep.scores[k] for k in ("ari", "fms", "ami", "voting_accuracy")})
            row.update(k=rep.k, header_len=rep.header_len, topic_size=rep.topic_size,
                       seconds=round(rep.seconds, 3))
        except Exception as exc:
            log.error("cell (%s, %s) failed: %s", d.name, s.name, exc)
        rows.append(row)
    return rows


def run_benchmark(datasets: Sequence[Dataset], strategies: Sequence, cfg: RunConfig = RunConfig()) -> list:
    """ARI (and friends) for every (dataset, strategy) cell.

    Failed cells keep ``None`` scores and the run continues.  Datasets are
    spread over ``cfg.jobs`` worker processes; row order is always dataset
    order then strategy order.
    """
    if not datasets:
        raise ValueError("no datasets to benchmark")
    for d in datasets:
        if d.labels is None:
            raise ValueError(f"dataset {d.name!r} is not labelled")
    inner = cfg.replace(jobs=1)
    jobs = [(d, list(strategies), inner) for d in datasets]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            parts = list(pool.map(_bench_dataset, jobs))
    else:
        parts = [_bench_dataset(j) for j in jobs]
    return [row for part in parts for row in part]


def winners(grid: Sequence[dict]) -> dict:
    """Best strategy per dataset by ARI; ties keep the earlier row."""
    best: dict = {}
    for row in grid:
        if row["ari"] is None:
            continue
        cur = best.get(row["dataset"])
        if cur is None or row["ari"] > cur[1]:
            best[row["dataset"]] = (row["strategy"], row["ari"])
    return {k: v[0] for k, v in best.items()}


def write_grid(path, grid: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, GRID_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in grid:
            w.writerow({k: ("" if row[k] is None else row[k]) for k in GRID_COLUMNS})
