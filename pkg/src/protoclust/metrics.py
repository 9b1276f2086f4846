"""Extrinsic clustering scores against ground truth."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

log = logging.getLogger(__name__)

SATISFACTORY_ARI = 0.4


@dataclass
class ContingencyTable:
    counts: np.ndarray          # predicted x truth
    pred_ids: list
    truth_ids: list

    @property
    def a(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def b(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def n(self) -> int:
        return int(self.counts.sum())


@dataclass
class EvaluationScores:
    ari: float
    fms: float
    ami: float
    voting_accuracy: float

    @property
    def satisfactory(self) -> bool:
        return self.ari >= SATISFACTORY_ARI

    def to_dict(self) -> dict:
        return {"ari": self.ari, "fms": self.fms, "ami": self.ami,
                "voting_accuracy": self.voting_accuracy, "satisfactory": self.satisfactory}


def _ordered_unique(labels) -> list:
    """Distinct labels, sorted when comparable, else in first-seen order."""
    uniq = list(dict.fromkeys(labels))
    try:
        return sorted(uniq)
    except TypeError:
        return uniq


def contingency(pred: Sequence, truth: Sequence) -> ContingencyTable:
    if len(pred) != len(truth):
        raise ValueError(f"label lists differ in length ({len(pred)} vs {len(truth)})")
    p_ids, t_ids = _ordered_unique(pred), _ordered_unique(truth)
    p_ix = {x: i for i, x in enumerate(p_ids)}
    t_ix = {x: i for i, x in enumerate(t_ids)}
    counts = np.zeros((len(p_ids), len(t_ids)), dtype=np.int64)
    for p, t in zip(pred, truth):
        counts[p_ix[p], t_ix[t]] += 1
    return ContingencyTable(counts, p_ids, t_ids)


def _comb2(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2


def _check(pred, truth):
    if len(pred) != len(truth):
        raise ValueError(f"label lists differ in length ({len(pred)} vs {len(truth)})")
    if len(pred) < 2:
        raise ValueError("need at least two items")


def adjusted_rand_index(pred: Sequence, truth: Sequence) -> float:
    _check(pred, truth)
    ct = contingency(pred, truth)
    sum_ij = _comb2(ct.counts).sum()
    sum_a = _comb2(ct.a).sum()
    sum_b = _comb2(ct.b).sum()
    expected = sum_a * sum_b / _comb2(ct.n)
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        # both partitions trivial (all-one-cluster or all-singletons)
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def fowlkes_mallows(pred: Sequence, truth: Sequence) -> float:
    _check(pred, truth)
    ct = contingency(pred, truth)
    tp = _comb2(ct.counts).sum()
    pred_pairs = _comb2(ct.a).sum()
    truth_pairs = _comb2(ct.b).sum()
    if pred_pairs == 0 or truth_pairs == 0:
        log.warning("Fowlkes-Mallows undefined without co-clustered pairs; returning 0")
        return 0.0
    return float(tp / np.sqrt(pred_pairs * truth_pairs))


def entropy(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    counts = counts[counts > 0]
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def mutual_information(ct: ContingencyTable) -> float:
    n = ct.n
    nz = ct.counts > 0
    nij = ct.counts[nz].astype(float)
    outer = np.outer(ct.a, ct.b)[nz].astype(float)
    return float((nij / n * np.log(nij * n / outer)).sum())


def expected_mutual_information(ct: ContingencyTable) -> float:
    """E[MI] under the hypergeometric model of random partitions with fixed marginals."""
    a = ct.a.astype(np.int64)
    b = ct.b.astype(np.int64)
    n = ct.n
    lg_a, lg_b = gammaln(a + 1), gammaln(b + 1)
    lg_na, lg_nb = gammaln(n - a + 1), gammaln(n - b + 1)
    lg_n = gammaln(n + 1)
    emi = 0.0
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1)
            term = nij / n * (np.log(n * nij) - np.log(ai * bj))
            log_p = (lg_a[i] + lg_b[j] + lg_na[i] + lg_nb[j] - lg_n - gammaln(nij + 1)
                     - gammaln(ai - nij + 1) - gammaln(bj - nij + 1) - gammaln(n - ai - bj + nij + 1))
            emi += float((term * np.exp(log_p)).sum())
    return emi


def adjusted_mutual_information(pred: Sequence, truth: Sequence) -> float:
    """AMI with the arithmetic-mean entropy normaliser, natural logs."""
    _check(pred, truth)
    ct = contingency(pred, truth)
    if ct.counts.shape[0] == ct.counts.shape[1] == 1 or \
            ct.counts.shape[0] == ct.counts.shape[1] == ct.n:
        return 1.0
    h_pred, h_truth = entropy(ct.a), entropy(ct.b)
    if h_pred == 0 or h_truth == 0:
        # one side constant: MI and E[MI] are both zero
        return 0.0
    mi = mutual_information(ct)
    emi = expected_mutual_information(ct)
    denom = (h_pred + h_truth) / 2 - emi
    if abs(denom) < np.finfo(float).eps:
        denom = np.finfo(float).eps if denom >= 0 else -np.finfo(float).eps
    return float((mi - emi) / denom)


def voting_accuracy(pred: Sequence, truth: Sequence) -> tuple:
    """Majority-vote accuracy and the (voted class x truth class) confusion matrix.

    Each predicted cluster takes its most common truth class; ties go to
    the smaller class.  Confusion rows and columns follow the sorted truth
    classes (see :func:`truth_classes`).
    """
    if len(pred) != len(truth):
        raise ValueError(f"label lists differ in length ({len(pred)} vs {len(truth)})")
    ct = contingency(pred, truth)
    vote = ct.counts.argmax(axis=1)
    correct = ct.counts[np.arange(len(vote)), vote].sum()
    confusion = np.zeros((len(ct.truth_ids), len(ct.truth_ids)), dtype=np.int64)
    for i, v in enumerate(vote):
        confusion[v] += ct.counts[i]
    return float(correct / ct.n), confusion


def truth_classes(truth: Sequence) -> list:
    return _ordered_unique(truth)


def evaluate(pred: Sequence, truth: Sequence) -> EvaluationScores:
    acc, _ = voting_accuracy(pred, truth)
    return EvaluationScores(adjusted_rand_index(pred, truth), fowlkes_mallows(pred, truth),
                            adjusted_mutual_information(pred, truth), acc)


def write_confusion(path, confusion: np.ndarray, classes: Sequence) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["voted\\truth"] + [str(c) for c in classes])
        for c, row in zip(classes, confusion):
            w.writerow([str(c)] + [int(x) for x in row])
