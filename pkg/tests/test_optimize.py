import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from protoclust.config import RunConfig
from protoclust.features import LDAModel
from protoclust.optimize import (NoKneeError, TopicSizeScore, choose_topic_size, ecdf, frex,
                                 frex_matrix, isolation, kneedle_elbow, normalise_scores,
                                 score_topic_size, semantic_coherence, write_topic_sweep)
from protoclust.tokenize import TokenCorpus

# two topics over five tokens; all ranks distinct inside each row
BETA = np.array([[8.0, 4.0, 2.0, 1.0, 3.0],
                 [1.0, 2.0, 3.0, 4.0, 9.0]])


def _model(beta=BETA, vocab=None):
    K, V = beta.shape
    return LDAModel(K, beta, np.full((1, K), 1 / K), 0.1, 0.01, 0, 1, vocab or [f"v{i}" for i in range(V)])


def test_ecdf_average_ranks():
    assert ecdf([3, 1, 2]).tolist() == [1.0, 1 / 3, 2 / 3]
    assert ecdf([1, 1, 2, 3]).tolist() == [0.375, 0.375, 0.75, 1.0]


def test_frex_hand_computed():
    m = _model()
    # topic 0: exclusivity 8/9, 4/6, 2/5, 1/5, 3/12 -> ECDF 1, .8, .6, .2, .4
    #          frequency   8, 4, 2, 1, 3           -> ECDF 1, .8, .4, .2, .6
    assert frex(m, 0, 2) == pytest.approx(1 / (0.7 / 0.6 + 0.3 / 0.4), abs=1e-12)
    assert frex(m, 0, 4) == pytest.approx(1 / (0.7 / 0.4 + 0.3 / 0.6), abs=1e-12)
    assert frex(m, 0, 0) == pytest.approx(1.0, abs=1e-12)
    # topic 1: exclusivity 1/9, 2/6, 3/5, 4/5, 9/12 -> ECDF .2, .4, .6, 1, .8
    assert frex(m, 1, 3) == pytest.approx(1 / (0.7 / 1.0 + 0.3 / 0.8), abs=1e-12)
    assert frex(m, 1, 4) == pytest.approx(1 / (0.7 / 0.8 + 0.3 / 1.0), abs=1e-12)


def test_frex_omega_zero_is_frequency_ecdf():
    m = _model()
    for v in range(5):
        assert frex(m, 0, v, omega=0.0) == pytest.approx(ecdf(BETA[0])[v], abs=1e-12)
    np.testing.assert_allclose(frex_matrix(m, 0.0)[1], ecdf(BETA[1]), atol=1e-12)
    with pytest.raises(ValueError):
        frex(m, 0, 0, omega=1.5)


@given(st.lists(st.floats(0.01, 100), min_size=6, max_size=6), st.floats(0.05, 1.0))
def test_frex_bounded(vals, omega):
    m = _model(np.array(vals).reshape(2, 3))
    fx = frex_matrix(m, omega)
    assert np.all(fx > 0) and np.all(fx <= 1 + 1e-12)


def _coh_model(weights):
    return _model(np.array([weights, weights[::-1]]), [f"t{i}" for i in range(len(weights))])


@pytest.mark.parametrize("d", [1, 2, 5, 13])
def test_coherence_closed_forms(d):
    m = _coh_model([5.0, 4.0, 1.0, 1.0, 1.0])
    together = TokenCorpus([["t0", "t1"]] * d + [["t2", "t3", "t4"]])
    assert semantic_coherence(m, 0, 2, together) == pytest.approx(math.log((d + 1) / d), abs=1e-12)
    apart = TokenCorpus([["t0"]] * d + [["t1"]] * 3 + [["t2", "t3", "t4"]])
    assert semantic_coherence(m, 0, 2, apart) == pytest.approx(math.log(1 / d), abs=1e-12)


def test_coherence_brute_force():
    rng = np.random.default_rng(4)
    vocab = [f"t{i}" for i in range(8)]
    docs = [list(rng.choice(vocab, rng.integers(1, 6))) for _ in range(10)]
    c = TokenCorpus(docs, vocab=vocab)
    present = {t for doc in docs for t in doc}
    weights = [float(10 - i) if vocab[i] in present else 0.001 * (i + 1) for i in range(8)]
    m = _model(np.array([weights, weights[::-1]]), vocab)
    top = [int(i) for i in np.argsort(-np.array(weights), kind="stable")[:5]]
    assert semantic_coherence(m, 0, 5, c) == pytest.approx(oracles.coherence(top, docs, vocab), abs=1e-12)


def test_coherence_guards():
    m = _coh_model([5.0, 4.0, 1.0])
    c = TokenCorpus([["t0", "t1", "t2"]])
    with pytest.raises(ValueError):
        semantic_coherence(m, 0, 1, c)
    with pytest.raises(ValueError):
        semantic_coherence(m, 0, 4, c)


def test_isolation_examples():
    assert isolation([0.2, 0.9, 0.3], 1) == pytest.approx(0.65)
    assert isolation([0.9, 0.5, 0.1], 0) == pytest.approx(0.4)
    assert isolation([0.4, 0.4, 0.4], 1) == 0.0


@given(st.lists(st.floats(0, 2), min_size=2, max_size=12))
def test_isolation_nonnegative_at_argmax(dist):
    assert isolation(dist, int(np.argmax(dist))) >= 0


def test_choose_topic_size_unit_corner():
    scores = normalise_scores([TopicSizeScore(2, 0.1, -5), TopicSizeScore(3, 0.9, -1),
                               TopicSizeScore(4, 0.5, -3)])
    assert (scores[1].norm_excl, scores[1].norm_coh) == (1.0, 1.0)
    assert scores[choose_topic_size(scores)].K == 3
    assert scores[1].origin_distance == pytest.approx(math.sqrt(2))


def test_choose_topic_size_ties_and_degenerate():
    scores = normalise_scores([TopicSizeScore(k, 0.5, -1.0) for k in (2, 3, 4)])
    assert choose_topic_size(scores) == 0
    tied = normalise_scores([TopicSizeScore(2, 1.0, 0.0), TopicSizeScore(3, 0.0, 1.0),
                             TopicSizeScore(4, 0.5, 0.5)])
    assert choose_topic_size(tied) == 0


def test_kneedle_examples():
    assert kneedle_elbow([1, 2, 3, 4, 5], [100, 20, 18, 17, 16]) == 1
    assert kneedle_elbow([1, 2, 3, 4], [10, 1, 1, 1]) == 1
    with pytest.raises(NoKneeError):
        kneedle_elbow([1, 2, 3, 4, 5], [5, 4, 3, 2, 1])
    with pytest.raises(NoKneeError):
        kneedle_elbow([1, 2, 3], [2, 2, 2])


def _planted(n_topics, n_docs=120, seed=0):
    rng = np.random.default_rng(seed)
    topics = [[f"k{t}w{i}" for i in range(10)] for t in range(n_topics)]
    docs = [list(rng.choice(topics[i % n_topics], rng.integers(12, 20))) for i in range(n_docs)]
    return TokenCorpus(docs)


def test_score_topic_size_deterministic():
    c = _planted(3)
    cfg = RunConfig(iters=60)
    assert score_topic_size(c, 3, cfg, seed=5) == score_topic_size(c, 3, cfg, seed=5)
    with pytest.raises(ValueError):
        score_topic_size(c, 1, cfg)


def test_coherence_falls_past_single_structure():
    c = _planted(1)
    cfg = RunConfig(iters=100)
    coh = [score_topic_size(c, K, cfg, seed=K).mean_coherence for K in range(2, 11)]
    # more topics than structure: mean coherence trends down
    assert np.corrcoef(range(2, 11), coh)[0, 1] < 0


def test_topic_sweep_csv(tmp_path):
    scores = normalise_scores([TopicSizeScore(2, 0.1, -5), TopicSizeScore(3, 0.9, -1)])
    write_topic_sweep(tmp_path / "s.csv", scores, {"ari": {2: 0.5, 3: 0.75}})
    rows = list(csv.DictReader(open(tmp_path / "s.csv")))
    assert list(rows[0]) == ["K", "mean_exclusivity", "mean_coherence", "norm_excl", "norm_coh",
                             "origin_distance", "ari"]
    assert [r["ari"] for r in rows] == ["0.5", "0.75"]
