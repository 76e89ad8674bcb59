from __future__ import annotations

import numpy as np
import pytest

from dyncutoff.analysis import AnalyzerConfig
from dyncutoff.index import ImpactIndex, build_impact_index, build_index
from dyncutoff.retrieval import (EvalCounters, Query, Searcher, exhaustive_quantized,
                                 impact_schedule, query_postings, read_queries, saat_rho)

RAW = AnalyzerConfig(lowercase=True, stopwords=False, stem=False)


def random_corpus(rng, n_docs, vocab=12):
    words = [f"w{i}" for i in range(vocab)]
    p = 1.0 / np.arange(1, vocab + 1)
    p /= p.sum()
    docs = []
    for i in rng.permutation(n_docs):
        n = int(rng.integers(1, 15))
        docs.append((f"doc{i:04d}", " ".join(rng.choice(words, n, p=p))))
    return docs, words


def brute_force(index, measure, terms, k):
    """Score every document term by term in sorted term order; rank by score then id."""
    scores = index.posting_scores(measure)
    totals = {}
    for t in sorted(set(terms)):
        if t not in index.term_ids:
            continue
        w = terms.count(t)
        a, b = index.span(index.term_ids[t])
        for d, s in zip(index.post_docs[a:b].tolist(), scores[a:b].tolist()):
            totals[d] = totals.get(d, 0.0) + w * s
    ranked = sorted(totals.items(), key=lambda e: (-e[1], index.doc_ids[e[0]]))
    return [(index.doc_ids[d], s) for d, s in ranked[:k]]


def test_exhaustive_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(40):
        docs, words = random_corpus(rng, int(rng.integers(5, 80)))
        idx = build_index(docs, RAW)
        s = Searcher(idx, "bm25")
        terms = list(rng.choice(words + ["nope"], int(rng.integers(1, 6))))
        k = int(rng.integers(1, 25))
        assert s.exhaustive_topk(Query("q", tuple(terms)), k) == brute_force(idx, "bm25", terms, k)


def test_three_doc_hand_example():
    idx = build_index([("a", "x y"), ("b", "x x z"), ("c", "z")], RAW)
    s = Searcher(idx, "tfidf")
    top = s.exhaustive_topk(Query("q", ("x",)), 1)
    # tfidf(x) = (1 + ln tf) ln(1 + 3/2) / len: a -> 1/2 * L, b -> (1 + ln 2)/3 * L
    assert top[0][0] == "b"


@pytest.mark.parametrize("measure", ["bm25", "lm", "tfidf"])
def test_wand_is_safe(measure):
    rng = np.random.default_rng(5)
    fewer = 0
    n = 150
    for _ in range(n):
        docs, words = random_corpus(rng, int(rng.integers(1, 200)))
        idx = build_index(docs, RAW)
        s = Searcher(idx, measure)
        q = Query("q", tuple(rng.choice(words, int(rng.integers(1, 6)))))
        k = int(rng.integers(1, 21))
        ce, cw = EvalCounters(), EvalCounters()
        assert s.wand_topk(q, k, cw) == s.exhaustive_topk(q, k, ce)
        assert cw.postings_total == ce.postings_total
        fewer += cw.postings_scored <= ce.postings_scored
    assert fewer == n


def test_ties_break_by_external_id():
    idx = build_index([("zeta", "t"), ("alpha", "t"), ("mid", "t"), ("beta", "u")], RAW)
    s = Searcher(idx, "bm25")
    q = Query("q", ("t",))
    assert [d for d, _ in s.exhaustive_topk(q, 2)] == ["alpha", "mid"]
    assert [d for d, _ in s.wand_topk(q, 2)] == ["alpha", "mid"]


def test_edge_cases():
    idx = build_index([("a", "x"), ("b", "y")], RAW)
    s = Searcher(idx, "bm25")
    assert s.exhaustive_topk(Query("q", ("oov",)), 5) == []
    assert s.wand_topk(Query("q", ()), 5) == []
    assert len(s.wand_topk(Query("q", ("x", "y")), 10)) == 2
    with pytest.raises(ValueError):
        s.wand_topk(Query("q", ("x",)), 0)


def hand_impact():
    # term a: doc0 level 3, doc2 level 3, doc1 level 1; term b: doc1 level 2, doc0 level 1
    return ImpactIndex(["a", "b"], [0, 3, 5], [0, 2, 1, 1, 0], [3, 3, 1, 2, 1],
                       measure="bm25", bits=2, lo=0.0, hi=1.0, n_docs=3,
                       ext_rank=np.arange(3))


def test_saat_hand_trace():
    imp = hand_impact()
    ids = ["d0", "d1", "d2"]
    q = Query("q", ("b", "a"))
    docs, imps = impact_schedule(imp, q)
    assert docs.tolist() == [0, 2, 1, 1, 0]
    assert imps.tolist() == [3, 3, 2, 1, 1]
    assert saat_rho(imp, q, 0, 10, ids) == []
    assert saat_rho(imp, q, 2, 10, ids) == [("d0", 3.0), ("d2", 3.0)]
    assert saat_rho(imp, q, 3, 10, ids) == [("d0", 3.0), ("d2", 3.0), ("d1", 2.0)]
    assert saat_rho(imp, q, 5, 10, ids) == [("d0", 4.0), ("d1", 3.0), ("d2", 3.0)]
    assert saat_rho(imp, q, 99, 1, ids) == [("d0", 4.0)]
    # a repeated query term doubles its impacts
    assert saat_rho(imp, Query("q", ("a", "a")), 2, 10, ids) == [("d0", 6.0), ("d2", 6.0)]
    c = EvalCounters()
    saat_rho(imp, q, 3, 10, ids, c)
    assert (c.postings_total, c.postings_scored) == (5, 3)
    assert query_postings(imp, q) == 5
    with pytest.raises(ValueError):
        saat_rho(imp, q, -1, 10, ids)


def test_saat_full_budget_is_exhaustive_quantized():
    rng = np.random.default_rng(2)
    docs, words = random_corpus(rng, 120)
    idx = build_index(docs, RAW)
    imp = build_impact_index(idx, "bm25", 8)
    for _ in range(20):
        q = Query("q", tuple(rng.choice(words, 3)))
        full = exhaustive_quantized(imp, q, 50, idx.doc_ids)
        assert saat_rho(imp, q, query_postings(imp, q), 50, idx.doc_ids) == full
        assert saat_rho(imp, q, 10**9, 50, idx.doc_ids) == full


def test_read_queries(tmp_path):
    p = tmp_path / "q.tsv"
    p.write_text("1\thello world\n2\tfoo\n", encoding="utf-8")
    assert read_queries(p) == [("1", "hello world"), ("2", "foo")]
    p.write_text("1\ta\n1\tb\n", encoding="utf-8")
    with pytest.raises(ValueError, match="duplicate"):
        read_queries(p)
