"""Candidate generation: exhaustive top-k, safe WAND and score-at-a-time.

Document scores are bag-of-words sums of per-term scores over the query
terms a document contains, each term weighted by its query frequency.
Terms are always summed in lexicographic order so every algorithm
produces bit-identical floating point scores. Ties rank by ascending
external document id.
"""

from __future__ import annotations

import heapq
import math
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .index import ImpactIndex, PostingsIndex
from .scoring import DEFAULT_PARAMS, SimilarityParams

# (external doc id, score) in rank order; rank = position + 1
Ranking = list[tuple[str, float]]
RankedRun = dict[str, Ranking]


@dataclass(frozen=True)
class Query:
    topic_id: str
    terms: tuple[str, ...]

    @classmethod
    def parse(cls, topic_id: str, text: str, index: PostingsIndex) -> "Query":
        return cls(topic_id, tuple(index.analyzer(text)))


@dataclass
class EvalCounters:
    postings_total: int = 0
    postings_scored: int = 0
    docs_scored: int = 0


def read_queries(path) -> list[tuple[str, str]]:
    """Read ``topic_id<TAB>query text`` lines."""
    out, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            topic, sep, text = line.partition("\t")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected 'topic_id<TAB>query'")
            if topic in seen:
                raise ValueError(f"{path}:{lineno}: duplicate topic {topic!r}")
            seen.add(topic)
            out.append((topic, text))
    return out


def _weighted_terms(index, terms: Iterable[str]) -> list[tuple[int, int]]:
    """(term id, query frequency) for in-vocabulary terms, lexicographic order."""
    counts = Counter(t for t in terms if t in index.term_ids)
    return [(index.term_ids[t], counts[t]) for t in sorted(counts)]


def _rank(doc_ids: list[str], ext_rank: np.ndarray, docs: np.ndarray, scores: np.ndarray,
          k: int) -> Ranking:
    order = np.lexsort((ext_rank[docs], -scores))[:k]
    return [(doc_ids[d], float(s)) for d, s in zip(docs[order].tolist(), scores[order].tolist())]


class Searcher:
    """Scores queries against one index under one similarity measure."""

    def __init__(self, index: PostingsIndex, measure: str = "bm25",
                 params: SimilarityParams = DEFAULT_PARAMS):
        self.index = index
        self.measure = measure
        self.params = params
        self.scores = index.posting_scores(measure, params)
        # per-term upper bound on a single posting's contribution
        starts = index.offsets[:-1]
        self.max_scores = (np.maximum.reduceat(self.scores, starts)
                           if len(starts) else np.zeros(0))
        self._ext_rank = index.ext_rank.tolist()

    def exhaustive_topk(self, query: Query, k: int,
                        counters: EvalCounters | None = None) -> Ranking:
        if k < 1:
            raise ValueError("k must be >= 1")
        idx = self.index
        acc = np.zeros(idx.stats.n_docs)
        hit = np.zeros(idx.stats.n_docs, dtype=bool)
        total = 0
        for tid, w in _weighted_terms(idx, query.terms):
            a, b = idx.span(tid)
            docs = idx.post_docs[a:b]
            acc[docs] += w * self.scores[a:b]
            hit[docs] = True
            total += b - a
        if counters is not None:
            counters.postings_total += total
            counters.postings_scored += total
        docs = np.flatnonzero(hit)
        if counters is not None:
            counters.docs_scored += len(docs)
        return _rank(idx.doc_ids, idx.ext_rank, docs, acc[docs], k)

    def wand_topk(self, query: Query, k: int,
                  counters: EvalCounters | None = None) -> Ranking:
        """Document-at-a-time WAND, safe to rank k under the tie rule."""
        if k < 1:
            raise ValueError("k must be >= 1")
        idx = self.index
        ext_rank = self._ext_rank
        cursors = []
        total = 0
        for order, (tid, w) in enumerate(_weighted_terms(idx, query.terms)):
            a, b = idx.span(tid)
            ub = w * max(float(self.max_scores[tid]), 0.0)
            cursors.append(_Cursor(order, w, idx.post_docs[a:b].tolist(),
                                   self.scores[a:b].tolist(), ub))
            total += b - a
        n_terms = len(cursors)
        heap: list[tuple[float, int, int]] = []  # (score, -ext_rank, doc); root = worst
        scored = 0
        docs_scored = 0
        theta = -math.inf
        live = [c for c in cursors if c.pos < len(c.docs)]
        while live:
            live.sort(key=_Cursor.current)
            if len(heap) == k:
                theta = heap[0][0]
            slack = 1e-9 * (1.0 + abs(theta)) if theta != -math.inf else 0.0
            acc = 0.0
            pivot = -1
            for i, c in enumerate(live):
                acc += c.ub
                if acc + slack >= theta:
                    pivot = i
                    break
            if pivot < 0:
                break
            pdoc = live[pivot].current()
            if live[0].current() == pdoc:
                # every cursor on pdoc contributes; sum in term order
                parts = [None] * n_terms
                for c in live:
                    if c.current() != pdoc:
                        break
                    parts[c.order] = c.w * c.scores[c.pos]
                    c.pos += 1
                score = 0.0
                for p in parts:
                    if p is not None:
                        score += p
                        scored += 1
                docs_scored += 1
                key = (score, -ext_rank[pdoc], pdoc)
                if len(heap) < k:
                    heapq.heappush(heap, key)
                elif key[:2] > heap[0][:2]:
                    heapq.heapreplace(heap, key)
            else:
                # advance the longest preceding list that is still short of the pivot
                behind = [i for i in range(pivot) if live[i].current() < pdoc]
                j = max(behind, key=lambda i: len(live[i].docs) - live[i].pos)
                c = live[j]
                c.pos = bisect_left(c.docs, pdoc, c.pos)
            live = [c for c in live if c.pos < len(c.docs)]
        if counters is not None:
            counters.postings_total += total
            counters.postings_scored += scored
            counters.docs_scored += docs_scored
        heap.sort(key=lambda e: (-e[0], -e[1]))
        return [(idx.doc_ids[d], s) for s, _, d in heap]


@dataclass
class _Cursor:
    order: int
    w: int
    docs: list[int]
    scores: list[float]
    ub: float
    pos: int = field(default=0)

    def current(self) -> int:
        return self.docs[self.pos]


# -- score-at-a-time --------------------------------------------------------

def impact_schedule(impact: ImpactIndex, query: Query) -> tuple[np.ndarray, np.ndarray]:
    """Postings of the query in processing order, as (docs, weighted impacts).

    Segments are ordered by impact descending, then term, and are read in
    document order; the schedule for any budget is a prefix of this one.
    """
    counts = Counter(t for t in query.terms if t in impact.term_ids)
    segs = []
    for term in sorted(counts):
        for level, docs in impact.segments(term):
            segs.append((-level, term, level * counts[term], docs))
    segs.sort(key=lambda s: (s[0], s[1]))
    if not segs:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    docs = np.concatenate([s[3] for s in segs]).astype(np.int64)
    imps = np.concatenate([np.full(len(s[3]), s[2], dtype=np.int64) for s in segs])
    return docs, imps


def saat_rho(impact: ImpactIndex, query: Query, rho: int, k: int, doc_ids: list[str],
             counters: EvalCounters | None = None) -> Ranking:
    """Accumulate integer impacts over the first ``rho`` scheduled postings."""
    if rho < 0:
        raise ValueError("rho must be >= 0")
    if k < 1:
        raise ValueError("k must be >= 1")
    docs, imps = impact_schedule(impact, query)
    if counters is not None:
        counters.postings_total += len(docs)
        counters.postings_scored += min(rho, len(docs))
    docs, imps = docs[:rho], imps[:rho]
    if len(docs) == 0:
        return []
    acc = np.bincount(docs, weights=imps, minlength=impact.n_docs)
    touched = np.unique(docs)
    return _rank(doc_ids, impact.ext_rank, touched, acc[touched], k)


def exhaustive_quantized(impact: ImpactIndex, query: Query, k: int,
                         doc_ids: list[str]) -> Ranking:
    return saat_rho(impact, query, impact.total_postings, k, doc_ids)


def query_postings(impact: ImpactIndex, query: Query) -> int:
    counts = set(t for t in query.terms if t in impact.term_ids)
    return sum(int(impact.offsets[impact.term_ids[t] + 1] - impact.offsets[impact.term_ids[t]])
               for t in counts)


def run_batch(queries: Iterable[Query], fn: Callable[[Query], Ranking]) -> RankedRun:
    return {q.topic_id: fn(q) for q in queries}
