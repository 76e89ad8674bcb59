"""Per-term similarity functions: BM25, Dirichlet-smoothed LM and TF-IDF.

All logarithms are natural. Each scorer accepts Python scalars or numpy
arrays (broadcast elementwise) and is pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MEASURES = ("bm25", "lm", "tfidf")


@dataclass(frozen=True)
class SimilarityParams:
    k1: float = 0.9
    b: float = 0.4
    mu: float = 2500.0

    def __post_init__(self):
        if not self.k1 > 0:
            raise ValueError(f"k1 must be positive, got {self.k1}")
        if not 0 <= self.b <= 1:
            raise ValueError(f"b must lie in [0, 1], got {self.b}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")


DEFAULT_PARAMS = SimilarityParams()


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


def bm25(n_docs, df, tf, doc_len, avg_len, params: SimilarityParams = DEFAULT_PARAMS):
    """log((N - f_t + .5)/(f_t + .5)) * tf(k1+1) / (tf + k1((1-b) + b*l_d/l_avg))."""
    df = np.asarray(df, dtype=np.float64)
    tf = np.asarray(tf, dtype=np.float64)
    doc_len = np.asarray(doc_len, dtype=np.float64)
    if np.any(df < 1) or np.any(df > n_docs):
        raise ValueError("document frequency must satisfy 1 <= f_t <= N")
    if np.any(tf < 1) or np.any(doc_len < 1):
        raise ValueError("bm25 needs f_td >= 1 and l_d >= 1")
    k1, b = params.k1, params.b
    idf = np.log((n_docs - df + 0.5) / (df + 0.5))
    tf_part = tf * (k1 + 1.0) / (tf + k1 * ((1.0 - b) + b * doc_len / avg_len))
    return _out(idf * tf_part)


def lm_dirichlet(cf, collection_len, tf, doc_len, mu: float = DEFAULT_PARAMS.mu):
    """log((f_td + mu * C_t/|C|) / (l_d + mu))."""
    cf = np.asarray(cf, dtype=np.float64)
    tf = np.asarray(tf, dtype=np.float64)
    doc_len = np.asarray(doc_len, dtype=np.float64)
    if np.any(cf < 1) or collection_len < 1:
        raise ValueError("lm_dirichlet needs C_t >= 1 and |C| >= 1")
    return _out(np.log((tf + mu * cf / collection_len) / (doc_len + mu)))


def tfidf(n_docs, df, tf, doc_len):
    """(1/l_d) * (1 + log f_td) * log(1 + N/f_t)."""
    df = np.asarray(df, dtype=np.float64)
    tf = np.asarray(tf, dtype=np.float64)
    doc_len = np.asarray(doc_len, dtype=np.float64)
    if np.any(tf < 1) or np.any(doc_len < 1):
        raise ValueError("tfidf needs f_td >= 1 and l_d >= 1")
    return _out((1.0 / doc_len) * (1.0 + np.log(tf)) * np.log(1.0 + n_docs / df))


def score_postings(measure: str, *, n_docs, collection_len, avg_len, df, cf, tf, doc_len,
                   params: SimilarityParams = DEFAULT_PARAMS):
    """Score a batch of (term, document) pairs under one measure."""
    if measure == "bm25":
        return bm25(n_docs, df, tf, doc_len, avg_len, params)
    if measure == "lm":
        return lm_dirichlet(cf, collection_len, tf, doc_len, params.mu)
    if measure == "tfidf":
        return tfidf(n_docs, df, tf, doc_len)
    raise ValueError(f"unknown measure {measure!r}; expected one of {MEASURES}")
