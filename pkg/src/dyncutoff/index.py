"""Inverted index construction, per-term score statistics and impact ordering.

On-disk layout (version 1, all binary files little-endian, no headers):

    index.manifest      key = value text, one per line
    docs.txt            external doc ids, one per line, internal id = line number
    terms.txt           vocabulary in lexicographic order, term id = line number
    doclen.bin          int64[N]        document lengths
    offsets.bin         int64[V + 1]    posting offsets per term
    post_docs.bin       int32[P]        internal doc ids, ascending within a term
    post_tfs.bin        int32[P]        within-document term frequencies
    cf.bin              int64[V]        collection frequencies
    term_stats.bin      float64[V, 3, 9]   optional, see TermStatsStore
    impact_<m>_<b>.bin  int32[P] docs + uint16[P] levels, optional
"""

from __future__ import annotations

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .analysis import Analyzer, AnalyzerConfig
from .scoring import DEFAULT_PARAMS, MEASURES, SimilarityParams, score_postings

log = logging.getLogger(__name__)

FORMAT_NAME = "dyncutoff-index"
FORMAT_VERSION = 1
STAT_NAMES = ("max", "min", "q1", "q3", "median", "amean", "hmean", "variance", "iqr")
HMEAN_EPS = 1e-6
DEFAULT_BITS = 8


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Document:
    doc_id: str
    internal_id: int
    length: int


@dataclass(frozen=True)
class CollectionStats:
    n_docs: int
    total_terms: int
    avg_len: float


@dataclass(frozen=True)
class TermPosting:
    term: str
    df: int
    cf: int
    docs: np.ndarray
    tfs: np.ndarray


# -- corpus input -----------------------------------------------------------

def read_tsv_corpus(path) -> Iterator[tuple[str, str]]:
    """Yield ``(doc_id, text)`` from ``doc_id<TAB>text`` lines."""
    path = Path(path)
    try:
        fh = path.open(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            doc_id, sep, text = line.partition("\t")
            if not sep or not doc_id:
                raise CorpusError(f"{path}:{lineno}: expected 'doc_id<TAB>text'")
            yield doc_id, text


def read_dir_corpus(path) -> Iterator[tuple[str, str]]:
    """Yield one document per regular file, id = file name, in sorted order."""
    path = Path(path)
    if not path.is_dir():
        raise CorpusError(f"cannot read corpus directory {path}")
    for f in sorted(p for p in path.iterdir() if p.is_file()):
        yield f.name, f.read_text(encoding="utf-8", errors="replace")


def read_corpus(path) -> Iterator[tuple[str, str]]:
    path = Path(path)
    return read_dir_corpus(path) if path.is_dir() else read_tsv_corpus(path)


# -- the index --------------------------------------------------------------

class PostingsIndex:
    """Immutable document-ordered inverted index over a flat posting layout."""

    def __init__(self, doc_ids, doc_lengths, terms, offsets, post_docs, post_tfs,
                 analyzer: AnalyzerConfig | None = None):
        self.doc_ids: list[str] = list(doc_ids)
        self.doc_lengths = np.asarray(doc_lengths, dtype=np.int64)
        self.terms: list[str] = list(terms)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.post_docs = np.asarray(post_docs, dtype=np.int32)
        self.post_tfs = np.asarray(post_tfs, dtype=np.int32)
        self.analyzer_config = analyzer or AnalyzerConfig()
        self.analyzer = Analyzer(self.analyzer_config)

        self.term_ids = {t: i for i, t in enumerate(self.terms)}
        self.df = np.diff(self.offsets)
        self.cf = np.add.reduceat(self.post_tfs.astype(np.int64), self.offsets[:-1]) \
            if len(self.terms) else np.zeros(0, dtype=np.int64)
        total = int(self.doc_lengths.sum())
        self.stats = CollectionStats(len(self.doc_ids), total, total / len(self.doc_ids))
        # position of each document in external-id order, used to break score ties
        order = sorted(range(len(self.doc_ids)), key=self.doc_ids.__getitem__)
        self.ext_rank = np.empty(len(order), dtype=np.int64)
        self.ext_rank[order] = np.arange(len(order))
        self.term_of_posting = np.repeat(np.arange(len(self.terms)), self.df)
        self._score_cache: dict[tuple[str, SimilarityParams], np.ndarray] = {}

    @property
    def n_postings(self) -> int:
        return len(self.post_docs)

    def document(self, internal_id: int) -> Document:
        return Document(self.doc_ids[internal_id], internal_id,
                        int(self.doc_lengths[internal_id]))

    def span(self, term_id: int) -> tuple[int, int]:
        return int(self.offsets[term_id]), int(self.offsets[term_id + 1])

    def posting(self, term: str) -> TermPosting | None:
        tid = self.term_ids.get(term)
        if tid is None:
            return None
        a, b = self.span(tid)
        return TermPosting(term, int(self.df[tid]), int(self.cf[tid]),
                           self.post_docs[a:b], self.post_tfs[a:b])

    def posting_scores(self, measure: str,
                       params: SimilarityParams = DEFAULT_PARAMS) -> np.ndarray:
        """Per-posting similarity scores, aligned with ``post_docs``."""
        key = (measure, params)
        if key not in self._score_cache:
            tid = self.term_of_posting
            s = score_postings(
                measure,
                n_docs=self.stats.n_docs,
                collection_len=self.stats.total_terms,
                avg_len=self.stats.avg_len,
                df=self.df[tid],
                cf=self.cf[tid],
                tf=self.post_tfs,
                doc_len=self.doc_lengths[self.post_docs],
                params=params,
            )
            s = np.asarray(s, dtype=np.float64)
            s.setflags(write=False)
            self._score_cache[key] = s
        return self._score_cache[key]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update("\n".join(self.doc_ids).encode())
        h.update("\n".join(self.terms).encode())
        for arr in (self.doc_lengths, self.offsets, self.post_docs, self.post_tfs):
            h.update(arr.astype(arr.dtype.newbyteorder("<")).tobytes())
        return h.hexdigest()


def build_index(documents: Iterable[tuple[str, str]],
                analyzer: AnalyzerConfig | None = None) -> PostingsIndex:
    """Index ``(doc_id, text)`` pairs; internal ids follow input order."""
    analyzer = analyzer or AnalyzerConfig()
    analyze = Analyzer(analyzer)
    doc_ids: list[str] = []
    seen: set[str] = set()
    lengths: list[int] = []
    postings: dict[str, list[tuple[int, int]]] = {}
    for doc_id, text in documents:
        if doc_id in seen:
            raise CorpusError(f"duplicate id {doc_id!r}")
        if "\n" in doc_id or "\t" in doc_id or not doc_id:
            raise CorpusError(f"invalid document id {doc_id!r}")
        seen.add(doc_id)
        internal = len(doc_ids)
        doc_ids.append(doc_id)
        tokens = analyze(text)
        lengths.append(len(tokens))
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((internal, tf))
    if not doc_ids:
        raise CorpusError("empty corpus")

    terms = sorted(postings)
    offsets = np.zeros(len(terms) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(postings[t]) for t in terms])
    post_docs = np.empty(offsets[-1], dtype=np.int32)
    post_tfs = np.empty(offsets[-1], dtype=np.int32)
    for i, t in enumerate(terms):
        block = np.asarray(postings[t], dtype=np.int64).reshape(-1, 2)
        post_docs[offsets[i]:offsets[i + 1]] = block[:, 0]
        post_tfs[offsets[i]:offsets[i + 1]] = block[:, 1]
    log.info("indexed %d documents, %d terms, %d postings",
             len(doc_ids), len(terms), len(post_docs))
    return PostingsIndex(doc_ids, lengths, terms, offsets, post_docs, post_tfs, analyzer)


# -- term statistics --------------------------------------------------------

@dataclass(frozen=True)
class ScoreSummary:
    max: float
    min: float
    q1: float
    q3: float
    median: float
    amean: float
    hmean: float
    variance: float
    iqr: float


@dataclass(frozen=True)
class TermStatBlock:
    cf: int
    df: int
    bm25: ScoreSummary
    lm: ScoreSummary
    tfidf: ScoreSummary

    def measure(self, name: str) -> ScoreSummary:
        return getattr(self, name)


class TermStatsStore:
    """Table 1 style statistics for every term, as a dense ``(V, 3, 9)`` array.

    Quartiles use linear interpolation between order statistics, variance
    is the population variance, and the harmonic mean of a posting list
    holding a nonpositive score is taken over ``score - min + 1e-6``
    (flagged in ``hmean_shifted``).
    """

    def __init__(self, terms, cf, df, values, hmean_shifted, params: SimilarityParams):
        self.terms = list(terms)
        self.term_ids = {t: i for i, t in enumerate(self.terms)}
        self.cf = np.asarray(cf, dtype=np.int64)
        self.df = np.asarray(df, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        self.hmean_shifted = np.asarray(hmean_shifted, dtype=bool)
        self.params = params

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self.term_ids

    def __getitem__(self, term: str) -> TermStatBlock:
        i = self.term_ids[term]
        summaries = [ScoreSummary(*map(float, self.values[i, m])) for m in range(len(MEASURES))]
        return TermStatBlock(int(self.cf[i]), int(self.df[i]), *summaries)

    def stat(self, term: str, name: str, measure: str | None = None) -> float:
        i = self.term_ids[term]
        if name == "cf":
            return float(self.cf[i])
        if name == "df":
            return float(self.df[i])
        return float(self.values[i, MEASURES.index(measure), STAT_NAMES.index(name)])


def _segment_summaries(scores: np.ndarray, offsets: np.ndarray, term_of: np.ndarray):
    """Vectorised order statistics and moments of each term's score list."""
    starts = offsets[:-1]
    n = np.diff(offsets).astype(np.float64)
    order = np.lexsort((scores, term_of))
    s = scores[order]

    def quantile(q):
        pos = q * (n - 1)
        lo = np.floor(pos).astype(np.int64)
        hi = np.ceil(pos).astype(np.int64)
        a, b = s[starts + lo], s[starts + hi]
        return a + (pos - lo) * (b - a)

    total = np.add.reduceat(s, starts)
    mean = total / n
    dev = s - np.repeat(mean, n.astype(np.int64))
    variance = np.add.reduceat(dev * dev, starts) / n
    smin = s[starts]
    smax = s[offsets[1:] - 1]
    q1, median, q3 = quantile(0.25), quantile(0.5), quantile(0.75)

    shifted = smin <= 0
    shift = np.where(shifted, smin - HMEAN_EPS, 0.0)
    hm_in = s - np.repeat(shift, n.astype(np.int64))
    hmean = n / np.add.reduceat(1.0 / hm_in, starts)

    out = np.stack([smax, smin, q1, q3, median, mean, hmean, variance, q3 - q1], axis=1)
    return out, shifted


def precompute_term_stats(index: PostingsIndex,
                          params: SimilarityParams = DEFAULT_PARAMS) -> TermStatsStore:
    V = len(index.terms)
    values = np.zeros((V, len(MEASURES), len(STAT_NAMES)))
    shifted = np.zeros((V, len(MEASURES)), dtype=bool)
    if V:
        for m, measure in enumerate(MEASURES):
            values[:, m, :], shifted[:, m] = _segment_summaries(
                index.posting_scores(measure, params), index.offsets, index.term_of_posting)
    return TermStatsStore(index.terms, index.cf, index.df, values, shifted, params)


# -- impact-ordered index ---------------------------------------------------

def quantize(scores, lo: float, hi: float, bits: int) -> np.ndarray:
    """Uniform quantisation of ``[lo, hi]`` into levels ``1 .. 2**bits - 1``."""
    levels = (1 << bits) - 1
    scores = np.asarray(scores, dtype=np.float64)
    if not hi > lo:
        return np.ones(scores.shape, dtype=np.int64)
    q = 1 + np.floor(levels * (scores - lo) / (hi - lo)).astype(np.int64)
    return np.clip(q, 1, levels)


class ImpactIndex:
    """Postings of each term ordered by decreasing quantised impact, then doc id."""

    def __init__(self, terms, offsets, docs, levels, *, measure: str, bits: int,
                 lo: float, hi: float, n_docs: int, ext_rank: np.ndarray):
        self.terms = list(terms)
        self.term_ids = {t: i for i, t in enumerate(self.terms)}
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.docs = np.asarray(docs, dtype=np.int32)
        self.levels = np.asarray(levels, dtype=np.uint16)
        self.measure = measure
        self.bits = bits
        self.lo, self.hi = lo, hi
        self.n_docs = n_docs
        self.ext_rank = ext_rank

    @property
    def total_postings(self) -> int:
        return len(self.docs)

    def segments(self, term: str) -> list[tuple[int, np.ndarray]]:
        tid = self.term_ids.get(term)
        if tid is None:
            return []
        a, b = int(self.offsets[tid]), int(self.offsets[tid + 1])
        lv = self.levels[a:b]
        cuts = np.flatnonzero(np.diff(lv)) + 1
        bounds = [0, *cuts.tolist(), b - a]
        return [(int(lv[s]), self.docs[a + s:a + e]) for s, e in zip(bounds[:-1], bounds[1:])]


def build_impact_index(index: PostingsIndex, measure: str = "bm25", bits: int = DEFAULT_BITS,
                       params: SimilarityParams = DEFAULT_PARAMS) -> ImpactIndex:
    if not 1 <= bits <= 16:
        raise ValueError(f"bits must be in [1, 16], got {bits}")
    scores = index.posting_scores(measure, params)
    lo = float(scores.min()) if len(scores) else 0.0
    hi = float(scores.max()) if len(scores) else 0.0
    if not hi > lo:
        log.warning("degenerate score range [%g, %g]; using a single impact level", lo, hi)
    levels = quantize(scores, lo, hi, bits)
    # within each term: level descending, then doc ascending
    order = np.lexsort((index.post_docs, -levels, index.term_of_posting))
    return ImpactIndex(index.terms, index.offsets, index.post_docs[order], levels[order],
                       measure=measure, bits=bits, lo=lo, hi=hi,
                       n_docs=index.stats.n_docs, ext_rank=index.ext_rank)


# -- persistence ------------------------------------------------------------

def _write_array(path: Path, arr: np.ndarray, dtype: str):
    path.write_bytes(np.ascontiguousarray(arr, dtype=np.dtype(dtype)).tobytes())


def _read_array(path: Path, dtype: str) -> np.ndarray:
    dt = np.dtype(dtype)
    return np.frombuffer(path.read_bytes(), dtype=dt).astype(dt.newbyteorder("="))


def read_manifest(directory) -> dict[str, str]:
    entries = {}
    for line in (Path(directory) / "index.manifest").read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    return entries


def write_manifest(directory, entries: dict[str, str]):
    lines = [f"# {FORMAT_NAME} manifest"] + [f"{k} = {v}" for k, v in entries.items()]
    (Path(directory) / "index.manifest").write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_index(index: PostingsIndex, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "docs.txt").write_text("".join(f"{x}\n" for x in index.doc_ids), encoding="utf-8")
    (d / "terms.txt").write_text("".join(f"{x}\n" for x in index.terms), encoding="utf-8")
    _write_array(d / "doclen.bin", index.doc_lengths, "<i8")
    _write_array(d / "offsets.bin", index.offsets, "<i8")
    _write_array(d / "post_docs.bin", index.post_docs, "<i4")
    _write_array(d / "post_tfs.bin", index.post_tfs, "<i4")
    _write_array(d / "cf.bin", index.cf, "<i8")
    cfg = index.analyzer_config
    write_manifest(d, {
        "format": FORMAT_NAME,
        "version": str(FORMAT_VERSION),
        "byte_order": "little",
        "n_docs": str(index.stats.n_docs),
        "n_terms": str(len(index.terms)),
        "n_postings": str(index.n_postings),
        "total_terms": str(index.stats.total_terms),
        "avg_len": repr(index.stats.avg_len),
        "analyzer.lowercase": str(int(cfg.lowercase)),
        "analyzer.stopwords": str(int(cfg.stopwords)),
        "analyzer.stem": str(int(cfg.stem)),
        "digest": index.digest(),
    })
    return d


def load_index(directory) -> PostingsIndex:
    d = Path(directory)
    if not (d / "index.manifest").exists():
        raise CorpusError(f"{d} holds no index.manifest")
    man = read_manifest(d)
    if man.get("format") != FORMAT_NAME or int(man.get("version", -1)) != FORMAT_VERSION:
        raise CorpusError(f"unsupported index format in {d}")
    analyzer = AnalyzerConfig(
        lowercase=man["analyzer.lowercase"] == "1",
        stopwords=man["analyzer.stopwords"] == "1",
        stem=man["analyzer.stem"] == "1",
    )
    index = PostingsIndex(
        (d / "docs.txt").read_text(encoding="utf-8").splitlines(),
        _read_array(d / "doclen.bin", "<i8"),
        (d / "terms.txt").read_text(encoding="utf-8").splitlines(),
        _read_array(d / "offsets.bin", "<i8"),
        _read_array(d / "post_docs.bin", "<i4"),
        _read_array(d / "post_tfs.bin", "<i4"),
        analyzer,
    )
    if index.digest() != man["digest"]:
        raise CorpusError(f"index digest mismatch in {d}")
    return index


def save_term_stats(store: TermStatsStore, directory):
    d = Path(directory)
    _write_array(d / "term_stats.bin", store.values, "<f8")
    _write_array(d / "term_stats_shifted.bin", store.hmean_shifted, "u1")
    man = read_manifest(d)
    man.update({
        "stats.layout": "float64[n_terms, measure, stat]",
        "stats.measures": ",".join(MEASURES),
        "stats.columns": ",".join(STAT_NAMES),
        "stats.variance": "population",
        "stats.quantiles": "linear-interpolation",
        "stats.hmean": f"shifted by (min - {HMEAN_EPS}) when any score <= 0",
        "stats.k1": repr(store.params.k1),
        "stats.b": repr(store.params.b),
        "stats.mu": repr(store.params.mu),
    })
    write_manifest(d, man)


def load_term_stats(directory, index: PostingsIndex | None = None) -> TermStatsStore:
    d = Path(directory)
    man = read_manifest(d)
    index = index or load_index(d)
    V = len(index.terms)
    values = _read_array(d / "term_stats.bin", "<f8").reshape(V, len(MEASURES), len(STAT_NAMES))
    shifted = _read_array(d / "term_stats_shifted.bin", "u1").reshape(V, len(MEASURES))
    params = SimilarityParams(float(man["stats.k1"]), float(man["stats.b"]), float(man["stats.mu"]))
    return TermStatsStore(index.terms, index.cf, index.df, values, shifted.astype(bool), params)


def save_impact_index(impact: ImpactIndex, directory) -> Path:
    d = Path(directory)
    name = f"impact_{impact.measure}_{impact.bits}.bin"
    with (d / name).open("wb") as fh:
        fh.write(np.ascontiguousarray(impact.docs, dtype="<i4").tobytes())
        fh.write(np.ascontiguousarray(impact.levels, dtype="<u2").tobytes())
    man = read_manifest(d)
    man[f"impact.{impact.measure}.{impact.bits}"] = (
        f"{name} range=[{impact.lo!r},{impact.hi!r}] quantizer=uniform-global")
    write_manifest(d, man)
    return d / name


def load_impact_index(directory, measure: str, bits: int,
                      index: PostingsIndex | None = None) -> ImpactIndex:
    d = Path(directory)
    index = index or load_index(d)
    man = read_manifest(d)
    entry = man[f"impact.{measure}.{bits}"]
    lo, hi = entry.split("range=[", 1)[1].split("]", 1)[0].split(",")
    raw = (d / f"impact_{measure}_{bits}.bin").read_bytes()
    P = index.n_postings
    docs = np.frombuffer(raw[:4 * P], dtype="<i4").astype(np.int32)
    levels = np.frombuffer(raw[4 * P:], dtype="<u2").astype(np.uint16)
    return ImpactIndex(index.terms, index.offsets, docs, levels, measure=measure, bits=bits,
                       lo=float(lo), hi=float(hi), n_docs=index.stats.n_docs,
                       ext_rank=index.ext_rank)

