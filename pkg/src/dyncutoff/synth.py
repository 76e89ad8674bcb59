"""Deterministic synthetic test collection for desk-scale experiments.

Documents are drawn from a topic mixture over a pseudo-word vocabulary:
each document has one latent topic and a latent quality, and mixes
topic words with Zipf-distributed background words. Queries pick a
topic and draw 1-5 terms from it, sometimes adding a background word.

The gold run comes from a "second-stage" ranker that sees the latent
signals a bag-of-words first stage cannot: it reranks every document
matching a query term by BM25 plus topic agreement plus quality. Graded
judgments for a held-out set of topics come from the same latents.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .index import PostingsIndex, build_index
from .retrieval import Query, RankedRun, Searcher
from .trec import write_qrels, write_run

_CONSONANTS = "bdfghklmnprtvz"
_VOWELS = "aeiou"


@dataclass(frozen=True)
class DeskConfig:
    n_docs: int = 6000
    n_queries: int = 2400
    n_judged: int = 50
    vocab_size: int = 12000
    n_topics: int = 300
    topic_words: int = 60
    topic_mix: float = 0.3
    topic_rank_range: tuple[int, int] = (10, 1500)
    mean_doc_len: float = 120.0
    background_zipf: float = 1.05
    topic_boost: float = 4.0
    quality_weight: float = 8.0
    gold_depth: int = 1000
    seed: int = 2016


def pseudo_words(n: int) -> list[str]:
    """``n`` distinct lowercase tokens that survive stopping and S-stemming."""
    syl = [c + v for c in _CONSONANTS for v in _VOWELS]
    out = []
    for length in itertools.count(2):
        for combo in itertools.product(syl, repeat=length):
            out.append("".join(combo))
            if len(out) == n:
                return out
    return out


@dataclass
class DeskCollection:
    config: DeskConfig
    docs: list[tuple[str, str]]
    doc_topic: np.ndarray
    doc_quality: np.ndarray
    queries: list[tuple[str, str]]
    query_topic: np.ndarray
    judged: list[str]


def generate(config: DeskConfig = DeskConfig()) -> DeskCollection:
    rng = np.random.default_rng(config.seed)
    vocab = np.array(pseudo_words(config.vocab_size))
    V = config.vocab_size

    ranks = np.arange(1, V + 1, dtype=np.float64)
    background = ranks ** -config.background_zipf
    background /= background.sum()
    bg_perm = rng.permutation(V)

    # each topic owns a small Zipf-weighted list of mid-frequency background words
    lo, hi = config.topic_rank_range
    span = np.arange(lo, hi)
    topic_vocab = np.array([bg_perm[rng.choice(span, config.topic_words, replace=False)]
                            for _ in range(config.n_topics)])
    tw = np.arange(1, config.topic_words + 1, dtype=np.float64) ** -0.8
    tw /= tw.sum()

    topic_pop = np.arange(1, config.n_topics + 1, dtype=np.float64) ** -0.6
    topic_pop /= topic_pop.sum()

    doc_topic = rng.choice(config.n_topics, config.n_docs, p=topic_pop)
    doc_quality = rng.beta(2.0, 2.0, config.n_docs)
    lengths = np.maximum(5, rng.lognormal(np.log(config.mean_doc_len) - 0.18, 0.6,
                                          config.n_docs).astype(np.int64))
    width = len(str(config.n_docs))
    docs = []
    for i in range(config.n_docs):
        n = int(lengths[i])
        n_topic = rng.binomial(n, config.topic_mix)
        words = np.concatenate([
            topic_vocab[doc_topic[i]][rng.choice(config.topic_words, n_topic, p=tw)],
            bg_perm[rng.choice(V, n - n_topic, p=background)],
        ])
        rng.shuffle(words)
        docs.append((f"D{i:0{width}d}", " ".join(vocab[words])))

    total_q = config.n_queries + config.n_judged
    query_topic = rng.choice(config.n_topics, total_q, p=topic_pop)
    qlen = rng.choice([1, 2, 3, 4, 5], total_q, p=[0.15, 0.3, 0.3, 0.15, 0.1])
    queries = []
    qwidth = len(str(total_q))
    for j in range(total_q):
        n = int(qlen[j])
        picks = topic_vocab[query_topic[j]][rng.choice(config.topic_words, n, p=tw)].tolist()
        if rng.random() < 0.4:
            picks[rng.integers(n)] = int(bg_perm[rng.choice(V, p=background)])
        queries.append((f"Q{j:0{qwidth}d}", " ".join(vocab[picks])))
    judged = [q for q, _ in queries[config.n_queries:]]
    return DeskCollection(config, docs, doc_topic, doc_quality, queries, query_topic, judged)


def second_stage_run(index: PostingsIndex, coll: DeskCollection, depth: int | None = None
                     ) -> RankedRun:
    """Gold ranking: BM25 over matching documents plus latent topic and quality terms."""
    cfg = coll.config
    depth = depth or cfg.gold_depth
    searcher = Searcher(index, "bm25")
    ext_rank = index.ext_rank
    internal = {d: i for i, d in enumerate(index.doc_ids)}
    doc_topic = np.array([coll.doc_topic[int(d[1:])] for d in index.doc_ids])
    doc_quality = np.array([coll.doc_quality[int(d[1:])] for d in index.doc_ids])
    run: RankedRun = {}
    for j, (topic, text) in enumerate(coll.queries):
        q = Query.parse(topic, text, index)
        base = searcher.exhaustive_topk(q, index.stats.n_docs)
        if not base:
            run[topic] = []
            continue
        docs = np.array([internal[d] for d, _ in base])
        bm = np.array([s for _, s in base])
        score = (bm + cfg.topic_boost * (doc_topic[docs] == coll.query_topic[j])
                 + cfg.quality_weight * doc_quality[docs])
        order = np.lexsort((ext_rank[docs], -score))[:depth]
        run[topic] = [(index.doc_ids[d], float(s)) for d, s in zip(docs[order], score[order])]
    return run


def judgments(index: PostingsIndex, coll: DeskCollection, gold: RankedRun) -> dict:
    """Graded qrels for the judged topics over a depth-50 gold pool.

    Grade 2: on-topic and high quality; grade 1: on-topic; else 0.
    """
    qtopic = {q: coll.query_topic[j] for j, (q, _) in enumerate(coll.queries)}
    qrels = {}
    for topic in coll.judged:
        grades = {}
        for d, _ in gold.get(topic, [])[:50]:
            i = int(d[1:])
            on = coll.doc_topic[i] == qtopic[topic]
            grades[d] = int(on) + int(on and coll.doc_quality[i] > 0.6)
        qrels[topic] = grades
    return qrels


def write_collection(out_dir, config: DeskConfig = DeskConfig()) -> dict[str, Path]:
    """Materialise corpus, queries, gold run and qrels as plain files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    coll = generate(config)
    paths = {
        "corpus": out / "corpus.tsv",
        "queries": out / "queries.tsv",
        "judged_queries": out / "judged_queries.tsv",
        "gold": out / "gold.run",
        "qrels": out / "qrels.txt",
        "config": out / "desk_config.txt",
    }
    paths["corpus"].write_text("".join(f"{d}\t{t}\n" for d, t in coll.docs), encoding="utf-8")
    judged = set(coll.judged)
    paths["queries"].write_text(
        "".join(f"{q}\t{t}\n" for q, t in coll.queries if q not in judged), encoding="utf-8")
    paths["judged_queries"].write_text(
        "".join(f"{q}\t{t}\n" for q, t in coll.queries if q in judged), encoding="utf-8")
    index = build_index(coll.docs)
    gold = second_stage_run(index, coll)
    write_run(gold, paths["gold"], tag="second-stage")
    write_qrels(judgments(index, coll, gold), paths["qrels"])
    paths["config"].write_text(
        "".join(f"{k} = {v}\n" for k, v in asdict(config).items()), encoding="utf-8")
    return paths
