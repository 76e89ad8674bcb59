"""Static pre-retrieval query features built from precomputed term statistics.

The default manifest has 70 features:

* ``mean_df``: arithmetic mean of document frequency over query terms
* per measure (bm25, lm, tfidf): harmonic and arithmetic mean of the
  terms' maximum scores, and arithmetic means of their median, mean,
  variance and IQR scores (18)
* ``min_*`` / ``max_*`` over query terms of cf, df and every per-measure
  statistic except IQR, and except the LM harmonic mean (50)
* ``qlen``: analysed query length, out-of-vocabulary terms included

Aggregates run over query term occurrences. Out-of-vocabulary terms are
left out of every aggregate; a query with no known term gets zeros. A
harmonic mean over values that are not all positive is 0.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .index import STAT_NAMES, TermStatsStore
from .scoring import MEASURES

AGGREGATES = ("mean", "hmean", "min", "max")


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    aggregate: str      # mean | hmean | min | max | qlen
    stat: str           # cf | df | one of STAT_NAMES | n/a
    measure: str        # one of MEASURES | n/a


def _spec(aggregate: str, stat: str, measure: str | None = None) -> FeatureSpec:
    name = f"{aggregate}_{stat}" + (f"_{measure}" if measure else "")
    return FeatureSpec(name, aggregate, stat, measure or "n/a")


class FeatureManifest:
    def __init__(self, specs: Sequence[FeatureSpec]):
        self.specs = list(specs)
        names = [s.name for s in self.specs]
        if len(set(names)) != len(names):
            raise ValueError("duplicate feature names in manifest")

    def __len__(self):
        return len(self.specs)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.specs]

    def lines(self) -> list[str]:
        return [f"{i}\t{s.name}\t{s.aggregate}\t{s.stat}\t{s.measure}"
                for i, s in enumerate(self.specs)]

    @property
    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.lines()).encode()).hexdigest()

    def save(self, path):
        header = [
            "# dyncutoff feature manifest v1",
            f"# count = {len(self)}",
            "# aggregates over query term occurrences; OOV terms excluded; all-OOV -> 0",
            "# harmonic mean over values not all positive -> 0",
            "# term stats: population variance, linear quartiles, shifted LM harmonic mean",
            "# columns: index, name, aggregate, stat, measure",
        ]
        Path(path).write_text("\n".join(header + self.lines()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FeatureManifest":
        specs = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            _, name, agg, stat, measure = line.split("\t")
            specs.append(FeatureSpec(name, agg, stat, measure))
        return cls(specs)

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "FeatureManifest":
        by_name = {s.name: s for s in default_manifest().specs}
        try:
            return cls([by_name[n] for n in names])
        except KeyError as exc:
            raise ValueError(f"unknown feature {exc.args[0]!r}") from None


def default_manifest() -> FeatureManifest:
    specs = [_spec("mean", "df")]
    for m in MEASURES:
        specs += [
            _spec("hmean", "max", m),
            _spec("mean", "max", m),
            _spec("mean", "median", m),
            _spec("mean", "amean", m),
            _spec("mean", "variance", m),
            _spec("mean", "iqr", m),
        ]
    per_term = [("cf", None), ("df", None)]
    for m in MEASURES:
        for stat in STAT_NAMES:
            if stat == "iqr" or (stat == "hmean" and m == "lm"):
                continue
            per_term.append((stat, m))
    for agg in ("min", "max"):
        specs += [_spec(agg, stat, m) for stat, m in per_term]
    specs.append(FeatureSpec("qlen", "qlen", "n/a", "n/a"))
    return FeatureManifest(specs)


def _hmean(x: np.ndarray) -> float:
    if np.any(x <= 0):
        return 0.0
    return float(len(x) / np.sum(1.0 / x))


def extract_features(terms: Sequence[str], store: TermStatsStore,
                     manifest: FeatureManifest) -> np.ndarray:
    # sorted so that sums, and hence the vector, do not depend on term order
    ids = sorted(store.term_ids[t] for t in terms if t in store.term_ids)
    out = np.zeros(len(manifest))
    for i, spec in enumerate(manifest.specs):
        if spec.aggregate == "qlen":
            out[i] = len(terms)
            continue
        if not ids:
            continue
        if spec.stat == "cf":
            vals = store.cf[ids].astype(np.float64)
        elif spec.stat == "df":
            vals = store.df[ids].astype(np.float64)
        else:
            vals = store.values[ids, MEASURES.index(spec.measure), STAT_NAMES.index(spec.stat)]
        if spec.aggregate == "mean":
            out[i] = vals.mean()
        elif spec.aggregate == "hmean":
            out[i] = _hmean(vals)
        elif spec.aggregate == "min":
            out[i] = vals.min()
        elif spec.aggregate == "max":
            out[i] = vals.max()
        else:
            raise ValueError(f"unknown aggregate {spec.aggregate!r}")
    return out


def extract_batch(queries: Iterable[tuple[str, Sequence[str]]], store: TermStatsStore,
                  manifest: FeatureManifest) -> tuple[list[str], np.ndarray]:
    topics, rows = [], []
    for topic, terms in queries:
        topics.append(topic)
        rows.append(extract_features(terms, store, manifest))
    X = np.vstack(rows) if rows else np.zeros((0, len(manifest)))
    return topics, X


def save_feature_csv(path, topics: Sequence[str], X: np.ndarray, manifest: FeatureManifest):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["topic", *manifest.names])
        for t, row in zip(topics, X):
            w.writerow([t, *(repr(float(v)) for v in row)])


def load_feature_csv(path) -> tuple[list[str], np.ndarray, FeatureManifest]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "topic":
        raise ValueError(f"{path}: missing feature header")
    manifest = FeatureManifest.from_names(rows[0][1:])
    topics = [r[0] for r in rows[1:]]
    X = np.array([[float(v) for v in r[1:]] for r in rows[1:]]).reshape(len(topics), len(manifest))
    return topics, X, manifest
