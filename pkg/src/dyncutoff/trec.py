"""TREC run and qrels files."""

from __future__ import annotations

import warnings
from pathlib import Path

from .retrieval import RankedRun


class TrecFormatError(ValueError):
    pass


def format_run(run: RankedRun, tag: str = "dyncutoff") -> str:
    lines = []
    for topic, ranking in run.items():
        for rank, (doc, score) in enumerate(ranking, 1):
            lines.append(f"{topic} Q0 {doc} {rank} {score:.6f} {tag}\n")
    return "".join(lines)


def write_run(run: RankedRun, path, tag: str = "dyncutoff"):
    Path(path).write_text(format_run(run, tag), encoding="utf-8")


def parse_run(path) -> RankedRun:
    """Read a TREC run. Topics keep file order.

    A topic whose ranks are not 1, 2, 3, ... in file order is re-sorted by
    score descending then doc id, with a warning.
    """
    rows: dict[str, list[tuple[int, str, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise TrecFormatError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            topic, _, doc, rank, score, _ = parts
            try:
                rows.setdefault(topic, []).append((int(rank), doc, float(score)))
            except ValueError:
                raise TrecFormatError(f"{path}:{lineno}: bad rank or score") from None
    run: RankedRun = {}
    for topic, entries in rows.items():
        docs = [d for _, d, _ in entries]
        if len(set(docs)) != len(docs):
            raise TrecFormatError(f"{path}: duplicate document in topic {topic}")
        if [r for r, _, _ in entries] != list(range(1, len(entries) + 1)):
            warnings.warn(f"{path}: topic {topic} ranks out of order; re-sorting by score",
                          stacklevel=2)
            entries = sorted(entries, key=lambda e: (-e[2], e[1]))
        run[topic] = [(d, s) for _, d, s in entries]
    return run


def parse_qrels(path) -> dict[str, dict[str, int]]:
    """Read ``topic iter doc_id grade`` lines; absent pairs are grade 0."""
    qrels: dict[str, dict[str, int]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise TrecFormatError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                grade = int(parts[3])
            except ValueError:
                raise TrecFormatError(f"{path}:{lineno}: bad grade {parts[3]!r}") from None
            qrels.setdefault(parts[0], {})[parts[2]] = grade
    return qrels


def write_qrels(qrels: dict[str, dict[str, int]], path):
    with open(path, "w", encoding="utf-8") as fh:
        for topic, docs in qrels.items():
            for doc, grade in docs.items():
                fh.write(f"{topic} 0 {doc} {grade}\n")
