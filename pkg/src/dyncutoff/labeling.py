"""Turn MED sweeps over a cutoff grid into ordinal class labels."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .retrieval import RankedRun, Ranking

K_GRID_WEB = (20, 50, 100, 200, 500, 1000, 2000, 5000, 10000)
RHO_GRID_WEB = (100_000, 200_000, 500_000, 1_000_000, 2_000_000, 5_000_000,
                  10_000_000, 20_000_000, 50_000_000)


@dataclass(frozen=True)
class CutoffGrid:
    knob: str
    values: tuple[int, ...]

    def __post_init__(self):
        if self.knob not in ("k", "rho"):
            raise ValueError(f"knob must be 'k' or 'rho', got {self.knob!r}")
        vals = tuple(int(v) for v in self.values)
        if len(vals) < 2 or any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("grid needs at least 2 strictly increasing values")
        object.__setattr__(self, "values", vals)

    @property
    def c(self) -> int:
        return len(self.values)

    def value(self, cls: int) -> int:
        return self.values[cls - 1]


@dataclass
class MedTable:
    topics: list[str]
    grid: CutoffGrid
    values: np.ndarray  # (topics, cutoffs)
    metric: str = "rbp"

    def row(self, topic: str) -> np.ndarray:
        return self.values[self.topics.index(topic)]

    def subset(self, topics: Sequence[str]) -> "MedTable":
        pos = {t: i for i, t in enumerate(self.topics)}
        return MedTable(list(topics), self.grid, self.values[[pos[t] for t in topics]], self.metric)

    def save(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["topic", "cutoff", "med"])
            for t, row in zip(self.topics, self.values):
                for v, m in zip(self.grid.values, row):
                    w.writerow([t, v, repr(float(m))])

    @classmethod
    def load(cls, path, knob: str = "k", metric: str = "rbp") -> "MedTable":
        cells: dict[str, dict[int, float]] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                cells.setdefault(rec["topic"], {})[int(rec["cutoff"])] = float(rec["med"])
        cutoffs = sorted({c for row in cells.values() for c in row})
        grid = CutoffGrid(knob, tuple(cutoffs))
        topics = list(cells)
        missing = [t for t in topics if len(cells[t]) != len(cutoffs)]
        if missing:
            raise ValueError(f"incomplete MED table rows: {missing[:5]}")
        values = np.array([[cells[t][c] for c in cutoffs] for t in topics])
        return cls(topics, grid, values, metric)


def rerank_pool(gold: Ranking, pool: Ranking) -> Ranking:
    """Order a candidate pool as the gold ranker would.

    Pool documents the gold list holds come first in gold order; the rest
    follow in pool order.
    """
    members = {d for d, _ in pool}
    head = [(d, s) for d, s in gold if d in members]
    seen = {d for d, _ in head}
    return head + [(d, s) for d, s in pool if d not in seen]


def sweep_med(gold: RankedRun, runner: Callable[[str, int], Ranking], grid: CutoffGrid,
              med: Callable[[Ranking, Ranking], float], *, rerank: bool = True,
              metric: str = "rbp") -> MedTable:
    """MED between gold and the candidate at every grid cutoff, for every gold topic.

    ``runner(topic, cutoff)`` returns the candidate list; an empty list is a
    legal answer. With ``rerank`` the candidate is first ordered by gold.
    """
    topics = list(gold)
    values = np.zeros((len(topics), grid.c))
    for i, topic in enumerate(topics):
        for j, v in enumerate(grid.values):
            cand = runner(topic, v)
            if rerank:
                cand = rerank_pool(gold[topic], cand)
            values[i, j] = med(gold[topic], cand)
    return MedTable(topics, grid, values, metric)


def assign_labels(table: MedTable, eps: float) -> dict[str, int]:
    """Class of each topic: 1-based index of the first cutoff with MED <= eps, else c."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    ok = table.values <= eps
    first = np.where(ok.any(axis=1), ok.argmax(axis=1) + 1, table.grid.c)
    return {t: int(c) for t, c in zip(table.topics, first)}


def multiclass_to_binary(labels: Sequence[int], c: int) -> np.ndarray:
    """c-1 binary label vectors: row i-1 is 0 where label <= i, else 1."""
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 1 or labels.max() > c):
        raise ValueError(f"labels must lie in 1..{c}")
    stages = np.arange(1, c)[:, None]
    return (labels[None, :] > stages).astype(np.int8)


def build_cost_matrix(c: int) -> np.ndarray:
    """Cost of predicting column j for true row i: i-j+1 below the diagonal, 1 above."""
    if c < 2:
        raise ValueError("cost matrix needs c >= 2")
    i, j = np.indices((c, c))
    return np.where(i > j, i - j + 1, np.where(i < j, 1, 0)).astype(np.float64)


def save_labels(labels: Mapping[str, int], path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["topic", "class"])
        for t, c in labels.items():
            w.writerow([t, c])


def load_labels(path) -> dict[str, int]:
    with open(path, newline="", encoding="utf-8") as fh:
        return {r["topic"]: int(r["class"]) for r in csv.DictReader(fh)}
