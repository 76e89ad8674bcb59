"""Maximized effectiveness difference (MED) and judged effectiveness metrics.

A MED value is the largest absolute difference in a metric's score
between two rankings over every relevance assignment consistent across
both lists. Documents missing from a list contribute nothing to it.

For metrics that are linear in binary relevance (RBP, DCG) the maximum
has a closed form: with ``delta(d) = w_gold(d) - w_cand(d)`` the best
assignment marks relevant exactly the documents on one side of zero.
ERR is not linear, so MED_ERR is found by branch and bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

DEFAULT_P = 0.8
DEFAULT_DEPTH = 20
DEFAULT_ERR_BUDGET = 2_000_000


class MedSearchBudgetError(RuntimeError):
    """Raised when MED_ERR search exhausts its node budget before proving optimality."""

    def __init__(self, best: float, bound: float, nodes: int):
        super().__init__(
            f"MED_ERR search budget exceeded after {nodes} nodes: "
            f"best value {best:.6g}, upper bound {bound:.6g}")
        self.best = best
        self.bound = bound
        self.nodes = nodes


@dataclass(frozen=True)
class MedScore:
    topic_id: str
    metric: str
    value: float
    params: dict = field(default_factory=dict, compare=False)


def _ids(ranking) -> list[str]:
    """Accept a list of doc ids or of (doc_id, score) pairs."""
    out = [r[0] if isinstance(r, tuple) else r for r in ranking]
    if len(set(out)) != len(out):
        raise ValueError("duplicate document in ranked list")
    return out


def _linear_med(gold: list[str], cand: list[str], weight: Callable[[int], float]) -> float:
    w_gold = {d: weight(i) for i, d in enumerate(gold, 1)}
    w_cand = {d: weight(i) for i, d in enumerate(cand, 1)}
    pos, neg = [], []
    for d in dict.fromkeys(gold + cand):
        delta = w_gold.get(d, 0.0) - w_cand.get(d, 0.0)
        if delta > 0:
            pos.append(delta)
        elif delta < 0:
            neg.append(-delta)
    return max(math.fsum(pos), math.fsum(neg))


def med_rbp(gold: Sequence, cand: Sequence, p: float = DEFAULT_P) -> float:
    if not 0 < p < 1:
        raise ValueError(f"RBP persistence must lie in (0, 1), got {p}")
    return _linear_med(_ids(gold), _ids(cand), lambda r: (1 - p) * p ** (r - 1))


def med_dcg(gold: Sequence, cand: Sequence, depth: int = DEFAULT_DEPTH) -> float:
    if depth < 1:
        raise ValueError("depth must be >= 1")
    return _linear_med(_ids(gold)[:depth], _ids(cand)[:depth],
                       lambda r: 1.0 / math.log2(r + 1))


def err_from_probs(probs: Sequence[float]) -> float:
    """Expected reciprocal rank of a list of stopping probabilities."""
    total, keep = 0.0, 1.0
    for r, pr in enumerate(probs, 1):
        total += keep * pr / r
        keep *= 1.0 - pr
    return total


def grade_prob(grade: int, max_grade: int) -> float:
    return (2 ** grade - 1) / 2 ** max_grade


def _max_err_gap(x: list[str], y: list[str], max_grade: int, budget: int,
                 nodes: list[int]) -> float:
    """Maximise ERR(x) - ERR(y) over grade assignments.

    ERR is nondecreasing in every grade, so documents only in ``x`` take
    the top grade and documents only in ``y`` take grade 0; only shared
    documents are searched. The bound of a partial assignment puts the
    unassigned shared documents at the top grade in ``x`` and at 0 in
    ``y``, which is admissible by the same monotonicity.
    """
    in_y = set(y)
    rank_x = {d: i for i, d in enumerate(x)}
    rank_y = {d: i for i, d in enumerate(y)}
    shared = sorted((d for d in x if d in in_y),
                    key=lambda d: (min(rank_x[d], rank_y[d]), rank_x[d]))
    probs = [grade_prob(g, max_grade) for g in range(max_grade + 1)]
    top = probs[-1]
    px = [top] * len(x)
    py = [0.0] * len(y)
    best = -math.inf

    def visit(j: int):
        # invariant: shared[j:] sit at their bound values in px / py
        nonlocal best
        nodes[0] += 1
        value = err_from_probs(px) - err_from_probs(py)
        if j == len(shared):
            best = max(best, value)
            return
        if value <= best:
            return
        if nodes[0] > budget:
            raise MedSearchBudgetError(max(best, 0.0), value, nodes[0])
        d = shared[j]
        ix, iy = rank_x[d], rank_y[d]
        grades = range(max_grade, -1, -1) if ix < iy else range(max_grade + 1)
        for g in grades:
            px[ix] = py[iy] = probs[g]
            visit(j + 1)
        px[ix], py[iy] = top, 0.0

    visit(0)
    return best


def med_err(gold: Sequence, cand: Sequence, depth: int = DEFAULT_DEPTH, max_grade: int = 1,
            budget: int = DEFAULT_ERR_BUDGET) -> float:
    if depth < 1 or max_grade < 1:
        raise ValueError("depth and max_grade must be >= 1")
    a = _ids(gold)[:depth]
    b = _ids(cand)[:depth]
    nodes = [0]
    ab = _max_err_gap(a, b, max_grade, budget, nodes)
    ba = _max_err_gap(b, a, max_grade, budget, nodes)
    return max(ab, ba, 0.0)


MED_METRICS = ("rbp", "dcg", "err")


def med_function(metric: str, *, p: float = DEFAULT_P, depth: int = DEFAULT_DEPTH,
                 max_grade: int = 1) -> Callable[[Sequence, Sequence], float]:
    if metric == "rbp":
        return lambda g, c: med_rbp(g, c, p)
    if metric == "dcg":
        return lambda g, c: med_dcg(g, c, depth)
    if metric == "err":
        return lambda g, c: med_err(g, c, depth, max_grade)
    raise ValueError(f"unknown MED metric {metric!r}; expected one of {MED_METRICS}")


def med_params(metric: str, *, p: float = DEFAULT_P, depth: int = DEFAULT_DEPTH,
               max_grade: int = 1) -> dict:
    if metric == "rbp":
        return {"p": p}
    if metric == "dcg":
        return {"depth": depth}
    return {"depth": depth, "max_grade": max_grade}


# -- judged metrics ---------------------------------------------------------

def _grades(ranking, judged: Mapping[str, int]) -> list[int]:
    # negative grades (e.g. spam) count as nonrelevant
    return [max(judged.get(d, 0), 0) for d in _ids(ranking)]


def dcg(grades: Sequence[int]) -> float:
    return sum((2 ** g - 1) / math.log2(r + 1) for r, g in enumerate(grades, 1))


def ndcg_at(ranking, judged: Mapping[str, int], cutoff: int = 10) -> float:
    """NDCG with exponential gains; 0 when the topic has no relevant document."""
    ideal = dcg(sorted((g for g in judged.values() if g > 0), reverse=True)[:cutoff])
    if ideal == 0:
        return 0.0
    return dcg(_grades(ranking, judged)[:cutoff]) / ideal


def err(ranking, judged: Mapping[str, int], max_grade: int = 4) -> float:
    return err_from_probs([grade_prob(min(g, max_grade), max_grade)
                           for g in _grades(ranking, judged)])


def rbp(ranking, judged: Mapping[str, int], p: float = DEFAULT_P) -> float:
    """RBP point value with binary relevance (grade > 0); residual excluded."""
    return (1 - p) * sum(p ** (r - 1) for r, g in enumerate(_grades(ranking, judged), 1) if g > 0)
