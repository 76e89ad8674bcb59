from __future__ import annotations

import csv
import json
import math
import warnings

import numpy as np
import pytest

from dyncutoff.harness import (ConfigError, ExperimentConfig, TradeoffCurve, fixed_curve,
                               format_report, gain_pct, gain_report, interpolate_cutoff,
                               interpolate_med, make_folds, method_report, oracle_report,
                               run_experiment, under_target, validate_judged)
from dyncutoff.index import build_index, read_corpus
from dyncutoff.labeling import CutoffGrid, MedTable
from dyncutoff.retrieval import Query, Searcher, read_queries
from dyncutoff.synth import DeskConfig, write_collection
from dyncutoff.trec import write_run

SMALL = DeskConfig(n_docs=700, n_queries=260, n_judged=12)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# -- folds ------------------------------------------------------------------

def test_uniform_folds():
    labels = {f"t{i:03d}": i % 5 + 1 for i in range(100)}
    plan = make_folds(labels, 10, seed=3)
    sizes = np.bincount(list(plan.assignment.values()))
    assert sizes.tolist() == [10] * 10
    for cls in range(1, 6):
        per = np.bincount([plan.assignment[t] for t, c in labels.items() if c == cls],
                          minlength=10)
        assert per.max() - per.min() <= 1
    assert make_folds(labels, 10, seed=3) == plan
    assert make_folds(labels, 10, seed=4) != plan
    assert sorted(t for f in range(10) for t in plan.members(f)) == sorted(labels)


def test_small_class_spreads_with_warning():
    labels = {f"t{i}": 1 for i in range(40)}
    labels.update({"r1": 2, "r2": 2, "r3": 2})
    with pytest.warns(UserWarning, match="class 2"):
        plan = make_folds(labels, 10, seed=0)
    assert len({plan.assignment[t] for t in ("r1", "r2", "r3")}) == 3


def test_fold_errors():
    with pytest.raises(ValueError):
        make_folds({"a": 1, "b": 1}, 1)
    with pytest.raises(ValueError):
        make_folds({"a": 1, "b": 1}, 3)


# -- curves and gains -------------------------------------------------------

def test_interpolation():
    curve = TradeoffCurve([10, 20, 50], [0.3, 0.1, 0.0])
    assert interpolate_med(curve, 20) == (0.1, False)
    assert interpolate_cutoff(curve, 0.1) == (20.0, False)
    assert interpolate_med(curve, 15) == (pytest.approx(0.2), False)
    assert interpolate_cutoff(curve, 0.05) == (pytest.approx(35.0), False)
    with pytest.warns(UserWarning):
        assert interpolate_cutoff(curve, 0.5) == (10.0, True)
    with pytest.warns(UserWarning):
        assert interpolate_med(curve, 100) == (0.0, True)
    with pytest.raises(ValueError):
        TradeoffCurve([10], [0.1])
    # flat stretch: the smallest cutoff reaching the value
    assert interpolate_cutoff(TradeoffCurve([1, 2, 3], [0.2, 0.0, 0.0]), 0.0) == (2.0, False)


def test_gain_pct():
    assert gain_pct(5459, 1688) == pytest.approx(223.4, abs=0.05)
    assert gain_pct(0.0, 0.0) == 0.0
    assert gain_pct(1.0, 0.0) == float("inf")


def test_gain_report_oracle_numbers():
    curve = TradeoffCurve([1000, 5459, 10000], [0.067 * 2, 0.029, 0.0])
    g = gain_report("Oracle", 0.029, 1688, curve)
    assert g.fixed_cutoff_at_med == pytest.approx(5459)
    assert g.diff_cutoff_pct == pytest.approx(223.4, abs=0.05)


def table():
    vals = np.array([[0.4, 0.04, 0.0], [0.2, 0.1, 0.01], [0.03, 0.0, 0.0]])
    return MedTable(["a", "b", "c"], CutoffGrid("k", (10, 100, 1000)), vals)


def test_fixed_curve_recomputes_from_saved_table(tmp_path):
    t = table()
    t.save(tmp_path / "m.csv")
    a, b = fixed_curve(t), fixed_curve(MedTable.load(tmp_path / "m.csv"))
    assert np.array_equal(a.meds, b.meds) and np.array_equal(a.cutoffs, b.cutoffs)
    assert a.meds.tolist() == pytest.approx([0.21, 0.14 / 3, 0.01 / 3])


def test_oracle_report():
    t = table()
    g = oracle_report(t, 0.05)
    assert g.mean_cutoff == pytest.approx((100 + 1000 + 10) / 3)
    assert g.mean_med == pytest.approx((0.04 + 0.01 + 0.03) / 3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        wide = oracle_report(t, 10.0)
    assert wide.mean_cutoff == 10
    one = MedTable(["a"], t.grid, t.values[:1])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g1 = oracle_report(one, 0.05)
    assert (g1.mean_cutoff, g1.mean_med) == (100, 0.04)
    assert under_target(t, {"a": 1, "b": 3, "c": 1}, 0.05) == pytest.approx(200 / 3)


def test_method_report_uses_realised_meds():
    t = table()
    g = method_report("x", t, {"a": 3, "b": 3, "c": 3}, fixed_curve(t))
    assert g.mean_cutoff == 1000 and g.mean_med == pytest.approx(0.01 / 3)
    assert g.diff_cutoff_pct == pytest.approx(0.0) and g.diff_med_pct == pytest.approx(0.0)


# -- judged validation -------------------------------------------------------

def test_validate_judged():
    gold = {"j1": [("a", 3), ("b", 2), ("c", 1)], "j2": [("x", 1), ("y", 0.5)]}
    qrels = {"j1": {"a": 1, "b": 0, "c": 1}, "j2": {"x": 0, "y": 0}}

    def runner(topic, k):
        return list(reversed(gold[topic]))[:k]

    preds = {"Oracle": {"j1": 1, "j2": 2}, "Fixed k=3": {"j1": 3, "j2": 3}}
    rows = validate_judged(preds, gold, runner, qrels, ["t1"])
    assert [r.method for r in rows] == ["Oracle", "Fixed k=3"]
    assert rows[0].mean_cutoff == 1.5 and rows[1].mean_cutoff == 3
    # j1 reranks to a, b, c with b nonrelevant; j2 has no relevant documents
    assert rows[1].ndcg10 == pytest.approx(1.5 / (1 + 1 / math.log2(3)) / 2)
    with pytest.raises(ValueError, match="overlap"):
        validate_judged(preds, gold, runner, qrels, ["j1"])


# -- configuration -----------------------------------------------------------

def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="unknown"):
        ExperimentConfig.from_dict({"bogus": 1})
    bad = [{"knob": "x"}, {"grid": [5, 5]}, {"metric": "map"}, {"eps": 0}, {"t_grid": [1.0]},
           {"n_folds": 1}, {"forest": {"trees": 3}}, {"bits": 0}]
    for b in bad:
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"synthetic": {}, **b}).validate()
    with pytest.raises(ConfigError, match="corpus"):
        ExperimentConfig.from_dict({}).validate()
    with pytest.raises(ConfigError, match="does not exist"):
        ExperimentConfig.from_dict({"corpus": "nope.tsv", "queries": "q", "gold": "g"},
                                   tmp_path).validate()
    (tmp_path / "c.json").write_text(json.dumps({"eps": 0.1, "synthetic": {}}))
    cfg = ExperimentConfig.load(tmp_path / "c.json", {"n_folds": 4})
    assert (cfg.eps, cfg.n_folds) == (0.1, 4)


# -- end to end ---------------------------------------------------------------

@pytest.fixture(scope="module")
def collection(tmp_path_factory):
    return write_collection(tmp_path_factory.mktemp("desk"), SMALL)


def small_config(paths, **kw):
    base = dict(corpus=str(paths["corpus"]), queries=str(paths["queries"]),
                gold=str(paths["gold"]), judged_queries=str(paths["judged_queries"]),
                qrels=str(paths["qrels"]), grid=[10, 20, 50, 100, 200, 500], n_folds=5,
                forest={"n_trees": 15})
    base.update(kw)
    return ExperimentConfig.from_dict(base)


@pytest.fixture(scope="module")
def small_run(collection, tmp_path_factory):
    out = tmp_path_factory.mktemp("exp")
    return run_experiment(small_config(collection), out), out


def test_artifacts_and_prediction_coverage(small_run):
    res, out = small_run
    for name in ("tradeoff_curve.csv", "gains.csv", "under_target.csv", "predictions.csv",
                 "validation.csv", "med_table.csv", "labels.csv", "features.csv",
                 "report.json"):
        assert (out / name).exists(), name
    preds = read_csv(out / "predictions.csv")
    methods = {r["method"] for r in preds}
    assert methods == {"Oracle", "MultiLabel", "LRCascade t=0.75", "LRCascade t=0.80",
                       "LRCascade t=0.85"}
    topics = set(res.labels)
    for m in methods:
        rows = [r for r in preds if r["method"] == m]
        assert sorted(r["topic"] for r in rows) == sorted(topics)
        assert all(r["fold"] == str(res.plan.assignment[r["topic"]]) for r in rows)
    assert [r["method"] for r in read_csv(out / "validation.csv")] == [
        "Oracle", "LRCascade t=0.75", "LRCascade t=0.80", "LRCascade t=0.85", "Fixed k=500"]
    report = json.loads((out / "report.json").read_text())
    assert set(report["inputs"]) == {"corpus", "queries", "gold", "judged_queries", "qrels"}
    assert sum(report["label_counts"]) == len(topics)
    assert "Gains against fixed cutoffs" in format_report(out)


def test_judged_topics_are_held_out(small_run, collection):
    res, _ = small_run
    judged = {t for t, _ in read_queries(collection["judged_queries"])}
    assert judged and not judged & set(res.labels)


def test_curve_matches_med_table(small_run):
    res, out = small_run
    tab = MedTable.load(out / "med_table.csv").subset(list(res.labels))
    curve = [(int(r["cutoff"]), float(r["mean_med"])) for r in read_csv(out / "tradeoff_curve.csv")]
    assert [c for c, _ in curve] == [10, 20, 50, 100, 200, 500]
    np.testing.assert_allclose([m for _, m in curve], tab.values.mean(axis=0), atol=5e-7)


def test_larger_t_means_lower_med(small_run):
    res, _ = small_run
    g = {x.method: x for x in res.gains}
    assert g["LRCascade t=0.85"].mean_med <= g["LRCascade t=0.75"].mean_med
    assert g["LRCascade t=0.85"].mean_cutoff >= g["LRCascade t=0.75"].mean_cutoff
    for t in ("0.75", "0.80", "0.85"):
        assert g[f"LRCascade t={t}"].mean_cutoff < 500


def test_self_gold_is_trivially_optimal(collection, tmp_path):
    index = build_index(read_corpus(collection["corpus"]))
    s = Searcher(index, "bm25")
    queries = read_queries(collection["queries"]) + read_queries(collection["judged_queries"])
    gold = {t: s.exhaustive_topk(Query.parse(t, text, index), 10) for t, text in queries}
    write_run(gold, tmp_path / "self.run")
    cfg = small_config(collection, gold=str(tmp_path / "self.run"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = run_experiment(cfg, tmp_path / "out")
    assert set(res.labels.values()) == {1}
    for g in res.gains:
        assert g.mean_cutoff == 10 and g.mean_med == 0.0
        assert g.diff_cutoff_pct == 0.0


def test_rho_knob_runs(collection, tmp_path):
    cfg = small_config(collection, knob="rho", gold=None, grid=[50, 200, 1000, 5000],
                       rho_k=100, gold_depth=100)
    res = run_experiment(cfg, tmp_path)
    # the largest budget covers every posting of these short queries, so MED is 0
    assert res.table.values[:, -1].max() == 0.0
    assert (tmp_path / "gains.csv").exists()
