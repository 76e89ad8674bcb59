"""Cross-validated cutoff prediction experiments and their reports.

A run goes: index the corpus, sweep MED between the gold run and the
candidate generator over the cutoff grid, label topics, extract features,
predict every topic with models trained on the other folds, and compare
each method with the fixed-cutoff tradeoff curve.

Reports written to the output directory (headers are stable):

``med_table.csv``      topic,cutoff,med
``labels.csv``         topic,class
``features.csv``       topic,<manifest names>
``predictions.csv``    topic,fold,label,method,class,cutoff,med
``tradeoff_curve.csv`` cutoff,mean_med
``gains.csv``          method,mean_med,mean_cutoff,fixed_cutoff_at_med,diff_cutoff_pct,
                       fixed_med_at_cutoff,diff_med_pct,clamped
``under_target.csv``   method,mean_cutoff,mean_med,pct_under_target
``validation.csv``     method,n_topics,ndcg10,err,mean_cutoff   (only with qrels)
``report.json``        resolved config, input hashes, label counts

Nothing time-dependent is written, so identical configs give identical bytes.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .cascade import T_GRID, cascade_classes, predict_multilabel, train_cascade, train_multilabel
from .features import default_manifest, extract_batch, save_feature_csv
from .forest import ForestParams
from .index import build_impact_index, build_index, precompute_term_stats, read_corpus
from .labeling import CutoffGrid, MedTable, assign_labels, rerank_pool, save_labels, sweep_med
from .rankeval import MED_METRICS, err, med_function, med_params, ndcg_at
from .retrieval import (Query, RankedRun, Ranking, Searcher, exhaustive_quantized, read_queries,
                        saat_rho)
from .scoring import MEASURES, SimilarityParams
from .trec import parse_qrels, parse_run

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


# -- folds ------------------------------------------------------------------

@dataclass
class FoldPlan:
    n_folds: int
    assignment: dict[str, int]

    def members(self, fold: int) -> list[str]:
        return [t for t, f in self.assignment.items() if f == fold]


def make_folds(labels: Mapping[str, int], n_folds: int = 10, seed: int = 0) -> FoldPlan:
    """Stratified fold plan.

    Topics of each class are shuffled and dealt round-robin; the deal
    continues across classes, so fold sizes also differ by at most one.
    """
    if n_folds < 2:
        raise ValueError("n_folds must be >= 2")
    if len(labels) < n_folds:
        raise ValueError(f"{len(labels)} topics cannot fill {n_folds} folds")
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[str]] = {}
    for t in sorted(labels):
        by_class.setdefault(labels[t], []).append(t)
    assignment, pos = {}, 0
    for cls in sorted(by_class):
        members = by_class[cls]
        if len(members) < n_folds:
            warnings.warn(f"class {cls} has {len(members)} topics for {n_folds} folds",
                          stacklevel=2)
        for i in rng.permutation(len(members)):
            assignment[members[i]] = pos % n_folds
            pos += 1
    return FoldPlan(n_folds, {t: assignment[t] for t in labels})


# -- tradeoff curve and interpolation ---------------------------------------

@dataclass
class TradeoffCurve:
    cutoffs: np.ndarray   # increasing
    meds: np.ndarray      # mean MED at each fixed cutoff

    def __post_init__(self):
        self.cutoffs = np.asarray(self.cutoffs, dtype=np.float64)
        self.meds = np.asarray(self.meds, dtype=np.float64)
        if len(self.cutoffs) < 2 or len(self.cutoffs) != len(self.meds):
            raise ValueError("a tradeoff curve needs >= 2 paired points")
        if np.any(np.diff(self.cutoffs) <= 0):
            raise ValueError("curve cutoffs must be strictly increasing")

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.cutoffs.tolist(), self.meds.tolist()))


def fixed_curve(table: MedTable) -> TradeoffCurve:
    return TradeoffCurve(np.array(table.grid.values, dtype=np.float64), table.values.mean(axis=0))


def interpolate_med(curve: TradeoffCurve, cutoff: float) -> tuple[float, bool]:
    """Mean MED of the fixed-cutoff curve at ``cutoff``; flags a clamp."""
    lo, hi = curve.cutoffs[0], curve.cutoffs[-1]
    clamped = not lo <= cutoff <= hi
    if clamped:
        warnings.warn(f"cutoff {cutoff} outside curve range [{lo}, {hi}]; clamped", stacklevel=2)
    return float(np.interp(cutoff, curve.cutoffs, curve.meds)), clamped


def interpolate_cutoff(curve: TradeoffCurve, med: float) -> tuple[float, bool]:
    """Fixed cutoff whose curve MED equals ``med``; flags a clamp.

    Segments are scanned in increasing cutoff order and the first one
    spanning ``med`` is used, so a flat stretch yields its smallest cutoff.
    """
    c, m = curve.cutoffs, curve.meds
    for i in range(len(c) - 1):
        a, b = m[i], m[i + 1]
        if min(a, b) <= med <= max(a, b):
            if a == b:
                return float(c[i]), False
            return float(c[i] + (med - a) * (c[i + 1] - c[i]) / (b - a)), False
    warnings.warn(f"MED {med} outside curve range [{m.min()}, {m.max()}]; clamped", stacklevel=2)
    j = int(np.argmax(m)) if med > m.max() else int(np.argmin(m))
    return float(c[j]), True


def gain_pct(fixed: float, predicted: float) -> float:
    """(fixed - predicted) / predicted, in percent."""
    if predicted == 0:
        return 0.0 if fixed == 0 else math.inf
    return (fixed - predicted) / predicted * 100.0


@dataclass
class GainReport:
    method: str
    mean_med: float
    mean_cutoff: float
    fixed_cutoff_at_med: float
    fixed_med_at_cutoff: float
    clamped: bool = False

    @property
    def diff_cutoff_pct(self) -> float:
        return gain_pct(self.fixed_cutoff_at_med, self.mean_cutoff)

    @property
    def diff_med_pct(self) -> float:
        return gain_pct(self.fixed_med_at_cutoff, self.mean_med)


def gain_report(method: str, mean_med: float, mean_cutoff: float,
                curve: TradeoffCurve) -> GainReport:
    fk, c1 = interpolate_cutoff(curve, mean_med)
    fm, c2 = interpolate_med(curve, mean_cutoff)
    return GainReport(method, mean_med, mean_cutoff, fk, fm, c1 or c2)


def method_report(method: str, table: MedTable, classes: Mapping[str, int],
                  curve: TradeoffCurve | None = None) -> GainReport:
    """Gain report for per-topic classes, scored against ``table``."""
    pos = {t: i for i, t in enumerate(table.topics)}
    rows = np.array([pos[t] for t in classes])
    cls = np.array([classes[t] for t in classes]) - 1
    meds = table.values[rows, cls]
    cutoffs = np.array(table.grid.values, dtype=np.float64)[cls]
    curve = curve or fixed_curve(table.subset(list(classes)))
    return gain_report(method, float(meds.mean()), float(cutoffs.mean()), curve)


def oracle_report(table: MedTable, eps: float) -> GainReport:
    return method_report("Oracle", table, assign_labels(table, eps), fixed_curve(table))


def under_target(table: MedTable, classes: Mapping[str, int], eps: float) -> float:
    """Percentage of topics whose realised MED is at or under ``eps``."""
    pos = {t: i for i, t in enumerate(table.topics)}
    meds = np.array([table.values[pos[t], c - 1] for t, c in classes.items()])
    return float(np.mean(meds <= eps) * 100.0)


# -- judged validation ------------------------------------------------------

@dataclass
class ValidationRow:
    method: str
    n_topics: int
    ndcg10: float
    err: float
    mean_cutoff: float


def validate_judged(predictions: Mapping[str, Mapping[str, int]], gold: RankedRun,
                    runner: Callable[[str, int], Ranking], qrels: Mapping[str, Mapping[str, int]],
                    training_topics: Sequence[str] = (), max_grade: int | None = None
                    ) -> list[ValidationRow]:
    """NDCG@10, ERR and mean cutoff of each method on held-out judged topics.

    ``predictions`` maps method -> topic -> cutoff value. A topic's final
    ranking is its candidate pool at the predicted cutoff, ordered by gold.
    """
    overlap = set(training_topics) & {t for p in predictions.values() for t in p}
    if overlap:
        raise ValueError(f"judged topics overlap training topics: {sorted(overlap)[:5]}")
    if max_grade is None:
        max_grade = max([1] + [g for j in qrels.values() for g in j.values()])
    rows = []
    for method, cut in predictions.items():
        topics = [t for t in cut if t in qrels]
        nd, er = [], []
        for t in topics:
            final = rerank_pool(gold.get(t, []), runner(t, cut[t]))
            nd.append(ndcg_at(final, qrels[t], 10))
            er.append(err(final, qrels[t], max_grade))
        rows.append(ValidationRow(method, len(topics), float(np.mean(nd)) if nd else 0.0,
                                  float(np.mean(er)) if er else 0.0,
                                  float(np.mean([cut[t] for t in topics])) if topics else 0.0))
    return rows


# -- configuration ----------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Declarative experiment settings; relative paths resolve against ``base_dir``."""

    out_dir: str = "out"
    corpus: str | None = None
    queries: str | None = None
    gold: str | None = None
    judged_queries: str | None = None
    qrels: str | None = None
    synthetic: dict | None = None
    knob: str = "k"
    grid: list[int] = field(default_factory=lambda: [10, 20, 50, 100, 200, 500, 1000, 2000, 5000])
    metric: str = "rbp"
    p: float = 0.8
    depth: int = 20
    max_grade: int = 1
    eps: float = 0.05
    rerank: bool = True
    t_grid: list[float] = field(default_factory=lambda: list(T_GRID))
    n_folds: int = 10
    seed: int = 2016
    measure: str = "bm25"
    k1: float = 0.9
    b: float = 0.4
    mu: float = 2500.0
    bits: int = 8
    rho_k: int = 1000
    gold_depth: int = 1000
    forest: dict = field(default_factory=dict)
    base_dir: str = "."

    @classmethod
    def from_dict(cls, data: Mapping, base_dir=".") -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)} - {"base_dir"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**dict(data), base_dir=str(base_dir))

    @classmethod
    def load(cls, path, overrides: Mapping | None = None) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        data.update(overrides or {})
        return cls.from_dict(data, Path(path).resolve().parent)

    def path(self, value: str | None) -> Path | None:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def forest_params(self) -> ForestParams:
        try:
            return ForestParams(**self.forest)
        except TypeError as exc:
            raise ConfigError(f"bad forest settings: {exc}") from None

    def resolved(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        d.pop("out_dir")
        d["forest"] = dataclasses.asdict(self.forest_params())
        d["forest"].pop("n_jobs")
        return d

    def validate(self):
        if self.knob not in ("k", "rho"):
            raise ConfigError(f"knob must be 'k' or 'rho', got {self.knob!r}")
        try:
            CutoffGrid(self.knob, tuple(self.grid))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.metric not in MED_METRICS:
            raise ConfigError(f"metric must be one of {MED_METRICS}")
        if self.measure not in MEASURES:
            raise ConfigError(f"measure must be one of {MEASURES}")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if not self.t_grid or any(not 0 <= t < 1 for t in self.t_grid):
            raise ConfigError("every t must lie in [0, 1)")
        if self.n_folds < 2:
            raise ConfigError("n_folds must be >= 2")
        if self.rho_k < 1 or self.gold_depth < 1:
            raise ConfigError("rho_k and gold_depth must be >= 1")
        if not 1 <= self.bits <= 16:
            raise ConfigError("bits must lie in 1..16")
        self.forest_params()
        if self.synthetic is None:
            if not self.corpus or not self.queries:
                raise ConfigError("corpus and queries are required without 'synthetic'")
            if self.knob == "k" and not self.gold:
                raise ConfigError("the k knob needs a gold run")
            for key in ("corpus", "queries", "gold", "judged_queries", "qrels"):
                p = self.path(getattr(self, key))
                if p is not None and not p.exists():
                    raise ConfigError(f"{key}: {p} does not exist")
            if bool(self.judged_queries) != bool(self.qrels):
                raise ConfigError("judged_queries and qrels go together")
        try:
            SimilarityParams(self.k1, self.b, self.mu)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- experiment -------------------------------------------------------------

@dataclass
class ExperimentResult:
    out_dir: Path
    table: MedTable
    labels: dict[str, int]
    plan: FoldPlan
    classes: dict[str, dict[str, int]]     # method -> topic -> class
    curve: TradeoffCurve
    gains: list[GainReport]
    validation: list[ValidationRow]


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.6f}"


def _write_csv(path: Path, header: Sequence[str], rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _cascade_name(t: float) -> str:
    return f"LRCascade t={t:.2f}"


def _materialize_synthetic(cfg: ExperimentConfig, out: Path) -> ExperimentConfig:
    from .synth import DeskConfig, write_collection

    try:
        desk = DeskConfig(**{k: tuple(v) if isinstance(v, list) else v
                             for k, v in cfg.synthetic.items()})
    except TypeError as exc:
        raise ConfigError(f"bad synthetic settings: {exc}") from None
    paths = write_collection(out / "collection", desk)
    return dataclasses.replace(
        cfg, corpus=str(paths["corpus"].resolve()), queries=str(paths["queries"].resolve()),
        gold=str(paths["gold"].resolve()) if cfg.knob == "k" else None,
        judged_queries=str(paths["judged_queries"].resolve()),
        qrels=str(paths["qrels"].resolve()))


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentResult:
    cfg.validate()
    out = Path(out_dir) if out_dir is not None else cfg.path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if cfg.synthetic is not None:
        cfg = _materialize_synthetic(cfg, out)
        log.info("synthetic collection written (%.1fs)", time.perf_counter() - t0)

    grid = CutoffGrid(cfg.knob, tuple(cfg.grid))
    params = SimilarityParams(cfg.k1, cfg.b, cfg.mu)
    index = build_index(read_corpus(cfg.path(cfg.corpus)))
    store = precompute_term_stats(index, params)
    log.info("index and term stats ready (%.1fs)", time.perf_counter() - t0)

    raw = read_queries(cfg.path(cfg.queries))
    judged_raw = read_queries(cfg.path(cfg.judged_queries)) if cfg.judged_queries else []
    qrels = parse_qrels(cfg.path(cfg.qrels)) if cfg.qrels else {}
    held_out = {t for t, _ in judged_raw} | set(qrels)
    dropped = [t for t, _ in raw if t in held_out]
    if dropped:
        log.warning("removing %d judged topics from the training queries", len(dropped))
    queries = {t: Query.parse(t, text, index) for t, text in raw if t not in held_out}
    judged_q = {t: Query.parse(t, text, index) for t, text in judged_raw}
    all_q = {**queries, **judged_q}

    # candidate generator and gold run
    if cfg.knob == "k":
        searcher = Searcher(index, cfg.measure, params)
        kmax = grid.values[-1]
        cache: dict[str, Ranking] = {}

        def runner(topic: str, cutoff: int) -> Ranking:
            # safe-to-k: the top-v prefix of the exhaustive top-kmax is the top-v list
            if topic not in cache:
                cache[topic] = searcher.exhaustive_topk(all_q[topic], kmax)
            return cache[topic][:cutoff]
    else:
        impact = build_impact_index(index, cfg.measure, cfg.bits, params)

        def runner(topic: str, cutoff: int) -> Ranking:
            return saat_rho(impact, all_q[topic], cutoff, cfg.rho_k, index.doc_ids)

    if cfg.gold:
        gold_all = parse_run(cfg.path(cfg.gold))
    else:
        gold_all = {t: exhaustive_quantized(impact, q, cfg.gold_depth, index.doc_ids)
                    for t, q in all_q.items()}
    missing = [t for t in queries if t not in gold_all]
    if missing:
        log.warning("%d training topics have no gold list and are skipped", len(missing))
    train_topics = [t for t in queries if t in gold_all]
    judged_topics = [t for t in judged_q if t in gold_all and t in qrels]
    if len(train_topics) < cfg.n_folds:
        raise ConfigError(f"only {len(train_topics)} training topics for {cfg.n_folds} folds")

    med = med_function(cfg.metric, p=cfg.p, depth=cfg.depth, max_grade=cfg.max_grade)
    sweep_topics = train_topics + judged_topics
    table = sweep_med({t: gold_all[t] for t in sweep_topics}, runner, grid, med,
                      rerank=cfg.rerank, metric=cfg.metric)
    log.info("MED sweep over %d topics done (%.1fs)", len(sweep_topics), time.perf_counter() - t0)
    train_table = table.subset(train_topics)
    labels = assign_labels(train_table, cfg.eps)

    manifest = default_manifest()
    _, X_all = extract_batch(((t, all_q[t].terms) for t in sweep_topics), store, manifest)
    row_of = {t: i for i, t in enumerate(sweep_topics)}
    X = X_all[[row_of[t] for t in train_topics]]
    y = np.array([labels[t] for t in train_topics])

    plan = make_folds(labels, cfg.n_folds, cfg.seed)
    fold = np.array([plan.assignment[t] for t in train_topics])
    fparams = cfg.forest_params()
    p0 = np.zeros((len(train_topics), grid.c - 1))
    multi = np.zeros(len(train_topics), dtype=np.int64)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        for f in range(cfg.n_folds):
            tr, te = fold != f, fold == f
            fp = dataclasses.replace(fparams, seed=fparams.seed + 1000 * f)
            model = train_cascade(X[tr], y[tr], grid, fp, manifest_hash=manifest.digest)
            p0[te] = model.stage_proba(X[te])
            multi[te] = predict_multilabel(train_multilabel(X[tr], y[tr], grid.c, fp), X[te])
    log.info("cross-validation done (%.1fs)", time.perf_counter() - t0)

    classes: dict[str, dict[str, int]] = {"Oracle": dict(labels)}
    classes["MultiLabel"] = dict(zip(train_topics, multi.tolist()))
    for t in cfg.t_grid:
        classes[_cascade_name(t)] = dict(zip(train_topics, cascade_classes(p0, t).tolist()))

    curve = fixed_curve(train_table)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        gains = [method_report(m, train_table, c, curve) for m, c in classes.items()]

    validation: list[ValidationRow] = []
    if judged_topics:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            final = train_cascade(X, y, grid, fparams, manifest_hash=manifest.digest)
        Xj = X_all[[row_of[t] for t in judged_topics]]
        pj = final.stage_proba(Xj)
        jlabels = assign_labels(table.subset(judged_topics), cfg.eps)
        preds = {"Oracle": {t: grid.value(jlabels[t]) for t in judged_topics}}
        for t in cfg.t_grid:
            preds[_cascade_name(t)] = {q: grid.value(int(c)) for q, c in
                                       zip(judged_topics, cascade_classes(pj, t))}
        preds[f"Fixed {cfg.knob}={grid.values[-1]}"] = {t: grid.values[-1] for t in judged_topics}
        validation = validate_judged(preds, gold_all, runner, qrels, train_topics)

    result = ExperimentResult(out, table, labels, plan, classes, curve, gains, validation)
    _write_reports(result, cfg, train_table, sweep_topics, X_all, manifest)
    log.info("reports written to %s (%.1fs)", out, time.perf_counter() - t0)
    return result


def _write_reports(res: ExperimentResult, cfg: ExperimentConfig, train_table: MedTable,
                   sweep_topics, X_all, manifest):
    out = res.out_dir
    res.table.save(out / "med_table.csv")
    save_labels(res.labels, out / "labels.csv")
    save_feature_csv(out / "features.csv", sweep_topics, X_all, manifest)
    manifest.save(out / "features.manifest")

    grid = train_table.grid
    pos = {t: i for i, t in enumerate(train_table.topics)}
    rows = []
    for topic in train_table.topics:
        for method, cls in res.classes.items():
            c = cls[topic]
            rows.append([topic, res.plan.assignment[topic], res.labels[topic], method, c,
                         grid.value(c), repr(float(train_table.values[pos[topic], c - 1]))])
    _write_csv(out / "predictions.csv",
               ["topic", "fold", "label", "method", "class", "cutoff", "med"], rows)

    _write_csv(out / "tradeoff_curve.csv", ["cutoff", "mean_med"],
               [[int(c), _fmt(m)] for c, m in res.curve.points])

    _write_csv(out / "gains.csv",
               ["method", "mean_med", "mean_cutoff", "fixed_cutoff_at_med", "diff_cutoff_pct",
                "fixed_med_at_cutoff", "diff_med_pct", "clamped"],
               [[g.method, _fmt(g.mean_med), _fmt(g.mean_cutoff), _fmt(g.fixed_cutoff_at_med),
                 _fmt(g.diff_cutoff_pct), _fmt(g.fixed_med_at_cutoff), _fmt(g.diff_med_pct),
                 int(g.clamped)] for g in res.gains])

    ut = []
    for v in grid.values:
        fixed = {t: grid.values.index(v) + 1 for t in train_table.topics}
        j = grid.values.index(v)
        ut.append([f"Fixed {grid.knob}={v}", _fmt(float(v)),
                   _fmt(float(train_table.values[:, j].mean())),
                   _fmt(under_target(train_table, fixed, cfg.eps))])
    for g in res.gains:
        ut.append([g.method, _fmt(g.mean_cutoff), _fmt(g.mean_med),
                   _fmt(under_target(train_table, res.classes[g.method], cfg.eps))])
    _write_csv(out / "under_target.csv", ["method", "mean_cutoff", "mean_med", "pct_under_target"],
               ut)

    if res.validation:
        _write_csv(out / "validation.csv", ["method", "n_topics", "ndcg10", "err", "mean_cutoff"],
                   [[r.method, r.n_topics, _fmt(r.ndcg10), _fmt(r.err), _fmt(r.mean_cutoff)]
                    for r in res.validation])

    inputs = {k: _sha256(cfg.path(getattr(cfg, k)))
              for k in ("corpus", "queries", "gold", "judged_queries", "qrels")
              if getattr(cfg, k)}
    counts = np.bincount(np.array(list(res.labels.values())), minlength=grid.c + 1)[1:]
    report = {
        "config": cfg.resolved(),
        "med_params": med_params(cfg.metric, p=cfg.p, depth=cfg.depth, max_grade=cfg.max_grade),
        "inputs": inputs,
        "feature_manifest": manifest.digest,
        "interpolation": "piecewise-linear on means, linear cutoff axis, clamped outside the curve",
        "n_training_topics": len(train_table.topics),
        "n_judged_topics": len(res.table.topics) - len(train_table.topics),
        "label_counts": counts.tolist(),
    }
    # paths differ between machines; hashes identify the inputs
    for k in ("corpus", "queries", "gold", "judged_queries", "qrels"):
        report["config"].pop(k, None)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")


def format_report(out_dir) -> str:
    """Human-readable summary of the CSV reports in ``out_dir``."""
    out = Path(out_dir)
    lines = []
    for name, title in (("gains.csv", "Gains against fixed cutoffs"),
                        ("under_target.csv", "Topics at or under the MED target"),
                        ("validation.csv", "Judged validation")):
        path = out / name
        if not path.exists():
            continue
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines.append(title)
        for r in rows:
            lines.append("  " + "  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
        lines.append("")
    if not lines:
        raise FileNotFoundError(f"no reports in {out}")
    return "\n".join(lines)
