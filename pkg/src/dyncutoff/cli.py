"""Command-line entry point: ``dyncutoff <command> ...``."""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import math
import sys
import numpy as np

from . import cascade as cascade_mod
from .analysis import AnalyzerConfig
from .features import (FeatureManifest, default_manifest, extract_batch, load_feature_csv,
                       save_feature_csv)
from .forest import ForestParams
from .harness import ExperimentConfig, format_report, run_experiment
from .index import (build_impact_index, build_index, load_impact_index, load_index,
                    load_term_stats, precompute_term_stats, read_corpus, read_manifest,
                    save_impact_index, save_index, save_term_stats)
from .labeling import (CutoffGrid, MedTable, assign_labels, load_labels, multiclass_to_binary,
                       save_labels, sweep_med)
from .rankeval import MED_METRICS, med_function
from .retrieval import EvalCounters, Query, Searcher, read_queries, saat_rho
from .scoring import MEASURES, SimilarityParams
from .trec import parse_run, write_run

log = logging.getLogger("dyncutoff")


def _grid(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _params(args) -> SimilarityParams:
    return SimilarityParams(args.k1, args.b, args.mu)


def _add_params(p: argparse.ArgumentParser):
    p.add_argument("--k1", type=float, default=0.9)
    p.add_argument("--b", type=float, default=0.4)
    p.add_argument("--mu", type=float, default=2500.0)


def _add_forest(p: argparse.ArgumentParser):
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--min-leaf", type=int, default=1)
    p.add_argument("--seed", type=int, default=ForestParams.seed)


def _out(path):
    if path:
        return open(path, "w", newline="", encoding="utf-8")
    return contextlib.nullcontext(sys.stdout)


# -- index ------------------------------------------------------------------

def cmd_index_build(args):
    analyzer = AnalyzerConfig(lowercase=not args.keep_case, stopwords=not args.no_stopwords,
                              stem=not args.no_stem)
    index = build_index(read_corpus(args.corpus), analyzer)
    save_index(index, args.out)
    save_term_stats(precompute_term_stats(index, _params(args)), args.out)
    print(f"{index.stats.n_docs} documents, {len(index.terms)} terms, "
          f"{index.n_postings} postings -> {args.out}")


def cmd_index_stats(args):
    if args.term:
        index = load_index(args.index)
        store = load_term_stats(args.index, index)
        terms = index.analyzer(args.term)
        for t in terms:
            if t not in store.term_ids:
                print(f"{t}\tnot in vocabulary")
                continue
            block = store[t]
            print(f"{t}\tcf={block.cf}\tdf={block.df}")
            for m in MEASURES:
                s = block.measure(m)
                print(f"  {m}\t" + "\t".join(f"{k}={getattr(s, k):.6g}"
                                            for k in ("max", "min", "median", "amean", "hmean",
                                                      "variance", "iqr")))
        return
    for k, v in read_manifest(args.index).items():
        print(f"{k} = {v}")


def cmd_index_impact(args):
    index = load_index(args.index)
    impact = build_impact_index(index, args.measure, args.bits, _params(args))
    path = save_impact_index(impact, args.index)
    print(f"{impact.total_postings} postings quantised to {args.bits} bits -> {path}")


# -- retrieval --------------------------------------------------------------

def _impact(args, index):
    """Load the impact index, building and saving it on first use."""
    if f"impact.{args.measure}.{args.bits}" not in read_manifest(args.index):
        log.info("building %s impact index at %d bits", args.measure, args.bits)
        save_impact_index(build_impact_index(index, args.measure, args.bits, _params(args)),
                          args.index)
    return load_impact_index(args.index, args.measure, args.bits, index)


def cmd_run(args):
    index = load_index(args.index)
    queries = [Query.parse(t, text, index) for t, text in read_queries(args.queries)]
    counters = EvalCounters()
    if args.algo == "saat":
        impact = _impact(args, index)
        rho = args.rho if args.rho is not None else math.ceil(0.1 * index.stats.n_docs)
        run = {q.topic_id: saat_rho(impact, q, rho, args.k, index.doc_ids, counters)
               for q in queries}
    else:
        searcher = Searcher(index, args.measure, _params(args))
        fn = searcher.wand_topk if args.algo == "wand" else searcher.exhaustive_topk
        run = {q.topic_id: fn(q, args.k, counters) for q in queries}
    write_run(run, args.out, tag=args.tag or f"{args.algo}-{args.measure}")
    log.info("postings: %d total, %d scored", counters.postings_total, counters.postings_scored)


def cmd_med(args):
    gold = parse_run(args.gold)
    cand = parse_run(args.cand)
    fn = med_function(args.metric, p=args.p, depth=args.depth, max_grade=args.max_grade)
    with _out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["topic", "metric", "value"])
        for topic in gold:
            w.writerow([topic, f"med_{args.metric}", repr(fn(gold[topic], cand.get(topic, [])))])


# -- labels -----------------------------------------------------------------

def cmd_label_sweep(args):
    index = load_index(args.index)
    queries = {t: Query.parse(t, text, index) for t, text in read_queries(args.queries)}
    gold = {t: r for t, r in parse_run(args.gold).items() if t in queries}
    grid = CutoffGrid(args.knob, _grid(args.grid))
    if args.knob == "k":
        searcher = Searcher(index, args.measure, _params(args))
        cache = {}

        def runner(topic, v):
            if topic not in cache:
                cache[topic] = searcher.exhaustive_topk(queries[topic], grid.values[-1])
            return cache[topic][:v]
    else:
        impact = _impact(args, index)

        def runner(topic, v):
            return saat_rho(impact, queries[topic], v, args.k, index.doc_ids)
    fn = med_function(args.metric, p=args.p, depth=args.depth, max_grade=args.max_grade)
    table = sweep_med(gold, runner, grid, fn, rerank=not args.direct, metric=args.metric)
    table.save(args.out)
    print(f"{len(table.topics)} topics x {grid.c} cutoffs -> {args.out}")


def cmd_label_assign(args):
    table = MedTable.load(args.table, args.knob)
    labels = assign_labels(table, args.eps)
    save_labels(labels, args.out)
    counts = np.bincount(list(labels.values()), minlength=table.grid.c + 1)[1:]
    print("class counts: " + " ".join(f"{i}:{n}" for i, n in enumerate(counts, 1)))


def cmd_label_expand(args):
    labels = load_labels(args.labels)
    binary = multiclass_to_binary(list(labels.values()), args.c)
    with _out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["topic", "class", *(f"stage{i}" for i in range(1, args.c))])
        for j, (t, c) in enumerate(labels.items()):
            w.writerow([t, c, *binary[:, j].tolist()])


# -- features and models ----------------------------------------------------

def cmd_features_extract(args):
    index = load_index(args.index)
    store = load_term_stats(args.index, index)
    manifest = FeatureManifest.load(args.manifest) if args.manifest else default_manifest()
    queries = ((t, index.analyzer(text)) for t, text in read_queries(args.queries))
    topics, X = extract_batch(queries, store, manifest)
    save_feature_csv(args.out, topics, X, manifest)
    if args.write_manifest:
        manifest.save(args.write_manifest)
    print(f"{len(topics)} topics x {len(manifest)} features -> {args.out}")


def _training_set(args):
    labels = load_labels(args.labels)
    topics, X, manifest = load_feature_csv(args.features)
    missing = [t for t in labels if t not in set(topics)]
    if missing:
        raise SystemExit(f"no features for {len(missing)} labelled topics, e.g. {missing[0]}")
    pos = {t: i for i, t in enumerate(topics)}
    rows = [pos[t] for t in labels]
    return X[rows], np.array(list(labels.values())), manifest


def cmd_cascade_train(args):
    X, y, manifest = _training_set(args)
    grid = CutoffGrid(args.knob, _grid(args.grid))
    params = ForestParams(args.trees, args.max_depth, args.min_leaf, args.seed)
    model = cascade_mod.train_cascade(X, y, grid, params, args.t, manifest.digest)
    cascade_mod.save_cascade(model, args.out)
    print(f"{grid.c - 1} stages trained on {len(y)} topics -> {args.out}")


def cmd_cascade_predict(args):
    model = cascade_mod.load_cascade(args.model)
    topics, X, manifest = load_feature_csv(args.features)
    model.check_manifest(manifest.digest)
    classes = model.predict(X, args.t)
    with _out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["topic", "class", "cutoff_value"])
        for t, c in zip(topics, classes):
            w.writerow([t, int(c), model.grid.value(int(c))])


# -- experiments ------------------------------------------------------------

def _override(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def cmd_exp_run(args):
    overrides = dict(args.set or [])
    cfg = ExperimentConfig.load(args.config, overrides)
    res = run_experiment(cfg, args.out)
    print(format_report(res.out_dir))


def cmd_exp_report(args):
    print(format_report(args.dir))


def cmd_synth(args):
    from .synth import DeskConfig, write_collection

    cfg = DeskConfig(n_docs=args.n_docs, n_queries=args.n_queries, n_judged=args.n_judged,
                     seed=args.seed)
    paths = write_collection(args.out, cfg)
    for k, p in paths.items():
        print(f"{k}: {p}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dyncutoff",
                                 description="Per-query candidate cutoff prediction toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    idx = sub.add_parser("index", help="build and inspect indexes").add_subparsers(
        dest="sub", required=True)
    p = idx.add_parser("build")
    p.add_argument("--corpus", required=True, help="TSV file or directory of documents")
    p.add_argument("--out", required=True)
    p.add_argument("--keep-case", action="store_true")
    p.add_argument("--no-stopwords", action="store_true")
    p.add_argument("--no-stem", action="store_true")
    _add_params(p)
    p.set_defaults(fn=cmd_index_build)
    p = idx.add_parser("stats")
    p.add_argument("--index", required=True)
    p.add_argument("--term")
    p.set_defaults(fn=cmd_index_stats)
    p = idx.add_parser("impact")
    p.add_argument("--index", required=True)
    p.add_argument("--measure", choices=MEASURES, default="bm25")
    p.add_argument("--bits", type=int, default=8)
    _add_params(p)
    p.set_defaults(fn=cmd_index_impact)

    p = sub.add_parser("run", help="retrieve a TREC run")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--algo", choices=("exhaustive", "wand", "saat"), default="wand")
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--rho", type=int, default=None,
                   help="SAAT posting budget (default: 10%% of the document count)")
    p.add_argument("--measure", choices=MEASURES, default="bm25")
    p.add_argument("--bits", type=int, default=8)
    p.add_argument("--tag")
    p.add_argument("--out", required=True)
    _add_params(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("med", help="MED between two runs")
    p.add_argument("--metric", choices=MED_METRICS, default="rbp")
    p.add_argument("--gold", required=True)
    p.add_argument("--cand", required=True)
    p.add_argument("--p", type=float, default=0.8)
    p.add_argument("--depth", type=int, default=20)
    p.add_argument("--max-grade", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_med)

    lab = sub.add_parser("label", help="MED sweeps and class labels").add_subparsers(
        dest="sub", required=True)
    p = lab.add_parser("sweep")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--knob", choices=("k", "rho"), default="k")
    p.add_argument("--grid", default="10,20,50,100,200,500,1000,2000,5000")
    p.add_argument("--k", type=int, default=1000, help="result depth for the rho knob")
    p.add_argument("--metric", choices=MED_METRICS, default="rbp")
    p.add_argument("--p", type=float, default=0.8)
    p.add_argument("--depth", type=int, default=20)
    p.add_argument("--max-grade", type=int, default=1)
    p.add_argument("--measure", choices=MEASURES, default="bm25")
    p.add_argument("--bits", type=int, default=8)
    p.add_argument("--direct", action="store_true",
                   help="compare the candidate list as retrieved, without gold reordering")
    p.add_argument("--out", required=True)
    _add_params(p)
    p.set_defaults(fn=cmd_label_sweep)
    p = lab.add_parser("assign")
    p.add_argument("--table", required=True)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--knob", choices=("k", "rho"), default="k")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_label_assign)
    p = lab.add_parser("expand")
    p.add_argument("--labels", required=True)
    p.add_argument("--c", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_label_expand)

    feat = sub.add_parser("features", help="query features").add_subparsers(
        dest="sub", required=True)
    p = feat.add_parser("extract")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--manifest")
    p.add_argument("--write-manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_features_extract)

    cas = sub.add_parser("cascade", help="train and apply cascades").add_subparsers(
        dest="sub", required=True)
    p = cas.add_parser("train")
    p.add_argument("--labels", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--knob", choices=("k", "rho"), default="k")
    p.add_argument("--grid", default="10,20,50,100,200,500,1000,2000,5000")
    p.add_argument("--t", type=float, default=cascade_mod.DEFAULT_T)
    p.add_argument("--out", required=True)
    _add_forest(p)
    p.set_defaults(fn=cmd_cascade_train)
    p = cas.add_parser("predict")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_cascade_predict)

    exp = sub.add_parser("exp", help="cross-validated experiments").add_subparsers(
        dest="sub", required=True)
    p = exp.add_parser("run")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides out_dir)")
    p.add_argument("--set", type=_override, action="append", metavar="KEY=VALUE",
                   help="override a config key; VALUE is parsed as JSON when possible")
    p.set_defaults(fn=cmd_exp_run)
    p = exp.add_parser("report")
    p.add_argument("--dir", required=True)
    p.set_defaults(fn=cmd_exp_report)

    p = sub.add_parser("synth", help="write the synthetic desk collection")
    p.add_argument("--out", required=True)
    p.add_argument("--n-docs", type=int, default=6000)
    p.add_argument("--n-queries", type=int, default=2400)
    p.add_argument("--n-judged", type=int, default=50)
    p.add_argument("--seed", type=int, default=2016)
    p.set_defaults(fn=cmd_synth)
    return ap


def _add_verbose(parser: argparse.ArgumentParser):
    # every leaf command takes -v after its own name
    actions = getattr(parser, "_subparsers", None)
    if actions is None:
        parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
        return
    for action in actions._group_actions:
        for child in action.choices.values():
            _add_verbose(child)


def main(argv=None) -> int:
    parser = build_parser()
    _add_verbose(parser)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.fn(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
