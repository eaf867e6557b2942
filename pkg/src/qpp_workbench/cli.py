"""Command-line interface: ``qpp-workbench <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from .config import DEFAULT_SEED, SENSITIVITY_METRICS, ConfigError, load_config
from .correlation import CorrelationKind, correlate
from .index import CorpusError, load_index, read_topics, save_snapshot
from .metrics import MetricSpec, QrelsMismatchError, evaluate, format_metric_report, read_qrels
from .predictors import PredictorSpec, default_battery, format_predictions, predict
from .reports import fmt
from .retrieval import RetrievalModel, read_run, run_all, write_run
from .sweep import run_grid, write_reports
from .synthetic import DEFAULT_SEED as SYNTH_SEED, bundled_paths, generate

log = logging.getLogger("qpp_workbench")


class CliError(Exception):
    pass


def _abs(p):
    return None if p is None else str(Path(p).resolve())


def _emit(text: str, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


def _corpus_path(args):
    if args.corpus:
        return args.corpus, args.format
    if args.config:
        cfg = load_config(args.config)
        return str(cfg.corpus.path), cfg.corpus.format
    return str(bundled_paths()["corpus"]), "tsv"


def _topics_path(args):
    if args.topics:
        return args.topics, args.topics_format
    if args.config:
        cfg = load_config(args.config)
        return str(cfg.topics.path), cfg.topics.format
    return str(bundled_paths()["topics"]), "tsv"


def _qrels_path(args):
    if args.qrels:
        return args.qrels
    if args.config:
        return str(load_config(args.config).qrels)
    return str(bundled_paths()["qrels"])


def _load_index(args):
    return load_index(*_corpus_path(args))


def _model(args) -> RetrievalModel:
    models = args.model or ["LMDIR:1000"]
    if len(models) != 1:
        raise CliError("this command takes a single --model")
    return RetrievalModel.parse(models[0])


# -- commands ----------------------------------------------------------------

def cmd_index(args) -> int:
    index = _load_index(args)
    s = index.stats
    print(f"N={s.num_docs} |C|={s.total_tokens} vocab={s.vocab_size} avg_doc_len={s.avg_doc_len:.2f}")
    if args.snapshot:
        save_snapshot(index, args.snapshot)
        print(f"snapshot written to {args.snapshot}")
    return 0


def cmd_search(args) -> int:
    index = _load_index(args)
    queries = read_topics(*_topics_path(args))
    model = _model(args)
    kappa = args.k or 1000
    runs = run_all(index, model, queries, kappa)
    tag = args.run_tag or model.label
    text_out = args.out
    if text_out and text_out != "-":
        Path(text_out).parent.mkdir(parents=True, exist_ok=True)
        write_run((runs[q.qid] for q in queries), tag, text_out)
    else:
        write_run((runs[q.qid] for q in queries), tag, sys.stdout)
    return 0


def cmd_eval(args) -> int:
    runs = read_run(args.run)
    qrels = read_qrels(_qrels_path(args))
    metrics = [MetricSpec.parse(m) for m in (args.metric or SENSITIVITY_METRICS)]
    rows = []
    for qid, ranked in runs.items():
        if qid not in qrels:
            raise QrelsMismatchError(f"query {qid!r} from the run has no relevance judgments")
        for spec in metrics:
            rows.append((qid, spec, evaluate(spec, ranked, qrels, graded=not args.binary_ndcg)))
    _emit(format_metric_report(rows), args.out)
    return 0


def cmd_qpp(args) -> int:
    index = _load_index(args)
    queries = read_topics(*_topics_path(args))
    model = _model(args)
    params = {"seed": args.seed if args.seed is not None else DEFAULT_SEED}
    if args.k is not None:
        params["k"] = args.k
    if args.predictor:
        battery = [PredictorSpec.parse(p, **params) for p in args.predictor]
    else:
        battery = default_battery(**params)
    if args.run:
        runs = read_run(args.run)
        for q in queries:
            if q.qid not in runs:
                log.warning("query %s has no entries in the run file; skipped", q.qid)
        queries = [q for q in queries if q.qid in runs]
    else:
        runs = run_all(index, model, queries, max(p.pool for p in battery))
    rows = []
    vectors = [predict(p, queries, runs, index, model) for p in battery]
    for i, q in enumerate(queries):
        for spec, vec in zip(battery, vectors):
            rows.append((q.qid, spec.label, vec.values[i]))
    _emit(format_predictions(rows), args.out)
    return 0


def _read_triples(path) -> dict[str, dict[str, float]]:
    """``qid<TAB>name<TAB>value`` -> {name: {qid: value}}."""
    out: dict[str, dict[str, float]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise CliError(f"{path}:{lineno}: expected 'qid<TAB>name<TAB>value'")
        out.setdefault(parts[1], {})[parts[0]] = float(parts[2])
    return out


def cmd_correlate(args) -> int:
    preds = _read_triples(args.predictions)
    truth = _read_triples(args.ground_truth)
    kinds = list(CorrelationKind)
    lines = ["\t".join(["predictor", "metric", "n", *(k.symbol for k in kinds)])]
    for pname, pvals in preds.items():
        for mname, mvals in truth.items():
            qids = [q for q in pvals if q in mvals]
            if len(qids) < 2:
                raise CliError(f"{pname} vs {mname}: fewer than two common queries")
            x = [pvals[q] for q in qids]
            y = [mvals[q] for q in qids]
            vals = [fmt(correlate(k, x, y), 6) for k in kinds]
            lines.append("\t".join([pname, mname, str(len(qids)), *vals]))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_sweep(args) -> int:
    overrides = {}
    if args.corpus:
        overrides["corpus"] = {"path": _abs(args.corpus), "format": args.format}
    if args.topics:
        overrides["topics"] = {"path": _abs(args.topics), "format": args.topics_format}
    if args.qrels:
        overrides["qrels"] = _abs(args.qrels)
    if args.model:
        overrides["models"] = args.model
    if args.metric:
        overrides["metrics"] = args.metric
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out:
        overrides["output_dir"] = _abs(args.out)
    if args.k is not None:
        overrides["predictor_params"] = {"k": args.k}
    config = load_config(args.config, overrides)
    t0 = time.perf_counter()
    result = run_grid(config, jobs=args.jobs)
    written = write_reports(result, config.output_dir)
    log.info("sweep finished in %.1fs", time.perf_counter() - t0)
    print(f"wrote {len(written)} files to {config.output_dir}")
    return 0


def cmd_synth(args) -> int:
    coll = generate(seed=args.seed if args.seed is not None else SYNTH_SEED)
    paths = coll.write(args.out or ".")
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpp-workbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--corpus", help="corpus: TSV file, TREC SGML file/directory, or *.json.gz snapshot")
    common.add_argument("--format", choices=("tsv", "trec"), default="tsv", help="corpus format")
    common.add_argument("--topics", help="topics: 'qid<TAB>text' lines or TREC topics")
    common.add_argument("--topics-format", choices=("tsv", "trec", "auto"), default="auto")
    common.add_argument("--qrels", help="TREC qrels file")
    common.add_argument("--model", action="append", help="retrieval model KIND:PARAMS, e.g. BM25:0.7,0.3")
    common.add_argument("--metric", action="append", help="metric KIND@K, e.g. AP@100 (repeatable)")
    common.add_argument("--k", type=int, help="search: retrieval depth; qpp/sweep: predictor top-k")
    common.add_argument("--seed", type=int, help="random seed (default 42)")
    common.add_argument("--jobs", type=int, default=None, help="worker threads (default: all cores)")
    common.add_argument("--out", help="output file or directory")

    p = sub.add_parser("index", parents=[common], help="build an index and print corpus statistics")
    p.add_argument("--snapshot", help="write a portable index snapshot (*.json.gz)")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", parents=[common], help="retrieve and write a TREC run file")
    p.add_argument("--run-tag", help="run tag (default: model label)")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", parents=[common], help="per-query metrics of a run file")
    p.add_argument("--run", required=True, help="TREC run file")
    p.add_argument("--binary-ndcg", action="store_true", help="binary instead of graded nDCG gains")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("qpp", parents=[common], help="per-query predictor values")
    p.add_argument("--run", help="TREC run file to predict on (default: retrieve with --model)")
    p.add_argument("--predictor", action="append", help="predictor name, e.g. NQC or UEF(WIG) (repeatable)")
    p.set_defaults(func=cmd_qpp)

    p = sub.add_parser("correlate", parents=[common], help="correlate predictions with metric values")
    p.add_argument("--predictions", required=True, help="'qid<TAB>predictor<TAB>value' file")
    p.add_argument("--ground-truth", required=True, help="'qid<TAB>metric<TAB>value' file")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("sweep", parents=[common], help="run the full sensitivity grid and write reports")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", parents=[common], help="write the synthetic test collection")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("QPP_WORKBENCH_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, ConfigError, QrelsMismatchError, CliError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
