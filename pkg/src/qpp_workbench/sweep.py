"""Full experimental grid: every predictor under every context, then both analyses."""

from __future__ import annotations

import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .config import RunConfig
from .harness import (
    Axis,
    ContingencyReport,
    Experiment,
    QppContext,
    QppOutcome,
    SensitivityReport,
    build_contingency_report,
    sensitivity,
)
from .index import load_index, read_topics
from .metrics import read_qrels
from . import reports

log = logging.getLogger(__name__)


@dataclass
class GridResult:
    sensitivity: list[SensitivityReport]
    contingency: list[ContingencyReport]
    outcomes: list[QppOutcome]
    num_queries: int


def load_experiment(config: RunConfig) -> Experiment:
    index = load_index(config.corpus.path, config.corpus.format)
    queries = read_topics(config.topics.path, config.topics.format)
    qrels = read_qrels(config.qrels)
    return Experiment(
        index,
        queries,
        qrels,
        graded=config.graded_ndcg,
        correlations=config.correlations,
        cache_runs=config.cache_runs,
    )


def _contexts(config: RunConfig) -> list[QppContext]:
    """Every (model, metric) pair any report needs, in a fixed order."""
    needed = set()
    for axis in (config.sensitivity, config.metric_axis, config.model_axis):
        for model in axis.models:
            for metric in axis.metrics:
                needed.add((model, metric))
    return [
        QppContext(metric, model, config.kappa)
        for model in config.models
        for metric in config.metrics
        if (model, metric) in needed
    ]


def run_grid(config: RunConfig, jobs: Optional[int] = None, experiment: Optional[Experiment] = None) -> GridResult:
    """Evaluate the configured battery over the context grid.

    Retrieval runs and predictions are computed once per model and shared;
    ``jobs`` threads work on independent (model, predictor) cells, and all
    results are keyed so completion order never reaches the output.
    """
    experiment = experiment or load_experiment(config)
    jobs = jobs or os.cpu_count() or 1
    contexts = _contexts(config)
    models = [m for m in config.models if any(c.model == m for c in contexts)]
    log.info("grid: %d queries, %d models, %d contexts, %d predictors",
             len(experiment.queries), len(models), len(contexts), len(config.predictors))

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        list(pool.map(lambda m: experiment.runs(m, config.kappa), models))
        cells = [(p, m) for m in models for p in config.predictors]
        list(pool.map(lambda pm: experiment.predictions(pm[0], pm[1], config.kappa), cells))

    outcomes = {}
    ordered = []
    for predictor in config.predictors:
        for ctx in contexts:
            outcome = experiment.evaluate_outcome(predictor, ctx)
            outcomes[predictor.label, ctx] = outcome
            ordered.append(outcome)

    sensitivity_reports = [
        sensitivity(experiment, p, config.sensitivity.metrics, config.sensitivity.models, config.kappa)
        for p in config.predictors
    ]

    battery = [p.label for p in config.predictors]
    contingency = []
    if len(battery) >= 2:
        for axis, spec in ((Axis.METRIC_PAIRS, config.metric_axis), (Axis.MODEL_PAIRS, config.model_axis)):
            for kind in config.rank_by:
                contingency.append(build_contingency_report(
                    outcomes, battery, axis, spec.models, spec.metrics, config.kappa, kind
                ))
    return GridResult(sensitivity_reports, contingency, ordered, len(experiment.queries))


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_")


def write_reports(result: GridResult, out_dir: str | Path) -> list[Path]:
    """Write TSV and Markdown tables plus a combined report; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name: str, text: str):
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    combined = ["# QPP sensitivity report", "", f"Queries evaluated: {result.num_queries}.", ""]
    combined += ["## Variation of outcomes across contexts", ""]
    for rep in result.sensitivity:
        stem = f"sensitivity_{_slug(rep.predictor)}"
        put(f"{stem}.tsv", reports.sensitivity_tsv(rep))
        md = reports.sensitivity_markdown(rep)
        put(f"{stem}.md", md)
        combined.append(md)
    combined += ["## Stability of predictor rankings", ""]
    for rep in result.contingency:
        stem = f"contingency_{rep.axis.value}_{rep.rank_by.symbol}"
        put(f"{stem}.tsv", reports.contingency_tsv(rep))
        md = reports.contingency_markdown(rep)
        put(f"{stem}.md", md)
        put(f"{stem}_orderings.tsv", reports.orderings_tsv(rep))
        combined.append(md)
    put("outcomes.tsv", reports.outcomes_tsv(result.outcomes))
    put("report.md", "\n".join(combined))
    return written
