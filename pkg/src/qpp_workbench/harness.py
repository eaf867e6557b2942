"""Experiment engine: evaluate predictors across QPP contexts.

A context is (metric, retrieval model, depth).  For each predictor and
context the outcome is the correlation between the predictor's per-query
values and the per-query metric values.  Two analyses sit on top:

* sensitivity: spread (sample std-dev) of outcomes across metrics within a
  model row and across models within a metric column;
* contingency: Kendall's tau between the orderings of a predictor battery
  induced by pairs of contexts.
"""

from __future__ import annotations

import enum
import logging
import statistics
import threading
from concurrent.futures import Future
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Optional, Sequence

from .correlation import CorrelationKind, correlate, kendall_tau_b
from .index import Index, Query
from .metrics import GroundTruthVector, MetricSpec, Qrels, ground_truth, judged_queries
from .predictors import PredictionVector, PredictorSpec, predict
from .retrieval import RankedList, RetrievalModel, run_all

log = logging.getLogger(__name__)

ALL_CORRELATIONS = tuple(CorrelationKind)


@dataclass(frozen=True)
class QppContext:
    metric: MetricSpec
    model: RetrievalModel
    kappa: int

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")

    @property
    def label(self) -> str:
        return f"{self.model.label}|{self.metric.label}|{self.kappa}"


@dataclass(frozen=True)
class QppOutcome:
    predictor: str
    context: QppContext
    by_correlation: Mapping[CorrelationKind, Optional[float]]


class ComputeOnceCache:
    """Thread-safe memo: each key is computed exactly once, concurrent readers wait."""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self._lock = threading.Lock()
        self._futures: dict[Hashable, Future] = {}
        self.computed = 0

    def get(self, key: Hashable, compute: Callable[[], object]):
        if not self.enabled:
            self.computed += 1
            return compute()
        with self._lock:
            fut = self._futures.get(key)
            owner = fut is None
            if owner:
                fut = self._futures[key] = Future()
        if owner:
            try:
                value = compute()
            except BaseException as exc:
                fut.set_exception(exc)
                raise
            with self._lock:
                self.computed += 1
            fut.set_result(value)
        return fut.result()


class Experiment:
    """Index, query set and judgments, with retrieval runs and predictions memoised.

    Queries without any relevant judgment are dropped at construction.
    """

    def __init__(
        self,
        index: Index,
        queries: Sequence[Query],
        qrels: Qrels,
        *,
        graded: bool = True,
        correlations: Sequence[CorrelationKind] = ALL_CORRELATIONS,
        cache_runs: bool = True,
    ):
        keep = set(judged_queries([q.qid for q in queries], qrels))
        self.index = index
        self.queries = [q for q in queries if q.qid in keep]
        if len(self.queries) < 2:
            raise ValueError("need at least two judged queries to correlate")
        self.qrels = qrels
        self.graded = graded
        self.correlations = tuple(correlations)
        self.run_cache = ComputeOnceCache(cache_runs)
        self.prediction_cache = ComputeOnceCache(cache_runs)

    @property
    def qids(self) -> list[str]:
        return [q.qid for q in self.queries]

    def runs(self, model: RetrievalModel, kappa: int) -> Mapping[str, RankedList]:
        return self.run_cache.get((model, kappa), lambda: run_all(self.index, model, self.queries, kappa))

    def predictions(self, predictor: PredictorSpec, model: RetrievalModel, kappa: int) -> PredictionVector:
        def compute():
            runs = {} if predictor.is_pre_retrieval else self.runs(model, kappa)
            return predict(predictor, self.queries, runs, self.index, model)

        return self.prediction_cache.get((predictor, model, kappa), compute)

    def ground_truth(self, context: QppContext) -> GroundTruthVector:
        runs = self.runs(context.model, context.kappa)
        return ground_truth(context.metric, runs, self.qrels, self.qids, self.graded)

    def evaluate_outcome(self, predictor: PredictorSpec, context: QppContext) -> QppOutcome:
        phi = self.predictions(predictor, context.model, context.kappa)
        gt = self.ground_truth(context)
        cells = {kind: correlate(kind, phi.values, gt.values) for kind in self.correlations}
        return QppOutcome(predictor.label, context, cells)


# -- sensitivity -------------------------------------------------------------

def sample_std(values: Sequence[float]) -> Optional[float]:
    """Sample standard deviation (n-1 denominator); undefined below two values."""
    if len(values) < 2:
        return None
    return statistics.stdev(values)


def _spread(values: Iterable[Optional[float]]) -> tuple[Optional[float], int]:
    values = list(values)
    defined = [v for v in values if v is not None]
    return sample_std(defined), len(values) - len(defined)


@dataclass(frozen=True)
class SensitivityReport:
    """Outcome grid (models x metrics per correlation kind) with row/column spreads.

    ``sigma_theta[(kind, model)]`` is the spread across metrics and
    ``sigma_S[(kind, metric)]`` the spread across models; the matching
    ``excluded_*`` maps count undefined cells left out.
    """

    predictor: str
    models: tuple[str, ...]
    metrics: tuple[str, ...]
    correlations: tuple[CorrelationKind, ...]
    cells: Mapping[tuple[CorrelationKind, str, str], Optional[float]]
    sigma_theta: Mapping[tuple[CorrelationKind, str], Optional[float]]
    sigma_S: Mapping[tuple[CorrelationKind, str], Optional[float]]
    excluded_theta: Mapping[tuple[CorrelationKind, str], int] = field(default_factory=dict)
    excluded_S: Mapping[tuple[CorrelationKind, str], int] = field(default_factory=dict)

    @classmethod
    def from_cells(cls, predictor, models, metrics, correlations, cells) -> "SensitivityReport":
        sigma_theta, sigma_s, ex_theta, ex_s = {}, {}, {}, {}
        for kind in correlations:
            for model in models:
                key = (kind, model)
                sigma_theta[key], ex_theta[key] = _spread(cells[kind, model, m] for m in metrics)
            for metric in metrics:
                key = (kind, metric)
                sigma_s[key], ex_s[key] = _spread(cells[kind, m, metric] for m in models)
        return cls(predictor, tuple(models), tuple(metrics), tuple(correlations), dict(cells),
                   sigma_theta, sigma_s, ex_theta, ex_s)


def sensitivity(
    experiment: Experiment,
    predictor: PredictorSpec,
    metric_axis: Sequence[MetricSpec],
    model_axis: Sequence[RetrievalModel],
    kappa: int,
) -> SensitivityReport:
    if not metric_axis or not model_axis:
        raise ValueError("sensitivity axes must be non-empty")
    cells = {}
    for model in model_axis:
        for metric in metric_axis:
            outcome = experiment.evaluate_outcome(predictor, QppContext(metric, model, kappa))
            for kind in experiment.correlations:
                cells[kind, model.label, metric.label] = outcome.by_correlation[kind]
    return SensitivityReport.from_cells(
        predictor.label,
        [m.label for m in model_axis],
        [m.label for m in metric_axis],
        experiment.correlations,
        cells,
    )


# -- contingency -------------------------------------------------------------

class Axis(str, enum.Enum):
    METRIC_PAIRS = "metric"
    MODEL_PAIRS = "model"


def contingency(
    outcomes: Mapping[tuple[str, QppContext], QppOutcome],
    battery: Sequence[str],
    contexts: Sequence[QppContext],
    rank_by: CorrelationKind,
) -> dict[tuple[QppContext, QppContext], Optional[float]]:
    """Kendall tau-b between battery orderings for every pair of contexts.

    The ordering under a context is by outcome value, so tau between the
    outcome vectors equals tau between the orderings; ties in outcomes are
    handled by tau-b.  Any undefined outcome makes that context's cells
    undefined.
    """
    if len(battery) < 2:
        raise ValueError("contingency needs at least two predictors")
    vectors = {}
    for ctx in contexts:
        vals = [outcomes[p, ctx].by_correlation[rank_by] for p in battery]
        vectors[ctx] = None if any(v is None for v in vals) else vals
    cells = {}
    for i, a in enumerate(contexts):
        for b in contexts[i:]:
            va, vb = vectors[a], vectors[b]
            tau = None if va is None or vb is None else kendall_tau_b(va, vb)
            cells[a, b] = cells[b, a] = tau
    return cells


def battery_ordering(outcomes, battery: Sequence[str], ctx: QppContext, rank_by: CorrelationKind) -> list[str]:
    """Battery labels from best to worst outcome (undefined last, ties by battery order)."""
    def key(item):
        pos, label = item
        v = outcomes[label, ctx].by_correlation[rank_by]
        return (v is None, -(v or 0.0), pos)

    return [label for _, label in sorted(enumerate(battery), key=key)]


@dataclass(frozen=True)
class ContingencyReport:
    """Pairwise tau cells laid out as upper-triangular tables.

    For METRIC_PAIRS the fixed dimension is the model and cells compare two
    metrics; for MODEL_PAIRS the fixed dimension is the metric and cells
    compare two models.  ``cell(fixed, a, b)`` is symmetric in a and b.
    """

    axis: Axis
    rank_by: CorrelationKind
    battery: tuple[str, ...]
    fixed: tuple[str, ...]
    varying: tuple[str, ...]
    cells: Mapping[tuple[str, str, str], Optional[float]]
    orderings: Mapping[tuple[str, str], tuple[str, ...]] = field(default_factory=dict)

    def cell(self, fixed: str, a: str, b: str) -> Optional[float]:
        return self.cells[fixed, a, b]

    def upper_values(self) -> list[Optional[float]]:
        out = []
        for f in self.fixed:
            for i, a in enumerate(self.varying):
                for b in self.varying[i + 1:]:
                    out.append(self.cells[f, a, b])
        return out


def build_contingency_report(
    outcomes: Mapping[tuple[str, QppContext], QppOutcome],
    battery: Sequence[str],
    axis: Axis,
    models: Sequence[RetrievalModel],
    metrics: Sequence[MetricSpec],
    kappa: int,
    rank_by: CorrelationKind,
) -> ContingencyReport:
    cells = {}
    orderings = {}
    if axis is Axis.METRIC_PAIRS:
        fixed, varying = models, metrics
        make = lambda f, v: QppContext(v, f, kappa)  # noqa: E731
    else:
        fixed, varying = metrics, models
        make = lambda f, v: QppContext(f, v, kappa)  # noqa: E731
    for f in fixed:
        contexts = [make(f, v) for v in varying]
        pair_cells = contingency(outcomes, battery, contexts, rank_by)
        for va, ca in zip(varying, contexts):
            orderings[f.label, va.label] = tuple(battery_ordering(outcomes, battery, ca, rank_by))
            for vb, cb in zip(varying, contexts):
                cells[f.label, va.label, vb.label] = pair_cells[ca, cb]
    return ContingencyReport(
        axis,
        rank_by,
        tuple(battery),
        tuple(f.label for f in fixed),
        tuple(v.label for v in varying),
        cells,
        orderings,
    )
