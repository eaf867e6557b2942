"""Query performance predictors: AvgIDF, Clarity, WIG, NQC and UEF."""

from __future__ import annotations

import enum
import logging
import math
import re
import zlib
from dataclasses import dataclass, replace
from types import MappingProxyType
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .correlation import pearson
from .index import CorpusStats, Document, Index, Query
from .retrieval import RankedList, RetrievalModel, corpus_score

log = logging.getLogger(__name__)


class PredictorKind(str, enum.Enum):
    AVGIDF = "AVGIDF"
    CLARITY = "CLARITY"
    WIG = "WIG"
    NQC = "NQC"
    UEF = "UEF"


_DISPLAY = {
    PredictorKind.AVGIDF: "AvgIDF",
    PredictorKind.CLARITY: "Clarity",
    PredictorKind.WIG: "WIG",
    PredictorKind.NQC: "NQC",
    PredictorKind.UEF: "UEF",
}
UEF_BASES = (PredictorKind.CLARITY, PredictorKind.WIG, PredictorKind.NQC)


@dataclass(frozen=True)
class PredictorSpec:
    """A predictor with its hyper-parameters.

    k is the number of top documents used by post-retrieval predictors,
    ``pool`` the UEF sampling pool (top-K), ``mu`` the Dirichlet prior for
    relevance-model estimation and ``nqc_ddof`` the standard-deviation
    denominator offset (0 = population).
    """

    kind: PredictorKind
    base: Optional[PredictorKind] = None
    k: int = 20
    pool: int = 100
    num_samples: int = 10
    fb_terms: Optional[int] = 100
    mu: float = 1000.0
    seed: int = 42
    nqc_ddof: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", PredictorKind(self.kind))
        if self.base is not None:
            object.__setattr__(self, "base", PredictorKind(self.base))
        if self.kind is PredictorKind.UEF:
            if self.base not in UEF_BASES:
                raise ValueError(f"UEF base must be one of Clarity/WIG/NQC, got {self.base}")
        elif self.base is not None:
            raise ValueError(f"{self.kind.value} takes no base predictor")
        if not 1 <= self.k <= self.pool:
            raise ValueError(f"need 1 <= k <= K, got k={self.k}, K={self.pool}")
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.fb_terms is not None and self.fb_terms < 1:
            raise ValueError("fb_terms must be >= 1")
        if self.mu <= 0:
            raise ValueError("mu must be > 0")

    @classmethod
    def parse(cls, text: str, **params) -> "PredictorSpec":
        """Parse a predictor name such as ``NQC`` or ``UEF(WIG)``."""
        m = re.fullmatch(r"\s*([A-Za-z]+)\s*(?:\(\s*([A-Za-z]+)\s*\))?\s*", text)
        if m is None:
            raise ValueError(f"cannot parse predictor {text!r}")
        try:
            kind = PredictorKind(m.group(1).upper())
            base = PredictorKind(m.group(2).upper()) if m.group(2) else None
        except ValueError:
            raise ValueError(f"unknown predictor {text!r}") from None
        return cls(kind, base, **params)

    @property
    def label(self) -> str:
        if self.kind is PredictorKind.UEF:
            return f"UEF({_DISPLAY[self.base]})"
        return _DISPLAY[self.kind]

    @property
    def is_pre_retrieval(self) -> bool:
        return self.kind is PredictorKind.AVGIDF

    def base_spec(self) -> "PredictorSpec":
        return replace(self, kind=self.base, base=None)

    def __str__(self) -> str:
        return self.label


def default_battery(**params) -> list[PredictorSpec]:
    """AvgIDF, Clarity, WIG, NQC and UEF over each post-retrieval base."""
    kinds = [PredictorKind.AVGIDF, *UEF_BASES]
    battery = [PredictorSpec(kind, **params) for kind in kinds]
    battery += [PredictorSpec(PredictorKind.UEF, base, **params) for base in UEF_BASES]
    return battery


@dataclass(frozen=True)
class PredictionVector:
    qids: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.qids) != len(self.values):
            raise ValueError("qids and values must be aligned")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("prediction values must be finite")


@dataclass(frozen=True)
class RelevanceModel:
    weights: Mapping[str, float]

    def __post_init__(self):
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-9 or any(w <= 0 for w in self.weights.values()):
            raise ValueError("relevance model weights must be positive and sum to 1")


# -- pre-retrieval -----------------------------------------------------------

def avg_idf(query: Query, stats: CorpusStats) -> float:
    """Mean of ln(N/df) over query terms present in the index (0 if none are)."""
    idfs = [math.log(stats.num_docs / stats.df(t)) for t in query.terms if stats.df(t) > 0]
    return sum(idfs) / len(idfs) if idfs else 0.0


# -- score-based predictors --------------------------------------------------

def effective_query_length(query: Query, stats: CorpusStats) -> int:
    return sum(1 for t in query.terms if stats.cf(t) > 0)


def wig_from_scores(scores: Sequence[float], corpus_score: float, query_length: int, k: int) -> float:
    top = list(scores[:k])
    if not top or query_length == 0:
        return 0.0
    gain = sum(s - corpus_score for s in top) / len(top)
    return gain / math.sqrt(query_length)


def nqc_from_scores(scores: Sequence[float], corpus_score: float, k: int, ddof: int = 0) -> float:
    top = np.asarray(scores[:k], dtype=float)
    if len(top) <= ddof:
        return 0.0
    sigma = float(np.std(top, ddof=ddof))
    norm = abs(corpus_score)
    return sigma / norm if norm > 1e-9 else sigma


def wig(query: Query, ranked: RankedList, model: RetrievalModel, stats: CorpusStats, spec: PredictorSpec) -> float:
    return wig_from_scores(
        ranked.scores, corpus_score(model, query, stats), effective_query_length(query, stats), spec.k
    )


def nqc(query: Query, ranked: RankedList, model: RetrievalModel, stats: CorpusStats, spec: PredictorSpec) -> float:
    return nqc_from_scores(ranked.scores, corpus_score(model, query, stats), spec.k, spec.nqc_ddof)


# -- relevance model and Clarity ---------------------------------------------

def _smoothed_matrix(index: Index, docs: Sequence[Document], vocab_ids: np.ndarray, mu: float) -> np.ndarray:
    """Dirichlet-smoothed P(w|D), one row per document, one column per term id in ``vocab_ids``."""
    local = np.full(len(index.vocabulary), -1, dtype=np.int64)
    local[vocab_ids] = np.arange(len(vocab_ids))
    tf = np.zeros((len(docs), len(vocab_ids)))
    for r, doc in enumerate(docs):
        ids, counts = index.doc_vectors[doc.doc_id]
        cols = local[ids]
        hit = cols >= 0
        tf[r, cols[hit]] = counts[hit]
    lengths = np.array([doc.length for doc in docs], dtype=float)
    return (tf + mu * index.collection_probs[vocab_ids]) / (lengths[:, None] + mu)


def _query_log_likelihood(query: Query, docs: Sequence[Document], index: Index, mu: float) -> np.ndarray:
    """log P(Q|D) under Dirichlet smoothing; terms absent from the index are skipped."""
    terms = [t for t in query.qtf if t in index.term_ids]
    if not terms:
        return np.zeros(len(docs))
    ids = np.array([index.term_ids[t] for t in terms], dtype=np.int64)
    qtf = np.array([query.qtf[t] for t in terms], dtype=float)
    return np.log(_smoothed_matrix(index, docs, ids, mu)) @ qtf


def estimate_rlm(
    query: Query,
    docs: Sequence[Document],
    index: Index,
    fb_terms: Optional[int] = 100,
    mu: float = 1000.0,
) -> RelevanceModel:
    """Relevance model P(w|R) ∝ Σ_D P(w|D) P(Q|D) over the given feedback documents.

    The vocabulary is the union of terms in ``docs``; with ``fb_terms`` set,
    only the highest-weight terms are kept (ties by term) and renormalised.
    """
    if not docs:
        raise ValueError("relevance model needs at least one feedback document")
    vocab_ids = np.unique(np.concatenate([index.doc_vectors[d.doc_id][0] for d in docs]))
    if not len(vocab_ids):
        raise ValueError("feedback documents are all empty")
    loglik = _query_log_likelihood(query, docs, index, mu)
    doc_weights = np.exp(loglik - loglik.max())
    weights = doc_weights @ _smoothed_matrix(index, docs, vocab_ids, mu)
    # term ids follow sorted term order, so a stable sort breaks ties by term
    order = np.argsort(-weights, kind="stable")
    if fb_terms is not None:
        order = order[:fb_terms]
    kept = weights[order]
    kept = kept / kept.sum()
    vocab = index.vocabulary
    return RelevanceModel(MappingProxyType({vocab[vocab_ids[i]]: float(w) for i, w in zip(order, kept)}))


def kl_to_collection(rlm: RelevanceModel, stats: CorpusStats) -> float:
    """KL divergence (bits) between a relevance model and the collection model."""
    return sum(p * math.log2(p / stats.p_coll(w)) for w, p in rlm.weights.items())


def _top_documents(ranked: RankedList, index: Index, k: int) -> list[Document]:
    return [index.document(e.doc_id) for e in ranked.entries[:k]]


def clarity(query: Query, ranked: RankedList, index: Index, spec: PredictorSpec) -> float:
    if not len(ranked):
        log.warning("clarity: empty ranked list for query %s, predicting 0", query.qid)
        return 0.0
    rlm = estimate_rlm(query, _top_documents(ranked, index, spec.k), index, spec.fb_terms, spec.mu)
    return kl_to_collection(rlm, index.stats)


# -- UEF ---------------------------------------------------------------------

Rescorer = Callable[[Query, RelevanceModel, Sequence[Document], Index, float], Sequence[float]]


def rlm_rescore(query: Query, rlm: RelevanceModel, docs: Sequence[Document], index: Index, mu: float) -> np.ndarray:
    """Re-score documents by Σ_w P(w|RLM) ln P(w|D) with Dirichlet-smoothed P(w|D)."""
    ids = np.array([index.term_ids[w] for w in rlm.weights], dtype=np.int64)
    p = np.fromiter(rlm.weights.values(), dtype=float, count=len(ids))
    return np.log(_smoothed_matrix(index, docs, ids, mu)) @ p


def query_seed(seed: int, qid: str) -> list[int]:
    """Per-query RNG seed material, independent of scheduling order."""
    return [seed, zlib.crc32(qid.encode("utf-8"))]


def _base_value(query, ranked, index, model, spec) -> float:
    if spec.kind is PredictorKind.CLARITY:
        return clarity(query, ranked, index, spec)
    if spec.kind is PredictorKind.WIG:
        return wig(query, ranked, model, index.stats, spec)
    return nqc(query, ranked, model, index.stats, spec)


def uef(
    query: Query,
    ranked: RankedList,
    index: Index,
    model: RetrievalModel,
    spec: PredictorSpec,
    rescorer: Rescorer = rlm_rescore,
) -> float:
    """Mean over samples of xi * base, xi the Pearson correlation of original and RLM scores.

    Each sample draws k of the top-K documents uniformly without replacement
    and keeps them in their original rank order.
    """
    pool = ranked.entries[: spec.pool]
    if not pool:
        return 0.0
    size = min(spec.k, len(pool))
    base = spec.base_spec()
    rng = np.random.default_rng(query_seed(spec.seed, query.qid))
    total = 0.0
    for _ in range(spec.num_samples):
        picked = np.sort(rng.choice(len(pool), size=size, replace=False))
        entries = [pool[i] for i in picked]
        sample = RankedList.from_scored(query.qid, ((e.doc_id, e.score) for e in entries))
        docs = [index.document(e.doc_id) for e in entries]
        rlm = estimate_rlm(query, docs, index, spec.fb_terms, spec.mu)
        rescored = rescorer(query, rlm, docs, index, spec.mu)
        xi = pearson(sample.scores, rescored)
        if base.kind is PredictorKind.CLARITY:
            # the sample is the whole feedback set, so its relevance model is the one above
            phi = kl_to_collection(rlm, index.stats)
        else:
            phi = _base_value(query, sample, index, model, base)
        total += (xi or 0.0) * phi
    return total / spec.num_samples


# -- batch -------------------------------------------------------------------

def predict_one(spec: PredictorSpec, query: Query, ranked: Optional[RankedList], index: Index, model: RetrievalModel) -> float:
    if spec.kind is PredictorKind.AVGIDF:
        return avg_idf(query, index.stats)
    if ranked is None:
        raise KeyError(f"no ranked list for query {query.qid!r}")
    if spec.kind is PredictorKind.UEF:
        return uef(query, ranked, index, model, spec)
    if not len(ranked):
        log.warning("%s: empty ranked list for query %s, predicting 0", spec.label, query.qid)
    return _base_value(query, ranked, index, model, spec)


def predict(
    spec: PredictorSpec,
    queries: Sequence[Query],
    runs: Mapping[str, RankedList],
    index: Index,
    model: RetrievalModel,
) -> PredictionVector:
    values = [predict_one(spec, q, runs.get(q.qid), index, model) for q in queries]
    return PredictionVector(tuple(q.qid for q in queries), tuple(values))


def format_predictions(rows) -> str:
    return "".join(f"{qid}\t{label}\t{value:.6f}\n" for qid, label, value in rows)
