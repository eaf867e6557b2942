"""IR evaluation metrics (AP, nDCG, P, Recall at a cutoff) and qrels handling."""

from __future__ import annotations

import enum
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .retrieval import RankedList

log = logging.getLogger(__name__)


class QrelsMismatchError(KeyError):
    """A query in a run or query set has no relevance judgments."""

    def __str__(self):
        return str(self.args[0])


class MetricKind(str, enum.Enum):
    AP = "AP"
    NDCG = "NDCG"
    P = "P"
    RECALL = "RECALL"


_LABEL = {MetricKind.AP: "AP", MetricKind.NDCG: "nDCG", MetricKind.P: "P", MetricKind.RECALL: "R"}
_ALIASES = {"AP": MetricKind.AP, "MAP": MetricKind.AP, "NDCG": MetricKind.NDCG, "P": MetricKind.P,
            "PREC": MetricKind.P, "R": MetricKind.RECALL, "RECALL": MetricKind.RECALL}


@dataclass(frozen=True)
class MetricSpec:
    kind: MetricKind
    cutoff: int

    def __post_init__(self):
        object.__setattr__(self, "kind", MetricKind(self.kind))
        if int(self.cutoff) != self.cutoff or self.cutoff < 1:
            raise ValueError(f"metric cutoff must be an integer >= 1, got {self.cutoff!r}")
        object.__setattr__(self, "cutoff", int(self.cutoff))

    @classmethod
    def parse(cls, text: str) -> "MetricSpec":
        """Parse ``KIND@K``, e.g. ``AP@100``, ``nDCG@10``, ``R@1000``."""
        m = re.fullmatch(r"\s*([A-Za-z]+)\s*@\s*(\d+)\s*", text)
        if m is None or m.group(1).upper() not in _ALIASES:
            raise ValueError(f"cannot parse metric {text!r} (expected KIND@K)")
        return cls(_ALIASES[m.group(1).upper()], int(m.group(2)))

    @property
    def label(self) -> str:
        return f"{_LABEL[self.kind]}@{self.cutoff}"

    def __str__(self) -> str:
        return self.label


class Qrels:
    """Relevance judgments: qid -> {doc_id: grade}."""

    def __init__(self, judgments: Mapping[str, Mapping[str, int]]):
        self._judgments = {}
        for qid, docs in judgments.items():
            for doc_id, grade in docs.items():
                if grade < 0:
                    raise ValueError(f"negative grade for ({qid}, {doc_id})")
            self._judgments[qid] = dict(docs)

    def __contains__(self, qid: str) -> bool:
        return qid in self._judgments

    def __len__(self) -> int:
        return len(self._judgments)

    @property
    def qids(self) -> list[str]:
        return list(self._judgments)

    def judgments(self, qid: str) -> Mapping[str, int]:
        try:
            return self._judgments[qid]
        except KeyError:
            raise QrelsMismatchError(f"query {qid!r} has no relevance judgments") from None

    def num_relevant(self, qid: str) -> int:
        return sum(1 for g in self.judgments(qid).values() if g > 0)


def parse_qrels(text: str, source: str = "<string>") -> Qrels:
    judgments: dict[str, dict[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 4:
            raise ValueError(f"{source}:{lineno}: expected 'qid iter doc_id grade'")
        qid, _, doc_id, grade = parts
        docs = judgments.setdefault(qid, {})
        if doc_id in docs:
            raise ValueError(f"{source}:{lineno}: duplicate judgment for ({qid}, {doc_id})")
        docs[doc_id] = int(grade)
    return Qrels(judgments)


def read_qrels(path: str | Path) -> Qrels:
    return parse_qrels(Path(path).read_text(encoding="utf-8"), str(path))


def evaluate(spec: MetricSpec, ranked: RankedList, qrels: Qrels, graded: bool = True) -> float:
    """Metric value of one ranked list; unjudged documents count as non-relevant.

    AP and Recall divide by the total number of relevant documents R, not
    min(R, k).  nDCG uses the raw grade as gain (binary gain when
    ``graded`` is false) and a log2(rank+1) discount.
    """
    judged = qrels.judgments(ranked.qid)
    k = spec.cutoff
    top = ranked.doc_ids[:k]
    grades = [judged.get(d, 0) for d in top]
    num_rel = sum(1 for g in judged.values() if g > 0)

    if spec.kind is MetricKind.P:
        return sum(1 for g in grades if g > 0) / k
    if spec.kind is MetricKind.RECALL:
        return sum(1 for g in grades if g > 0) / num_rel if num_rel else 0.0
    if spec.kind is MetricKind.AP:
        if not num_rel:
            return 0.0
        hits = 0
        total = 0.0
        for i, g in enumerate(grades, 1):
            if g > 0:
                hits += 1
                total += hits / i
        return total / num_rel

    if not graded:
        grades = [min(g, 1) for g in grades]
        ideal = sorted((min(g, 1) for g in judged.values()), reverse=True)[:k]
    else:
        ideal = sorted(judged.values(), reverse=True)[:k]
    idcg = sum(g / math.log2(i + 1) for i, g in enumerate(ideal, 1))
    if idcg <= 0:
        return 0.0
    dcg = sum(g / math.log2(i + 1) for i, g in enumerate(grades, 1))
    return dcg / idcg


@dataclass(frozen=True)
class GroundTruthVector:
    qids: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.qids) != len(self.values):
            raise ValueError("qids and values must be aligned")


def ground_truth(
    spec: MetricSpec,
    runs: Mapping[str, RankedList],
    qrels: Qrels,
    query_order: Sequence[str],
    graded: bool = True,
) -> GroundTruthVector:
    values = []
    for qid in query_order:
        if qid not in runs:
            raise KeyError(f"no ranked list for query {qid!r}")
        values.append(evaluate(spec, runs[qid], qrels, graded))
    return GroundTruthVector(tuple(query_order), tuple(values))


def judged_queries(qids: Iterable[str], qrels: Qrels) -> list[str]:
    """Keep queries with at least one relevant judgment, logging the ones dropped."""
    kept = []
    for qid in qids:
        if qid not in qrels or qrels.num_relevant(qid) == 0:
            log.info("dropping query %s: no relevant documents in qrels", qid)
            continue
        kept.append(qid)
    return kept


def format_metric_report(rows: Iterable[tuple[str, MetricSpec, float]]) -> str:
    return "".join(f"{qid}\t{spec.label}\t{value:.6f}\n" for qid, spec, value in rows)
