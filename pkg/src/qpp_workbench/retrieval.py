"""Retrieval models (LM-JM, LM-Dirichlet, BM25), top-k search and TREC run files."""

from __future__ import annotations

import enum
import heapq
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

from .index import CorpusStats, Document, Index, Query


class ModelKind(str, enum.Enum):
    LMJM = "LMJM"
    LMDIR = "LMDIR"
    BM25 = "BM25"


_DISPLAY = {ModelKind.LMJM: "LMJM", ModelKind.LMDIR: "LMDir", ModelKind.BM25: "BM25"}


@dataclass(frozen=True)
class RetrievalModel:
    """A scoring function with its parameters.

    ``params`` is ``(lambda,)`` for LMJM, ``(mu,)`` for LMDIR and ``(k1, b)``
    for BM25.
    """

    kind: ModelKind
    params: tuple[float, ...]

    def __post_init__(self):
        kind = ModelKind(self.kind)
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", params)
        if kind is ModelKind.LMJM:
            if len(params) != 1 or not 0.0 < params[0] < 1.0:
                raise ValueError(f"LMJM needs lambda in (0,1), got {params}")
        elif kind is ModelKind.LMDIR:
            if len(params) != 1 or not params[0] > 0.0:
                raise ValueError(f"LMDIR needs mu > 0, got {params}")
        elif len(params) != 2 or params[0] < 0.0 or not 0.0 <= params[1] <= 1.0:
            raise ValueError(f"BM25 needs k1 >= 0 and b in [0,1], got {params}")

    @classmethod
    def lmjm(cls, lam: float = 0.6) -> "RetrievalModel":
        return cls(ModelKind.LMJM, (lam,))

    @classmethod
    def lmdir(cls, mu: float = 1000.0) -> "RetrievalModel":
        return cls(ModelKind.LMDIR, (mu,))

    @classmethod
    def bm25(cls, k1: float = 0.7, b: float = 0.3) -> "RetrievalModel":
        return cls(ModelKind.BM25, (k1, b))

    @classmethod
    def parse(cls, text: str) -> "RetrievalModel":
        """Parse ``KIND:PARAMS`` (``BM25:0.7,0.3``) or the label form ``BM25(0.7,0.3)``."""
        m = re.fullmatch(r"\s*([A-Za-z0-9]+)\s*(?:[:(]\s*([^)]*?)\s*\)?)?\s*", text)
        if m is None:
            raise ValueError(f"cannot parse retrieval model {text!r}")
        try:
            kind = ModelKind(m.group(1).upper())
        except ValueError:
            raise ValueError(f"unknown retrieval model kind {m.group(1)!r}") from None
        if not m.group(2):
            return {ModelKind.LMJM: cls.lmjm, ModelKind.LMDIR: cls.lmdir, ModelKind.BM25: cls.bm25}[kind]()
        params = tuple(float(p) for p in m.group(2).split(","))
        return cls(kind, params)

    @property
    def label(self) -> str:
        return f"{_DISPLAY[self.kind]}({','.join(f'{p:g}' for p in self.params)})"

    def __str__(self) -> str:
        return self.label


def score(model: RetrievalModel, query: Query, doc: Document, stats: CorpusStats) -> float:
    """Query-document retrieval status value; query terms absent from the corpus are skipped."""
    total = 0.0
    dl = doc.length
    if model.kind is ModelKind.BM25:
        k1, b = model.params
        norm = k1 * (1.0 - b + b * dl / stats.avg_doc_len) if stats.avg_doc_len > 0 else k1
        for term, qtf in query.qtf.items():
            tf = doc.tf(term)
            if tf == 0:
                continue
            df = stats.df(term)
            idf = math.log(1.0 + (stats.num_docs - df + 0.5) / (df + 0.5))
            total += qtf * idf * tf * (k1 + 1.0) / (tf + norm)
        return total

    for term, qtf in query.qtf.items():
        cf = stats.cf(term)
        if cf == 0:
            continue
        p_c = cf / stats.total_tokens
        tf = doc.tf(term)
        if model.kind is ModelKind.LMJM:
            lam = model.params[0]
            p_d = lam * tf / dl if dl > 0 else 0.0
            total += qtf * math.log(p_d + (1.0 - lam) * p_c)
        else:
            mu = model.params[0]
            total += qtf * math.log((tf + mu * p_c) / (dl + mu))
    return total


def corpus_score(model: RetrievalModel, query: Query, stats: CorpusStats) -> float:
    """Score of the whole collection treated as one document (0 for BM25)."""
    if model.kind is ModelKind.BM25:
        return 0.0
    total = 0.0
    for term, qtf in query.qtf.items():
        cf = stats.cf(term)
        if cf:
            total += qtf * math.log(cf / stats.total_tokens)
    return total


@dataclass(frozen=True)
class RankedEntry:
    doc_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class RankedList:
    qid: str
    entries: tuple[RankedEntry, ...] = ()

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        seen = set()
        for i, e in enumerate(entries):
            if e.rank != i + 1:
                raise ValueError(f"{self.qid}: ranks must be consecutive from 1")
            if e.doc_id in seen:
                raise ValueError(f"{self.qid}: duplicate doc_id {e.doc_id!r}")
            seen.add(e.doc_id)
            if i and e.score > entries[i - 1].score:
                raise ValueError(f"{self.qid}: scores must be non-increasing with rank")

    @classmethod
    def from_scored(cls, qid: str, scored: Iterable[tuple[str, float]]) -> "RankedList":
        """Build from ``(doc_id, score)`` pairs already in rank order."""
        return cls(qid, tuple(RankedEntry(d, s, i) for i, (d, s) in enumerate(scored, 1)))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def doc_ids(self) -> list[str]:
        return [e.doc_id for e in self.entries]

    @property
    def scores(self) -> list[float]:
        return [e.score for e in self.entries]

    def prefix(self, k: int) -> "RankedList":
        return RankedList(self.qid, self.entries[:k])


def search(index: Index, model: RetrievalModel, query: Query, kappa: int) -> RankedList:
    """Top-``kappa`` documents among those containing at least one query term.

    Ties are broken by ascending doc_id.  A query with no indexed terms gives
    an empty list.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    candidates: dict[str, None] = {}
    for term in query.qtf:
        for doc_id, _ in index.posting_list(term):
            candidates[doc_id] = None
    stats = index.stats
    scored = ((score(model, query, index.documents[d], stats), d) for d in candidates)
    top = heapq.nsmallest(kappa, scored, key=lambda sd: (-sd[0], sd[1]))
    return RankedList.from_scored(query.qid, ((d, s) for s, d in top))


# -- TREC run files ----------------------------------------------------------

def format_run(runs: Iterable[RankedList], tag: str) -> str:
    lines = []
    for ranked in runs:
        for e in ranked.entries:
            lines.append(f"{ranked.qid} Q0 {e.doc_id} {e.rank} {e.score:.6f} {tag}\n")
    return "".join(lines)


def write_run(runs: Iterable[RankedList], tag: str, out: str | Path | IO[str]) -> None:
    text = format_run(runs, tag)
    if hasattr(out, "write"):
        out.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def parse_run(text: str, source: str = "<string>") -> dict[str, RankedList]:
    """Parse a TREC run; entries are re-sorted by rank and re-numbered per qid.

    Scores are used as given; a file whose scores disagree with its ranks is
    rejected.
    """
    rows: dict[str, list[tuple[int, str, float]]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 6:
            raise ValueError(f"{source}:{lineno}: expected 'qid Q0 doc_id rank score tag'")
        qid, _, doc_id, rank, sc, _ = parts
        rows.setdefault(qid, []).append((int(rank), doc_id, float(sc)))
    runs = {}
    for qid, entries in rows.items():
        entries.sort(key=lambda r: (r[0], r[1]))
        try:
            runs[qid] = RankedList.from_scored(qid, ((d, s) for _, d, s in entries))
        except ValueError as exc:
            raise ValueError(f"{source}: {exc}") from None
    return runs


def read_run(path: str | Path) -> dict[str, RankedList]:
    return parse_run(Path(path).read_text(encoding="utf-8"), str(path))


def run_all(index: Index, model: RetrievalModel, queries: Iterable[Query], kappa: int) -> dict[str, RankedList]:
    return {q.qid: search(index, model, q, kappa) for q in queries}

