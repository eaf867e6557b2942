"""Text analysis, corpus readers and the in-memory inverted index."""

from __future__ import annotations

import gzip
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

import numpy as np
from nltk.stem.porter import PorterStemmer

from .stopwords import ENGLISH_STOPWORDS

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[^\W_]+")
_STEMMER = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


class CorpusError(ValueError):
    """Raised for malformed or empty corpora, topics and snapshots."""


@lru_cache(maxsize=1 << 16)
def _stem(token: str) -> str:
    return _STEMMER.stem(token)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def analyze(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop stopwords, Porter-stem."""
    return [_stem(tok) for tok in tokenize(text) if tok not in ENGLISH_STOPWORDS]


@dataclass(frozen=True)
class Document:
    doc_id: str
    term_counts: Mapping[str, int]
    length: int

    @classmethod
    def from_terms(cls, doc_id: str, terms: Iterable[str]) -> "Document":
        counts = Counter(terms)
        return cls(doc_id, MappingProxyType(dict(counts)), sum(counts.values()))

    def tf(self, term: str) -> int:
        return self.term_counts.get(term, 0)


@dataclass(frozen=True)
class CorpusStats:
    num_docs: int
    total_tokens: int
    doc_freq: Mapping[str, int]
    coll_freq: Mapping[str, int]
    avg_doc_len: float

    def df(self, term: str) -> int:
        return self.doc_freq.get(term, 0)

    def cf(self, term: str) -> int:
        return self.coll_freq.get(term, 0)

    def p_coll(self, term: str) -> float:
        """Collection language model probability cf(t)/|C|."""
        if self.total_tokens == 0:
            return 0.0
        return self.coll_freq.get(term, 0) / self.total_tokens

    @property
    def vocab_size(self) -> int:
        return len(self.doc_freq)


@dataclass(frozen=True)
class Query:
    qid: str
    terms: tuple[str, ...]

    def __post_init__(self):
        if not self.terms:
            raise CorpusError(f"query {self.qid!r} is empty after analysis")
        object.__setattr__(self, "terms", tuple(self.terms))

    @classmethod
    def parse(cls, qid: str, text: str) -> "Query":
        return cls(qid, tuple(analyze(text)))

    @cached_property
    def qtf(self) -> Mapping[str, int]:
        """Query term frequencies, in first-occurrence order."""
        return MappingProxyType(dict(Counter(self.terms)))


@dataclass(frozen=True)
class Index:
    """Immutable inverted index over a corpus.

    Postings are tuples of ``(doc_id, tf)`` in corpus insertion order.
    """

    documents: Mapping[str, Document]
    stats: CorpusStats
    postings: Mapping[str, tuple[tuple[str, int], ...]] = field(repr=False)

    def __len__(self) -> int:
        return len(self.documents)

    def document(self, doc_id: str) -> Document:
        try:
            return self.documents[doc_id]
        except KeyError:
            raise KeyError(f"document {doc_id!r} is not in the index") from None

    def posting_list(self, term: str) -> tuple[tuple[str, int], ...]:
        return self.postings.get(term, ())

    @cached_property
    def vocabulary(self) -> tuple[str, ...]:
        """Indexed terms in sorted order; a term's position is its term id."""
        return tuple(sorted(self.postings))

    @cached_property
    def term_ids(self) -> Mapping[str, int]:
        return MappingProxyType({t: i for i, t in enumerate(self.vocabulary)})

    @cached_property
    def collection_probs(self) -> np.ndarray:
        """cf(t)/|C| indexed by term id."""
        cf = np.array([self.stats.coll_freq[t] for t in self.vocabulary], dtype=float)
        return cf / self.stats.total_tokens

    @cached_property
    def doc_vectors(self) -> Mapping[str, tuple[np.ndarray, np.ndarray]]:
        """Per document: (term ids, term counts) as parallel arrays."""
        ids = self.term_ids
        out = {}
        for doc_id, doc in self.documents.items():
            out[doc_id] = (
                np.fromiter((ids[t] for t in doc.term_counts), dtype=np.int64, count=len(doc.term_counts)),
                np.fromiter(doc.term_counts.values(), dtype=float, count=len(doc.term_counts)),
            )
        return MappingProxyType(out)


def build_index(corpus: Iterable[tuple[str, str]]) -> Index:
    """Build an index from ``(doc_id, raw_text)`` pairs."""
    docs: dict[str, Document] = {}
    for doc_id, text in corpus:
        if doc_id in docs:
            raise CorpusError(f"duplicate doc_id {doc_id!r}")
        docs[doc_id] = Document.from_terms(doc_id, analyze(text))
    return index_from_documents(docs.values())


def index_from_documents(documents: Iterable[Document]) -> Index:
    docs: dict[str, Document] = {}
    for doc in documents:
        if doc.doc_id in docs:
            raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
        docs[doc.doc_id] = doc
    if not docs:
        raise CorpusError("empty corpus")

    postings: dict[str, list[tuple[str, int]]] = {}
    cf: dict[str, int] = {}
    total = 0
    for doc in docs.values():
        total += doc.length
        for term, tf in doc.term_counts.items():
            postings.setdefault(term, []).append((doc.doc_id, tf))
            cf[term] = cf.get(term, 0) + tf
    df = {term: len(plist) for term, plist in postings.items()}
    stats = CorpusStats(
        num_docs=len(docs),
        total_tokens=total,
        doc_freq=MappingProxyType(df),
        coll_freq=MappingProxyType(cf),
        avg_doc_len=total / len(docs),
    )
    frozen = {term: tuple(plist) for term, plist in postings.items()}
    return Index(MappingProxyType(docs), stats, MappingProxyType(frozen))


# -- snapshots ---------------------------------------------------------------

def save_snapshot(index: Index, path: str | Path) -> None:
    """Write a portable gzipped-JSON snapshot of the analysed documents."""
    payload = {
        "format": "qpp-workbench-snapshot",
        "version": 1,
        "documents": [[d.doc_id, dict(d.term_counts)] for d in index.documents.values()],
    }
    with gzip.open(path, "wt", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))


def load_snapshot(path: str | Path) -> Index:
    with gzip.open(path, "rt", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "qpp-workbench-snapshot":
        raise CorpusError(f"{path}: not an index snapshot")
    docs = (
        Document(doc_id, MappingProxyType(counts), sum(counts.values()))
        for doc_id, counts in payload["documents"]
    )
    return index_from_documents(docs)


# -- corpus readers ----------------------------------------------------------

def read_tsv_corpus(path: str | Path) -> Iterator[tuple[str, str]]:
    """Yield ``(doc_id, text)`` from ``doc_id<TAB>text`` lines."""
    path = Path(path)
    if path.is_dir():
        raise CorpusError(f"{path}: expected a TSV file, got a directory")
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            doc_id, sep, text = line.partition("\t")
            if not sep or not doc_id:
                raise CorpusError(f"{path}:{lineno}: expected 'doc_id<TAB>text'")
            yield doc_id, text


_DOC_RE = re.compile(r"<DOC>(.*?)</DOC>", re.S | re.I)
_DOCNO_RE = re.compile(r"<DOCNO>\s*(.*?)\s*</DOCNO>", re.S | re.I)
_TEXT_RE = re.compile(r"<TEXT>(.*?)</TEXT>", re.S | re.I)
_TAG_RE = re.compile(r"<[^>]+>")


def parse_trec_documents(raw: str, source: str = "<string>") -> Iterator[tuple[str, str]]:
    found = False
    for m in _DOC_RE.finditer(raw):
        found = True
        body = m.group(1)
        docno = _DOCNO_RE.search(body)
        if docno is None:
            line = raw.count("\n", 0, m.start()) + 1
            raise CorpusError(f"{source}:{line}: <DOC> without <DOCNO>")
        texts = _TEXT_RE.findall(body)
        yield docno.group(1), _TAG_RE.sub(" ", " ".join(texts))
    if not found:
        raise CorpusError(f"{source}: no <DOC> records (not a TREC SGML file?)")


def read_trec_corpus(path: str | Path) -> Iterator[tuple[str, str]]:
    """Yield documents from a TREC SGML file or a directory of them."""
    path = Path(path)
    files = sorted(p for p in path.rglob("*") if p.is_file()) if path.is_dir() else [path]
    for f in files:
        opener = gzip.open if f.suffix == ".gz" else open
        with opener(f, "rt", encoding="utf-8", errors="replace") as fh:
            yield from parse_trec_documents(fh.read(), str(f))


def load_index(path: str | Path, fmt: str = "tsv") -> Index:
    """Build an index from a corpus path, or load a snapshot (``*.json.gz``)."""
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"{path}: no such file or directory")
    if path.name.endswith(".json.gz"):
        return load_snapshot(path)
    if fmt == "tsv":
        return build_index(read_tsv_corpus(path))
    if fmt == "trec":
        return build_index(read_trec_corpus(path))
    raise CorpusError(f"unknown corpus format {fmt!r}")


# -- topics ------------------------------------------------------------------

_TOP_RE = re.compile(r"<top>(.*?)</top>", re.S | re.I)
_NUM_RE = re.compile(r"<num>\s*(?:Number:)?\s*(\S+)", re.I)
_TITLE_RE = re.compile(r"<title>\s*(?:Topic:)?(.*?)(?=<|\Z)", re.S | re.I)


def parse_topics(raw: str, fmt: str = "tsv", source: str = "<string>") -> list[tuple[str, str]]:
    """Return ``(qid, text)`` pairs; TREC format keeps the title field only."""
    pairs = []
    if fmt == "tsv":
        for lineno, line in enumerate(raw.splitlines(), 1):
            if not line.strip():
                continue
            qid, sep, text = line.partition("\t")
            if not sep:
                raise CorpusError(f"{source}:{lineno}: expected 'qid<TAB>query text'")
            pairs.append((qid.strip(), text.strip()))
    elif fmt == "trec":
        for m in _TOP_RE.finditer(raw):
            num = _NUM_RE.search(m.group(1))
            title = _TITLE_RE.search(m.group(1))
            if num is None or title is None:
                raise CorpusError(f"{source}: topic without <num> or <title>")
            pairs.append((num.group(1), " ".join(title.group(1).split())))
    else:
        raise CorpusError(f"unknown topics format {fmt!r}")
    return pairs


def read_topics(path: str | Path, fmt: str = "tsv") -> list[Query]:
    """Parse a topics file into queries; queries empty after analysis are rejected."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if fmt == "auto":
        fmt = "trec" if "<top>" in text.lower() else "tsv"
    queries = []
    seen = set()
    for qid, raw in parse_topics(text, fmt, str(path)):
        if qid in seen:
            raise CorpusError(f"{path}: duplicate qid {qid!r}")
        seen.add(qid)
        queries.append(Query.parse(qid, raw))
    return queries
