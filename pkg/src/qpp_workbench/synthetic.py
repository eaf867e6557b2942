"""Deterministic synthetic test collection (documents, topics, graded qrels).

Stands in for a licensed TREC collection at desk scale.  Documents mix a
Zipfian background vocabulary with topical words; topics vary in how
ambiguous their queries are, so retrieval effectiveness varies across
queries the way it does on real collections.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .index import analyze
from .stopwords import ENGLISH_STOPWORDS

DEFAULT_SEED = 1729
CORPUS_FILE = "synthetic_corpus.tsv"
TOPICS_FILE = "synthetic_topics.tsv"
QRELS_FILE = "synthetic_qrels.txt"

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "t", "v", "z", "br", "gr", "tr", "pl", "st", "kr", "dr"]
_VOWELS = ["a", "o", "u", "i", "e"]
_CODAS = ["", "n", "r", "m", "k", "l", "t", "x"]
_FILLERS = ["the", "of", "and", "a", "in", "to", "for", "with", "on", "is", "was", "by", "that", "from"]


@dataclass
class SyntheticCollection:
    documents: list[tuple[str, str]]
    topics: list[tuple[str, str]]
    qrels: list[tuple[str, str, int]]

    def write(self, directory: str | Path) -> dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {
            "corpus": directory / CORPUS_FILE,
            "topics": directory / TOPICS_FILE,
            "qrels": directory / QRELS_FILE,
        }
        paths["corpus"].write_text("".join(f"{d}\t{t}\n" for d, t in self.documents), encoding="utf-8")
        paths["topics"].write_text("".join(f"{q}\t{t}\n" for q, t in self.topics), encoding="utf-8")
        paths["qrels"].write_text("".join(f"{q} 0 {d} {g}\n" for q, d, g in self.qrels), encoding="utf-8")
        return paths


def _make_vocabulary(rng: random.Random, size: int) -> list[str]:
    words = []
    seen = set()
    while len(words) < size:
        n_syll = rng.choice((2, 2, 3))
        word = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(n_syll))
        word += rng.choice(_CODAS)
        if word in seen or word in ENGLISH_STOPWORDS or analyze(word) != [word]:
            continue
        seen.add(word)
        words.append(word)
    return words


def generate(seed: int = DEFAULT_SEED, num_docs: int = 1000, num_topics: int = 50,
             vocab_size: int = 3000, words_per_topic: int = 10) -> SyntheticCollection:
    rng = random.Random(seed)
    vocab = _make_vocabulary(rng, vocab_size + num_topics * words_per_topic)
    background = vocab[:vocab_size]
    zipf = list(itertools.accumulate(1.0 / (r + 1) ** 1.05 for r in range(vocab_size)))

    topical = vocab[vocab_size:]
    topic_words = [topical[i * words_per_topic:(i + 1) * words_per_topic] for i in range(num_topics)]
    # borrow a few mid-frequency background words into each topic so queries overlap
    for words in topic_words:
        words.extend(rng.sample(background[50:600], 3))
    ambiguity = [rng.random() for _ in range(num_topics)]

    docs = []
    judgments: dict[int, list[tuple[str, int]]] = {t: [] for t in range(num_topics)}
    for i in range(num_docs):
        doc_id = f"SYN-{i + 1:04d}"
        length = max(15, min(400, int(rng.lognormvariate(4.1, 0.5))))
        topic = rng.randrange(num_topics) if rng.random() < 0.65 else None
        strength = rng.uniform(0.02, 0.35) if topic is not None else 0.0
        distractor = rng.randrange(num_topics)
        tokens = []
        for _ in range(length):
            u = rng.random()
            if topic is not None and u < strength:
                tokens.append(rng.choice(topic_words[topic]))
            elif u > 0.96:
                tokens.append(rng.choice(topic_words[distractor]))
            else:
                tokens.append(rng.choices(background, cum_weights=zipf)[0])
        words = []
        for j, tok in enumerate(tokens):
            if rng.random() < 0.3:
                words.append(rng.choice(_FILLERS))
            words.append(tok.capitalize() if j == 0 or rng.random() < 0.03 else tok)
            if rng.random() < 0.08:
                words[-1] += rng.choice((".", ",", ";"))
        docs.append((doc_id, " ".join(words)))
        if topic is not None and strength >= 0.10:
            judgments[topic].append((doc_id, 2 if strength >= 0.22 else 1))

    topics = []
    qrels = []
    for t in range(num_topics):
        qid = str(301 + t)
        n_terms = rng.choice((2, 3, 3, 4))
        terms = rng.sample(topic_words[t][:words_per_topic], n_terms)
        # ambiguous topics swap query words for other topics' or common words
        for j in range(n_terms):
            if rng.random() < ambiguity[t] * 0.7:
                terms[j] = rng.choice(topic_words[rng.randrange(num_topics)] + background[:100])
        text = " ".join(w if rng.random() < 0.7 else f"{rng.choice(_FILLERS)} {w}" for w in terms)
        topics.append((qid, text.title() if rng.random() < 0.3 else text))
        rel = judgments[t]
        if not rel:
            continue
        for doc_id, grade in rel:
            qrels.append((qid, doc_id, grade))
        # judged non-relevant pool: a few distractor documents
        for doc_id, _ in rng.sample(docs, 5):
            if all(doc_id != d for d, _ in rel):
                qrels.append((qid, doc_id, 0))
    return SyntheticCollection(docs, topics, qrels)


def bundled_paths() -> dict[str, Path]:
    """Paths of the synthetic collection shipped with the package."""
    base = resources.files("qpp_workbench") / "data"
    return {
        "corpus": Path(str(base / CORPUS_FILE)),
        "topics": Path(str(base / TOPICS_FILE)),
        "qrels": Path(str(base / QRELS_FILE)),
    }
