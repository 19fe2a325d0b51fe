"""Annotated corpus loading, inverted index and boolean template retrieval."""

from __future__ import annotations

import enum
import json
import math
import pickle
import re
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import ContractViolation, CorpusFormatError, DataError, DuplicateDocumentError

_TOKEN_RE = re.compile(r"[^\W_]+")

_stemmer = None


def _stem(token):
    global _stemmer
    if _stemmer is None:
        from nltk.stem import PorterStemmer

        _stemmer = PorterStemmer()
    return _stemmer.stem(token)


def tokenize(text: str, stem: bool = False) -> list[str]:
    """Lowercase and split on anything that is not a letter or digit."""
    tokens = _TOKEN_RE.findall(text.lower())
    if stem:
        tokens = [_stem(t) for t in tokens]
    return tokens


@dataclass(frozen=True)
class Mention:
    entity: str
    surface: str
    sentence: int


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    sentences: tuple[tuple[str, ...], ...]
    mentions: tuple[Mention, ...]
    label: str | None = None

    def __post_init__(self):
        for m in self.mentions:
            if not 0 <= m.sentence < len(self.sentences):
                raise ContractViolation(
                    f"document {self.doc_id!r}: mention {m.entity!r} at sentence "
                    f"{m.sentence} but only {len(self.sentences)} sentences"
                )

    @property
    def tokens(self):
        for sent in self.sentences:
            yield from sent

    @property
    def entities(self) -> frozenset[str]:
        return frozenset(m.entity for m in self.mentions)


class Template(enum.Enum):
    CONJUNCTION = "conjunction"
    SINGLETON = "singleton"
    DISJUNCTION = "disjunction"


@dataclass(frozen=True)
class Query:
    template: Template
    params: tuple[str, ...]

    def __post_init__(self):
        want = 1 if self.template is Template.SINGLETON else 2
        if len(self.params) != want:
            raise ContractViolation(
                f"{self.template.value} query takes {want} entity parameter(s), got {len(self.params)}"
            )
        if want == 2 and self.params[0] == self.params[1]:
            raise ContractViolation("pair queries need two distinct entities")

    @classmethod
    def conjunction(cls, a, b):
        return cls(Template.CONJUNCTION, tuple(sorted((a, b))))

    @classmethod
    def disjunction(cls, a, b):
        return cls(Template.DISJUNCTION, tuple(sorted((a, b))))

    @classmethod
    def singleton(cls, e):
        return cls(Template.SINGLETON, (e,))

    def __str__(self):
        op = {Template.CONJUNCTION: " AND ", Template.DISJUNCTION: " OR "}.get(self.template, "")
        return f"{self.template.value}({op.join(self.params)})"


_EMPTY: frozenset[str] = frozenset()


@dataclass
class CorpusIndex:
    documents: dict[str, Document]
    postings: dict[str, frozenset[str]]
    term_postings: dict[str, frozenset[str]]
    doc_frequency: dict[str, int]
    term_frequency: dict[str, int]
    stem: bool = False
    _tfidf_cache: dict[str, float] = field(default_factory=dict, repr=False, compare=False)

    @property
    def corpus_size(self) -> int:
        return len(self.documents)

    @property
    def entities(self) -> list[str]:
        return sorted(self.postings)

    def tokenize(self, text: str) -> list[str]:
        return tokenize(text, stem=self.stem)

    def description(self, entity: str) -> list[str]:
        """Natural-language description of an entity: its tokenized identifier/title."""
        return self.tokenize(entity)

    def retrieve_set(self, q: Query) -> frozenset[str]:
        get = self.postings.get
        if q.template is Template.SINGLETON:
            return get(q.params[0], _EMPTY)
        a, b = get(q.params[0], _EMPTY), get(q.params[1], _EMPTY)
        if q.template is Template.CONJUNCTION:
            return a & b
        return a | b

    def retrieve(self, q: Query) -> list[str]:
        return sorted(self.retrieve_set(q))

    def tfidf(self, token: str) -> float:
        n = self.corpus_size
        df = self.doc_frequency.get(token, 0)
        if df == 0 or n == 0:
            return 0.0
        idf = math.log(n / (1 + df))
        return self.term_frequency[token] * max(idf, 0.0)

    def avg_tfidf(self, description: list[str]) -> float:
        if not description:
            warnings.warn("avg_tfidf called with an empty description", stacklevel=2)
            return 0.0
        if self.corpus_size == 0:
            raise ContractViolation("avg_tfidf needs a non-empty index")
        return sum(self.tfidf(t) for t in description) / len(description)

    def entity_tfidf(self, entity: str) -> float:
        score = self._tfidf_cache.get(entity)
        if score is None:
            desc = self.description(entity)
            score = self.avg_tfidf(desc) if desc else 0.0
            self._tfidf_cache[entity] = score
        return score

    def stats(self) -> dict:
        return {
            "documents": self.corpus_size,
            "entities": len(self.postings),
            "vocabulary": len(self.term_postings),
            "tokens": sum(self.term_frequency.values()),
            "stemmed": self.stem,
        }


def build_index(documents: Iterable[Document], stem: bool = False) -> CorpusIndex:
    docs: dict[str, Document] = {}
    postings = defaultdict(set)
    term_postings = defaultdict(set)
    tf = Counter()
    for doc in documents:
        if doc.doc_id in docs:
            raise DuplicateDocumentError(f"duplicate document id {doc.doc_id!r}")
        docs[doc.doc_id] = doc
        for m in doc.mentions:
            postings[m.entity].add(doc.doc_id)
        for tok in doc.tokens:
            tf[tok] += 1
            term_postings[tok].add(doc.doc_id)
    term_postings = {t: frozenset(ds) for t, ds in term_postings.items()}
    return CorpusIndex(
        documents=docs,
        postings={e: frozenset(ds) for e, ds in postings.items()},
        term_postings=term_postings,
        doc_frequency={t: len(ds) for t, ds in term_postings.items()},
        term_frequency=dict(tf),
        stem=stem,
    )


def parse_document(record: dict, stem: bool = False) -> Document:
    sentences = tuple(tuple(tokenize(s, stem)) for s in record["sentences"])
    mentions = tuple(
        Mention(str(m["entity"]), str(m.get("surface", m["entity"])), int(m["sentence"]))
        for m in record.get("mentions", ())
    )
    return Document(
        doc_id=str(record["id"]),
        title=str(record.get("title", "")),
        sentences=sentences,
        mentions=mentions,
        label=record.get("label"),
    )


def read_documents(path, stem: bool = False):
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise TypeError("expected a JSON object")
                yield parse_document(record, stem)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, DataError):
                    raise
                raise CorpusFormatError(lineno, str(exc)) from exc


def ingest_corpus(path, stem: bool = False) -> CorpusIndex:
    """Load a JSON-lines corpus file and index it."""
    return build_index(read_documents(path, stem), stem=stem)


def document_record(doc: Document, raw_sentences=None) -> dict:
    rec = {
        "id": doc.doc_id,
        "title": doc.title,
        "sentences": raw_sentences if raw_sentences is not None else [" ".join(s) for s in doc.sentences],
        "mentions": [{"entity": m.entity, "surface": m.surface, "sentence": m.sentence} for m in doc.mentions],
    }
    if doc.label is not None:
        rec["label"] = doc.label
    return rec


def save_index(index: CorpusIndex, path) -> None:
    with open(path, "wb") as fh:
        pickle.dump(index, fh, protocol=pickle.HIGHEST_PROTOCOL)


def load_index(path) -> CorpusIndex:
    with open(path, "rb") as fh:
        index = pickle.load(fh)
    if not isinstance(index, CorpusIndex):
        raise DataError(f"{path} is not a corpus index cache")
    return index


def load_corpus(path, stem: bool = False) -> CorpusIndex:
    """Accept either a JSON-lines corpus or a pickled index cache."""
    path = Path(path)
    if path.suffix in (".pkl", ".pickle", ".idx"):
        return load_index(path)
    return ingest_corpus(path, stem=stem)
