"""LDA topic model (collapsed Gibbs) and topic-distribution features."""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from numba import njit

from .corpus import CorpusIndex
from .errors import ConfigurationError, ContractViolation, DataError

log = logging.getLogger(__name__)

KL_FLOOR = 1e-10


@dataclass
class LdaModel:
    num_topics: int
    alpha: float
    beta: float
    vocabulary: list[str]
    topic_word: np.ndarray  # K x V
    doc_ids: list[str]
    doc_topic_matrix: np.ndarray  # D x K
    seed: int | None = None
    iterations: int = 0
    _row: dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._row = {d: i for i, d in enumerate(self.doc_ids)}

    @property
    def doc_topics(self) -> dict[str, np.ndarray]:
        return {d: self.doc_topic_matrix[i] for d, i in self._row.items()}

    def rows(self, docs: Iterable[str]) -> list[int]:
        try:
            return [self._row[d] for d in docs]
        except KeyError as exc:
            raise ContractViolation(f"document {exc.args[0]!r} unknown to the topic model") from None

    def uniform(self) -> np.ndarray:
        return np.full(self.num_topics, 1.0 / self.num_topics)

    def to_dict(self) -> dict:
        return {
            "format": "focused-reading-lda/1",
            "num_topics": self.num_topics,
            "alpha": self.alpha,
            "beta": self.beta,
            "seed": self.seed,
            "iterations": self.iterations,
            "vocabulary": self.vocabulary,
            "topic_word": self.topic_word.tolist(),
            "doc_ids": self.doc_ids,
            "doc_topics": self.doc_topic_matrix.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "LdaModel":
        if d.get("format") != "focused-reading-lda/1":
            raise DataError("not a focused-reading LDA model file")
        K = int(d["num_topics"])
        return cls(
            num_topics=K,
            alpha=float(d["alpha"]),
            beta=float(d["beta"]),
            vocabulary=list(d["vocabulary"]),
            topic_word=np.array(d["topic_word"], dtype=np.float64).reshape(K, len(d["vocabulary"])),
            doc_ids=list(d["doc_ids"]),
            doc_topic_matrix=np.array(d["doc_topics"], dtype=np.float64).reshape(len(d["doc_ids"]), K),
            seed=d.get("seed"),
            iterations=int(d.get("iterations", 0)),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "LdaModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@njit(cache=True)
def _gibbs_sweep(words, docs, z, ndk, nkw, nk, alpha, beta, vbeta, u):
    K = nk.shape[0]
    cum = np.empty(K)
    for i in range(words.shape[0]):
        w = words[i]
        d = docs[i]
        k = z[i]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1
        total = 0.0
        for t in range(K):
            total += (ndk[d, t] + alpha) * (nkw[t, w] + beta) / (nk[t] + vbeta)
            cum[t] = total
        r = u[i] * total
        k = 0
        while k < K - 1 and cum[k] <= r:
            k += 1
        z[i] = k
        ndk[d, k] += 1
        nkw[k, w] += 1
        nk[k] += 1


def train_lda(
    index: CorpusIndex,
    num_topics: int = 50,
    iterations: int = 200,
    seed: int = 0,
    alpha: float | None = None,
    beta: float = 0.01,
) -> LdaModel:
    """Fit LDA by collapsed Gibbs sampling; alpha defaults to 50/K."""
    if num_topics < 2:
        raise ConfigurationError(f"need at least 2 topics, got {num_topics}")
    if index.corpus_size == 0:
        raise ConfigurationError("cannot train a topic model on an empty corpus")
    if iterations < 0:
        raise ConfigurationError("iterations must be non-negative")
    if alpha is None:
        alpha = 50.0 / num_topics

    doc_ids = sorted(index.documents)
    vocab = sorted(index.term_postings)
    vid = {t: i for i, t in enumerate(vocab)}
    words, docs = [], []
    for d, doc_id in enumerate(doc_ids):
        for tok in index.documents[doc_id].tokens:
            words.append(vid[tok])
            docs.append(d)
    words = np.asarray(words, dtype=np.int64)
    docs = np.asarray(docs, dtype=np.int64)
    K, V, D = num_topics, len(vocab), len(doc_ids)

    rng = np.random.default_rng(seed)
    z = rng.integers(0, K, size=words.size).astype(np.int64)
    ndk = np.zeros((D, K), dtype=np.int64)
    nkw = np.zeros((K, V), dtype=np.int64)
    np.add.at(ndk, (docs, z), 1)
    np.add.at(nkw, (z, words), 1)
    nk = nkw.sum(axis=1)

    for it in range(iterations):
        u = rng.random(words.size)
        _gibbs_sweep(words, docs, z, ndk, nkw, nk, float(alpha), float(beta), float(V * beta), u)
        if log.isEnabledFor(logging.DEBUG) and (it + 1) % 50 == 0:
            log.debug("gibbs sweep %d/%d", it + 1, iterations)

    theta = (ndk + alpha) / (ndk.sum(axis=1, keepdims=True) + K * alpha)
    phi = (nkw + beta) / (nk[:, None] + V * beta)
    return LdaModel(
        num_topics=K,
        alpha=float(alpha),
        beta=float(beta),
        vocabulary=vocab,
        topic_word=phi,
        doc_ids=doc_ids,
        doc_topic_matrix=theta,
        seed=seed,
        iterations=iterations,
    )


def aggregate(model: LdaModel, docs: Iterable[str]) -> np.ndarray:
    """Sum the documents' topic distributions and renormalize; empty set gives uniform."""
    # sorted so the float summation order does not depend on set iteration order
    rows = model.rows(sorted(docs))
    if not rows:
        return model.uniform()
    total = model.doc_topic_matrix[rows].sum(axis=0)
    return total / total.sum()


def entropy(p) -> float:
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def kl_divergence(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ContractViolation(f"KL between distributions of sizes {p.shape} and {q.shape}")
    p = np.maximum(p, KL_FLOOR)
    q = np.maximum(q, KL_FLOOR)
    p = p / p.sum()
    q = q / q.sum()
    return float(np.sum(p * np.log(p / q)))


def delta_entropy(candidate_docs, previous_step_docs, model: LdaModel) -> float:
    return entropy(aggregate(model, candidate_docs)) - entropy(aggregate(model, previous_step_docs))


def topic_purity(model: LdaModel, labels: Mapping[str, str]) -> float:
    """Mean over label groups of the share of documents whose top topic is the group's majority topic."""
    groups: dict[str, list[int]] = {}
    for doc_id, label in labels.items():
        groups.setdefault(label, []).append(int(np.argmax(model.doc_topic_matrix[model.rows([doc_id])[0]])))
    if not groups:
        return math.nan
    scores = []
    for tops in groups.values():
        scores.append(Counter(tops).most_common(1)[0][1] / len(tops))
    return float(np.mean(scores))
