"""Word-vector store, entity vectors and cosine similarity."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DataError

log = logging.getLogger(__name__)


@dataclass
class EmbeddingStore:
    dimension: int
    vectors: dict[str, np.ndarray]

    def __contains__(self, token):
        return token in self.vectors

    def __len__(self):
        return len(self.vectors)


def load_embeddings(path) -> EmbeddingStore:
    """Read the standard ``token v1 ... vd`` text format."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: non-numeric component ({exc})") from None
            if dim is None:
                if vec.size == 0:
                    raise DataError(f"{path}: line {lineno}: vector has no components")
                dim = vec.size
            elif vec.size != dim:
                raise DataError(f"{path}: line {lineno}: expected {dim} components, found {vec.size}")
            if token in vectors:
                log.warning("duplicate embedding for %r at line %d; keeping the later one", token, lineno)
            vectors[token] = vec
    if dim is None:
        raise DataError(f"{path}: no vectors, cannot determine the dimension")
    return EmbeddingStore(dim, vectors)


def save_embeddings(store: EmbeddingStore, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for token in sorted(store.vectors):
            fh.write(token + " " + " ".join(repr(float(x)) for x in store.vectors[token]) + "\n")


def entity_vector(store: EmbeddingStore, description: list[str]) -> np.ndarray:
    """Mean of the in-vocabulary token vectors; zero vector when none are known."""
    known = [store.vectors[t] for t in description if t in store.vectors]
    if not known:
        if description:
            log.debug("all tokens out of vocabulary: %s", description)
        return np.zeros(store.dimension)
    return np.mean(known, axis=0)


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractViolation(f"cosine of vectors with shapes {a.shape} and {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def cosine_matrix(vectors: np.ndarray) -> np.ndarray:
    """All-pairs cosine of the rows; zero rows give 0 similarity."""
    norms = np.linalg.norm(vectors, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = vectors / safe[:, None]
    sims = unit @ unit.T
    return np.clip(sims, -1.0, 1.0)
