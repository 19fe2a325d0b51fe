"""Co-occurrence relation extraction and the gold knowledge graph."""

from __future__ import annotations

from collections import defaultdict

from .corpus import CorpusIndex, Document
from .graph import KnowledgeGraph, Relation, edge_key

# Mentions at most this many sentence indices apart are related (three consecutive sentences).
WINDOW = 2


def cooccurring_pairs(doc: Document, window: int = WINDOW) -> set[tuple[str, str]]:
    by_sentence = defaultdict(set)
    for m in doc.mentions:
        by_sentence[m.sentence].add(m.entity)
    pairs = set()
    sentences = sorted(by_sentence)
    for i in sentences:
        near = set()
        for j in range(i, i + window + 1):
            near |= by_sentence.get(j, set())
        for a in by_sentence[i]:
            for b in near:
                if a != b:
                    pairs.add(edge_key(a, b))
    return pairs


def extract(doc: Document, window: int = WINDOW) -> tuple[frozenset[str], frozenset[Relation]]:
    prov = frozenset((doc.doc_id,))
    relations = frozenset(Relation(a, b, prov) for a, b in cooccurring_pairs(doc, window))
    return doc.entities, relations


def build_gold_kg(index: CorpusIndex, window: int = WINDOW) -> KnowledgeGraph:
    provenance = defaultdict(set)
    entities = set()
    for doc_id in sorted(index.documents):
        doc = index.documents[doc_id]
        entities |= doc.entities
        for key in cooccurring_pairs(doc, window):
            provenance[key].add(doc_id)
    kg = KnowledgeGraph()
    edges = [Relation(a, b, frozenset(d)) for (a, b), d in sorted(provenance.items())]
    return kg.expand(entities, edges, 0)

