"""Per-episode knowledge graph: monotone expansion, connectivity and path extraction."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Iterable

from .errors import ContractViolation


def edge_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Relation:
    """Undirected, untyped co-occurrence relation with its supporting documents."""

    source: str
    target: str
    provenance: frozenset[str]

    def __post_init__(self):
        if self.source == self.target:
            raise ContractViolation(f"self-relation on {self.source!r}")
        if self.source > self.target:
            s, t = self.target, self.source
            object.__setattr__(self, "source", s)
            object.__setattr__(self, "target", t)
        if not self.provenance:
            raise ContractViolation("relation without provenance")
        if not isinstance(self.provenance, frozenset):
            object.__setattr__(self, "provenance", frozenset(self.provenance))

    @property
    def key(self):
        return (self.source, self.target)


@dataclass(frozen=True)
class InferencePath:
    entities: tuple[str, ...]
    supporting_docs: tuple[frozenset[str], ...]

    @property
    def hops(self) -> int:
        return len(self.entities) - 1

    def to_dict(self) -> dict:
        return {
            "entities": list(self.entities),
            "hops": [
                {"from": a, "to": b, "docs": sorted(docs)}
                for a, b, docs in zip(self.entities, self.entities[1:], self.supporting_docs)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class KnowledgeGraph:
    """Entities as vertices, relations as edges; only ever grows."""

    def __init__(self, vertices: Iterable[str] = (), iteration: int = 0):
        self.adjacency: dict[str, set[str]] = {}
        self.provenance: dict[tuple[str, str], set[str]] = {}
        self.origin: dict[str, int] = {}
        for v in vertices:
            self._add_vertex(v, iteration)

    @classmethod
    def from_endpoints(cls, e1: str, e2: str) -> "KnowledgeGraph":
        return cls((e1, e2), iteration=0)

    def _add_vertex(self, v, iteration):
        if v not in self.adjacency:
            self.adjacency[v] = set()
            self.origin[v] = iteration

    @property
    def vertices(self) -> frozenset[str]:
        return frozenset(self.adjacency)

    @property
    def edges(self) -> set[Relation]:
        return {Relation(a, b, frozenset(d)) for (a, b), d in self.provenance.items()}

    @property
    def num_vertices(self) -> int:
        return len(self.adjacency)

    @property
    def num_edges(self) -> int:
        return len(self.provenance)

    def __contains__(self, v):
        return v in self.adjacency

    def has_edge(self, a, b) -> bool:
        return edge_key(a, b) in self.provenance

    def edge_docs(self, a, b) -> frozenset[str]:
        return frozenset(self.provenance[edge_key(a, b)])

    def sorted_vertices(self) -> list[str]:
        return sorted(self.adjacency)

    def expand(self, new_vertices: Iterable[str], new_edges: Iterable[Relation], iteration: int) -> "KnowledgeGraph":
        """Add vertices and edges in place; duplicate edges merge provenance."""
        new_vertices = set(new_vertices)
        new_edges = list(new_edges)
        known = self.adjacency.keys() | new_vertices
        for r in new_edges:
            if r.source not in known or r.target not in known:
                raise ContractViolation(f"edge ({r.source}, {r.target}) has an endpoint outside the graph")
        for v in sorted(new_vertices):
            self._add_vertex(v, iteration)
        for r in new_edges:
            docs = self.provenance.get(r.key)
            if docs is None:
                self.provenance[r.key] = set(r.provenance)
                self.adjacency[r.source].add(r.target)
                self.adjacency[r.target].add(r.source)
            else:
                docs.update(r.provenance)
        return self

    def _check(self, *vs):
        for v in vs:
            if v not in self.adjacency:
                raise ContractViolation(f"entity {v!r} is not in the knowledge graph")

    def _bfs_parents(self, e1, e2):
        # Lexicographic neighbor order makes the discovered path deterministic.
        parent = {e1: None}
        queue = deque([e1])
        while queue:
            u = queue.popleft()
            if u == e2:
                return parent
            for w in sorted(self.adjacency[u]):
                if w not in parent:
                    parent[w] = u
                    queue.append(w)
        return None

    def is_connected(self, e1: str, e2: str) -> bool:
        self._check(e1, e2)
        if e1 == e2:
            return True
        seen = {e1}
        stack = [e1]
        while stack:
            u = stack.pop()
            for w in self.adjacency[u]:
                if w == e2:
                    return True
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return False

    def shortest_path(self, e1: str, e2: str) -> InferencePath | None:
        self._check(e1, e2)
        parent = self._bfs_parents(e1, e2)
        if parent is None:
            return None
        path = [e2]
        while path[-1] != e1:
            path.append(parent[path[-1]])
        path.reverse()
        docs = tuple(self.edge_docs(a, b) for a, b in zip(path, path[1:]))
        return InferencePath(tuple(path), docs)

    def hop_distances(self, source: str, max_hops: int | None = None) -> dict[str, int]:
        """BFS hop counts from ``source`` to every reachable vertex (optionally bounded)."""
        self._check(source)
        dist = {source: 0}
        queue = deque([source])
        while queue:
            u = queue.popleft()
            if max_hops is not None and dist[u] >= max_hops:
                continue
            for w in self.adjacency[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return dist

    def copy(self) -> "KnowledgeGraph":
        kg = KnowledgeGraph()
        kg.adjacency = {v: set(ns) for v, ns in self.adjacency.items()}
        kg.provenance = {k: set(d) for k, d in self.provenance.items()}
        kg.origin = dict(self.origin)
        return kg

    def __eq__(self, other):
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self.adjacency == other.adjacency and self.provenance == other.provenance

    def __repr__(self):
        return f"KnowledgeGraph(vertices={self.num_vertices}, edges={self.num_edges})"

    def edge_records(self):
        for (a, b) in sorted(self.provenance):
            yield {"source": a, "target": b, "docs": sorted(self.provenance[(a, b)])}


def write_edges(kg: KnowledgeGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in kg.edge_records():
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_edges(path) -> KnowledgeGraph:
    kg = KnowledgeGraph()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            kg.expand({rec["source"], rec["target"]}, [Relation(rec["source"], rec["target"], frozenset(rec["docs"]))], 0)
    return kg
