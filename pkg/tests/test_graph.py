import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from focused_reading.errors import ContractViolation
from focused_reading.extraction import build_gold_kg, extract
from focused_reading.corpus import build_index
from focused_reading.graph import KnowledgeGraph, Relation, read_edges, write_edges

from .helpers import make_doc


def rel(a, b, *docs):
    return Relation(a, b, frozenset(docs or ("d",)))


# --- oracles -------------------------------------------------------------

def closure(n, edges):
    """Boolean reachability by Floyd-Warshall style closure."""
    reach = np.eye(n, dtype=bool)
    for a, b in edges:
        reach[a, b] = reach[b, a] = True
    for k in range(n):
        reach |= reach[:, k:k + 1] & reach[k:k + 1, :]
    return reach


def hop_matrix(n, edges):
    """All-pairs hop counts by repeated relaxation (Floyd-Warshall on unit weights)."""
    inf = 10 ** 9
    dist = np.full((n, n), inf, dtype=np.int64)
    np.fill_diagonal(dist, 0)
    for a, b in edges:
        dist[a, b] = dist[b, a] = 1
    for k in range(n):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return dist


def random_graph(rng, max_vertices=50):
    n = int(rng.integers(2, max_vertices + 1))
    p = rng.uniform(0.0, 4.0 / n)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    names = [f"v{i:02d}" for i in range(n)]
    kg = KnowledgeGraph(names)
    kg.expand([], [rel(names[a], names[b], f"doc{a}-{b}") for a, b in edges], 1)
    return n, edges, names, kg


# --- extraction ----------------------------------------------------------

def test_window_includes_three_sentences():
    ents, rels = extract(make_doc("d", [("A", 0), ("B", 2)]))
    assert ents == {"A", "B"}
    assert {r.key for r in rels} == {("A", "B")}
    assert all(r.provenance == {"d"} for r in rels)


def test_window_excludes_fourth_sentence():
    _, rels = extract(make_doc("d", [("A", 0), ("B", 3)]))
    assert rels == frozenset()


def test_no_self_relations():
    ents, rels = extract(make_doc("d", [("A", 1), ("A", 1)]))
    assert ents == {"A"} and rels == frozenset()


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("ABCDEF"), st.integers(0, 8)), max_size=10), st.randoms())
def test_extract_order_insensitive(mentions, rnd):
    shuffled = list(mentions)
    rnd.shuffle(shuffled)
    doc_a = make_doc("d", mentions, n_sentences=9)
    doc_b = make_doc("d", shuffled, n_sentences=9)
    assert extract(doc_a) == extract(doc_b)


def test_gold_kg_merges_provenance():
    index = build_index([make_doc("d1", [("A", 0), ("B", 0)]), make_doc("d2", [("B", 1), ("A", 0)])])
    kg = build_gold_kg(index)
    assert kg.num_edges == 1
    assert kg.edge_docs("A", "B") == {"d1", "d2"}


def test_gold_kg_empty_corpus():
    kg = build_gold_kg(build_index([]))
    assert kg.num_vertices == 0 and kg.num_edges == 0


def test_gold_kg_matches_pairwise_scan():
    rng = np.random.default_rng(3)
    docs = []
    for i in range(10):
        ms = [(f"E{int(rng.integers(8))}", int(rng.integers(6))) for _ in range(int(rng.integers(0, 7)))]
        docs.append(make_doc(f"d{i}", ms, n_sentences=6))
    kg = build_gold_kg(build_index(docs))
    expected = {}
    for doc in docs:
        for x in doc.mentions:
            for y in doc.mentions:
                if x.entity < y.entity and abs(x.sentence - y.sentence) <= 2:
                    expected.setdefault((x.entity, y.entity), set()).add(doc.doc_id)
    assert {k: set(v) for k, v in kg.provenance.items()} == expected
    # traceability: every edge has a supporting document containing both entities
    for (a, b), ds in kg.provenance.items():
        assert ds
        for d in ds:
            assert {a, b} <= {m.entity for m in next(x for x in docs if x.doc_id == d).mentions}


# --- knowledge graph -----------------------------------------------------

def test_expand_from_endpoints():
    kg = KnowledgeGraph.from_endpoints("E1", "E2")
    kg.expand({"C"}, {rel("E1", "C")}, 1)
    assert kg.num_vertices == 3 and kg.num_edges == 1
    assert kg.origin == {"E1": 0, "E2": 0, "C": 1}


def test_readding_edge_grows_provenance_only():
    kg = KnowledgeGraph.from_endpoints("E1", "E2")
    kg.expand(set(), {rel("E1", "E2", "d1")}, 1)
    kg.expand({"E1"}, {rel("E2", "E1", "d2")}, 2)
    assert kg.num_edges == 1
    assert kg.edge_docs("E1", "E2") == {"d1", "d2"}
    assert kg.origin["E1"] == 0


def test_dangling_edge_rejected():
    kg = KnowledgeGraph.from_endpoints("E1", "E2")
    with pytest.raises(ContractViolation):
        kg.expand(set(), {rel("E1", "Z")}, 1)


def test_random_expansions_equal_union():
    rng = np.random.default_rng(11)
    kg = KnowledgeGraph.from_endpoints("v0", "v1")
    all_v, all_e = {"v0", "v1"}, {}
    for it in range(1, 30):
        vs = {f"v{int(rng.integers(20))}" for _ in range(3)}
        pool = sorted(all_v | vs)
        es = []
        for _ in range(3):
            a, b = rng.choice(len(pool), 2, replace=False)
            doc = f"d{it}"
            es.append(rel(pool[a], pool[b], doc))
            all_e.setdefault(es[-1].key, set()).add(doc)
        kg.expand(vs, es, it)
        all_v |= vs
    assert kg.vertices == all_v
    assert {k: set(v) for k, v in kg.provenance.items()} == all_e


def test_is_connected_basic():
    kg = KnowledgeGraph.from_endpoints("E1", "E2")
    assert not kg.is_connected("E1", "E2")
    kg.expand({"C", "D"}, {rel("E1", "C"), rel("D", "E2")}, 1)
    assert not kg.is_connected("E1", "E2")
    kg.expand(set(), {rel("E1", "E2")}, 2)
    assert kg.is_connected("E1", "E2")


def test_missing_endpoint_rejected():
    kg = KnowledgeGraph.from_endpoints("E1", "E2")
    with pytest.raises(ContractViolation):
        kg.is_connected("E1", "nope")
    with pytest.raises(ContractViolation):
        kg.shortest_path("nope", "E2")


def test_chain_path():
    kg = KnowledgeGraph.from_endpoints("E1", "E2")
    kg.expand({"C"}, {rel("E1", "C", "d1"), rel("C", "E2", "d2")}, 1)
    path = kg.shortest_path("E1", "E2")
    assert path.entities == ("E1", "C", "E2")
    assert path.hops == 2
    assert path.supporting_docs == (frozenset({"d1"}), frozenset({"d2"}))
    exported = json.loads(path.to_json())
    assert exported == {"entities": ["E1", "C", "E2"],
                        "hops": [{"from": "E1", "to": "C", "docs": ["d1"]},
                                 {"from": "C", "to": "E2", "docs": ["d2"]}]}


def test_disconnected_path_is_none():
    kg = KnowledgeGraph.from_endpoints("E1", "E2")
    assert kg.shortest_path("E1", "E2") is None


def test_tie_break_is_lexicographic():
    kg = KnowledgeGraph.from_endpoints("E1", "E2")
    kg.expand({"B", "A"}, {rel("E1", "B"), rel("B", "E2"), rel("E1", "A"), rel("A", "E2")}, 1)
    assert kg.shortest_path("E1", "E2").entities == ("E1", "A", "E2")
    assert kg.copy().shortest_path("E1", "E2") == kg.shortest_path("E1", "E2")


def test_random_graphs_against_oracles():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n, edges, names, kg = random_graph(rng)
        reach = closure(n, edges)
        dist = hop_matrix(n, edges)
        for _ in range(10):
            i, j = (int(x) for x in rng.integers(0, n, 2))
            assert kg.is_connected(names[i], names[j]) == bool(reach[i, j])
            path = kg.shortest_path(names[i], names[j])
            assert (path is not None) == bool(reach[i, j])
            if path is not None:
                assert path.hops == dist[i, j]
                assert path.entities[0] == names[i] and path.entities[-1] == names[j]
                for a, b, docs in zip(path.entities, path.entities[1:], path.supporting_docs):
                    assert kg.has_edge(a, b) and docs == kg.edge_docs(a, b)


def test_connectivity_is_monotone():
    rng = np.random.default_rng(5)
    kg = KnowledgeGraph.from_endpoints("v00", "v01")
    connected = False
    for it in range(40):
        a, b = (f"v{int(x):02d}" for x in rng.choice(15, 2, replace=False))
        kg.expand({a, b}, {rel(a, b, f"d{it}")}, it)
        now = kg.is_connected("v00", "v01")
        assert now or not connected
        connected = now


def test_edge_export_round_trip(tmp_path):
    kg = KnowledgeGraph.from_endpoints("E1", "E2")
    kg.expand({"C"}, {rel("E1", "C", "d1", "d3"), rel("C", "E2", "d2")}, 1)
    write_edges(kg, tmp_path / "kg.jsonl")
    lines = [json.loads(x) for x in (tmp_path / "kg.jsonl").read_text().splitlines()]
    assert lines[0] == {"source": "C", "target": "E1", "docs": ["d1", "d3"]}
    assert read_edges(tmp_path / "kg.jsonl") == kg
