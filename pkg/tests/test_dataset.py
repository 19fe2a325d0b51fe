from collections import deque

import numpy as np
import pytest

from focused_reading.corpus import build_index
from focused_reading.dataset import eligible_pairs, generate_problems, read_splits, write_splits
from focused_reading.errors import ConfigurationError, ShortfallError
from focused_reading.extraction import build_gold_kg
from focused_reading.graph import KnowledgeGraph, Relation
from focused_reading.synthetic import generate_corpus


def chain(*names):
    kg = KnowledgeGraph(names)
    kg.expand([], [Relation(a, b, frozenset({f"{a}{b}"})) for a, b in zip(names, names[1:])], 1)
    return kg


def bfs_hops(kg, source):
    """Independent hop counter working on the raw edge list."""
    adj = {}
    for a, b in kg.provenance:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    dist, queue = {source: 0}, deque([source])
    while queue:
        u = queue.popleft()
        for v in adj.get(u, ()):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def check_invariants(gold, splits, min_hops, max_hops):
    names = ("train", "dev", "test")
    for i, x in enumerate(names):
        for y in names[i + 1:]:
            assert not splits.endpoints(x) & splits.endpoints(y)
    seen = set()
    for name in names:
        for p in splits.split(name):
            key = frozenset((p.source, p.destination))
            assert key not in seen
            seen.add(key)
            assert min_hops <= bfs_hops(gold, p.source).get(p.destination, -1) <= max_hops


def test_chain_single_problem():
    gold = chain("A", "B", "C", "D")
    assert [(a, b) for a, b, _ in eligible_pairs(gold, 2, 4)] == [("A", "C"), ("A", "D"), ("B", "D")]
    splits = generate_problems(gold, (1, 0, 0), seed=3)
    (p,) = splits.train
    assert frozenset((p.source, p.destination)) in {frozenset("AC"), frozenset("BD"), frozenset("AD")}


def test_chain_shortfall_reports_achievable():
    with pytest.raises(ShortfallError) as err:
        generate_problems(chain("A", "B", "C", "D"), (1, 1, 1), seed=0)
    assert sum(err.value.achievable.values()) < 3


def test_min_hops_below_two_rejected():
    with pytest.raises(ConfigurationError):
        generate_problems(chain("A", "B", "C"), (1, 0, 0), min_hops=1)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_invariants_on_random_graphs(seed):
    rng = np.random.default_rng(seed)
    names = [f"e{i:02d}" for i in range(60)]
    kg = KnowledgeGraph(names)
    rels = []
    for _ in range(70):
        a, b = rng.choice(60, 2, replace=False)
        rels.append(Relation(names[a], names[b], frozenset({"d"})))
    kg.expand([], rels, 1)
    splits = generate_problems(kg, (10, 5, 5), min_hops=2, max_hops=4, seed=seed)
    assert (len(splits.train), len(splits.dev), len(splits.test)) == (10, 5, 5)
    check_invariants(kg, splits, 2, 4)


def test_eligible_pairs_match_bfs():
    rng = np.random.default_rng(8)
    names = [f"e{i:02d}" for i in range(30)]
    kg = KnowledgeGraph(names)
    kg.expand([], [Relation(names[a], names[b], frozenset({"d"}))
                   for a, b in (rng.choice(30, 2, replace=False) for _ in range(35))], 1)
    expected = sorted((a, b, d) for a in names for b, d in bfs_hops(kg, a).items() if a < b and 2 <= d <= 3)
    assert eligible_pairs(kg, 2, 3) == expected


def test_synthetic_splits_and_io(tmp_path):
    corpus = generate_corpus(seed=0)
    gold = build_gold_kg(build_index(corpus.documents))
    splits = generate_problems(gold, (100, 0, 50), seed=0)
    check_invariants(gold, splits, 2, 4)
    write_splits(splits, tmp_path, {"seed": 0})
    assert read_splits(tmp_path) == splits
    assert generate_problems(gold, (100, 0, 50), seed=0) == splits
