import json
import math
import re
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from focused_reading.corpus import (
    Query,
    Template,
    build_index,
    ingest_corpus,
    load_index,
    save_index,
    tokenize,
)
from focused_reading.errors import ContractViolation, CorpusFormatError, DuplicateDocumentError

from .helpers import make_doc, write_jsonl


def record(doc_id, sentences, mentions):
    return {"id": doc_id, "title": doc_id.upper(), "sentences": sentences,
            "mentions": [{"entity": e, "surface": e, "sentence": s} for e, s in mentions]}


def test_single_document(tmp_path):
    path = tmp_path / "c.jsonl"
    write_jsonl(path, [record("d1", ["A met B."], [("A", 0), ("B", 0)])])
    index = ingest_corpus(path)
    assert index.postings == {"A": frozenset({"d1"}), "B": frozenset({"d1"})}
    assert index.corpus_size == 1


def test_empty_file(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text("")
    index = ingest_corpus(path)
    assert index.corpus_size == 0
    assert index.postings == {}


def test_malformed_line_names_line_number(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(json.dumps(record("d1", ["x"], [])) + "\n{not json\n")
    with pytest.raises(CorpusFormatError) as err:
        ingest_corpus(path)
    assert err.value.line_number == 2
    assert "line 2" in str(err.value)


def test_mention_outside_document_is_format_error(tmp_path):
    path = tmp_path / "c.jsonl"
    write_jsonl(path, [record("d1", ["one sentence"], [("A", 3)])])
    with pytest.raises(CorpusFormatError, match="line 1"):
        ingest_corpus(path)


def test_duplicate_doc_id_rejected(tmp_path):
    path = tmp_path / "c.jsonl"
    write_jsonl(path, [record("d1", ["x"], []), record("d1", ["y"], [])])
    with pytest.raises(DuplicateDocumentError):
        ingest_corpus(path)


def test_doc_frequency_matches_raw_scan(tmp_path):
    words = "red green blue cyan magenta yellow black white".split()
    records = []
    for i in range(10):
        sents = [" ".join(words[(i + j) % len(words)] for j in range(k + 1)) + "!" for k in range(i % 4 + 1)]
        records.append(record(f"d{i}", sents, []))
    path = tmp_path / "c.jsonl"
    write_jsonl(path, records)
    index = ingest_corpus(path)

    # independent scan of the raw file
    df, tf = Counter(), Counter()
    for line in path.read_text().splitlines():
        toks = [t for s in json.loads(line)["sentences"] for t in re.split(r"[^a-z0-9]+", s.lower()) if t]
        tf.update(toks)
        df.update(set(toks))
    assert index.doc_frequency == dict(df)
    assert index.term_frequency == dict(tf)
    for t, docs in index.term_postings.items():
        assert index.doc_frequency[t] == len(docs)


def test_tokenize_splits_on_non_alphanumerics():
    assert tokenize("Valley_of-Mexico, 1519!") == ["valley", "of", "mexico", "1519"]


def test_stemming_flag(tmp_path):
    path = tmp_path / "c.jsonl"
    write_jsonl(path, [record("d1", ["running runners ran"], [])])
    plain = ingest_corpus(path)
    stemmed = ingest_corpus(path, stem=True)
    assert "running" in plain.doc_frequency
    assert "run" in stemmed.doc_frequency
    assert "running" not in stemmed.doc_frequency


@pytest.fixture
def abc_index():
    return build_index([
        make_doc("d1", [("A", 0)]),
        make_doc("d2", [("A", 0), ("B", 0)]),
        make_doc("d3", [("B", 0)]),
        make_doc("d4", [("X", 0)]),
    ])


def test_retrieve_templates(abc_index):
    assert abc_index.retrieve(Query.conjunction("A", "B")) == ["d2"]
    assert abc_index.retrieve(Query.disjunction("A", "B")) == ["d1", "d2", "d3"]
    assert abc_index.retrieve(Query.singleton("A")) == ["d1", "d2"]


def test_disjoint_conjunction_is_empty(abc_index):
    assert abc_index.retrieve(Query.conjunction("A", "X")) == []


def test_unknown_entity_contributes_nothing(abc_index):
    assert abc_index.retrieve(Query.singleton("nobody")) == []
    assert abc_index.retrieve(Query.disjunction("A", "nobody")) == ["d1", "d2"]


def test_query_arity_enforced():
    with pytest.raises(ContractViolation):
        Query(Template.SINGLETON, ("A", "B"))
    with pytest.raises(ContractViolation):
        Query(Template.CONJUNCTION, ("A",))
    with pytest.raises(ContractViolation):
        Query.conjunction("A", "A")


corpora = st.lists(
    st.lists(st.sampled_from("ABCDEFG"), min_size=0, max_size=5),
    min_size=1, max_size=12,
)


@settings(max_examples=200, deadline=None)
@given(corpora, st.sampled_from("ABCDEFGH"), st.sampled_from("ABCDEFGH"))
def test_template_containment(doc_entities, a, b):
    index = build_index([make_doc(f"d{i}", [(e, 0) for e in ents]) for i, ents in enumerate(doc_entities)])
    sa = set(index.retrieve(Query.singleton(a)))
    sb = set(index.retrieve(Query.singleton(b)))
    if a == b:
        return
    conj = set(index.retrieve(Query.conjunction(a, b)))
    disj = set(index.retrieve(Query.disjunction(a, b)))
    assert conj <= sa & sb
    assert conj == sa & sb
    assert disj == sa | sb
    # purity: identical repeated answers, sorted
    assert index.retrieve(Query.disjunction(a, b)) == sorted(disj) == index.retrieve(Query.disjunction(b, a))


@settings(max_examples=100, deadline=None)
@given(corpora)
def test_ingestion_round_trip(doc_entities):
    docs = [make_doc(f"d{i}", [(e, 0) for e in ents]) for i, ents in enumerate(doc_entities)]
    index = build_index(docs)
    for doc in docs:
        for m in doc.mentions:
            assert doc.doc_id in index.postings[m.entity]
    for e, ids in index.postings.items():
        for d in ids:
            assert any(m.entity == e for m in index.documents[d].mentions)


def tfidf_index(counts_per_doc):
    """counts_per_doc: list of {token: count}; builds docs whose text has exactly those counts."""
    docs = []
    for i, counts in enumerate(counts_per_doc):
        text = " ".join(t for t, c in counts.items() for _ in range(c)) or "pad"
        docs.append(make_doc(f"d{i}", [], n_sentences=1, text=text))
    return build_index(docs)


def test_avg_tfidf_clamps_negative_idf():
    index = tfidf_index([{"common": 1, f"w{i}": 1} for i in range(10)])
    assert index.avg_tfidf(["common"]) == 0.0


def test_avg_tfidf_hand_value():
    counts = [{"rare": 4}] + [{f"w{i}": 1} for i in range(9)]
    index = tfidf_index(counts)
    assert index.avg_tfidf(["rare"]) == pytest.approx(4 * math.log(5), rel=1e-12)


def test_avg_tfidf_is_mean_and_oov_counts_zero():
    counts = [{"rare": 4}] + [{f"w{i}": 1} for i in range(9)]
    index = tfidf_index(counts)
    w0 = index.avg_tfidf(["w0"])
    assert w0 == pytest.approx(math.log(10 / 2))
    assert index.avg_tfidf(["rare", "w0"]) == pytest.approx((4 * math.log(5) + w0) / 2)
    assert index.avg_tfidf(["rare", "nowhere"]) == pytest.approx(4 * math.log(5) / 2)


def test_avg_tfidf_empty_description_warns():
    index = tfidf_index([{"a": 1}])
    with pytest.warns(UserWarning):
        assert index.avg_tfidf([]) == 0.0


def test_index_cache_round_trip(tmp_path, abc_index):
    path = tmp_path / "index.pkl"
    save_index(abc_index, path)
    again = load_index(path)
    assert again.postings == abc_index.postings
    assert again.doc_frequency == abc_index.doc_frequency
