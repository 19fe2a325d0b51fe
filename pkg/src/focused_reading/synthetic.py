"""Synthetic annotated corpora with theme-correlated word vectors.

Each theme owns a block of vocabulary whose vectors cluster around a theme
centre, and a set of entities whose names are built from theme-flavoured
words. Documents mostly talk about one theme; a fraction bridge two themes,
which is what creates multi-hop paths across themes in the gold graph.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Document, Mention, tokenize
from .embeddings import EmbeddingStore

_ONSETS = ["b", "br", "c", "d", "dr", "f", "g", "gl", "h", "k", "l", "m", "n", "p", "qu", "r", "s", "st", "t", "tr", "v", "w", "z"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ea", "io", "ou"]
_CODAS = ["", "n", "r", "l", "s", "th", "m", "x", "nd", "rk"]


@dataclass
class SyntheticCorpus:
    documents: list[Document]
    raw_sentences: dict[str, list[str]]
    store: EmbeddingStore
    entities: list[str]
    entity_theme: dict[str, int]

    def write(self, corpus_path, embeddings_path) -> None:
        from .corpus import document_record
        from .embeddings import save_embeddings

        with open(corpus_path, "w", encoding="utf-8") as fh:
            for doc in self.documents:
                fh.write(json.dumps(document_record(doc, self.raw_sentences[doc.doc_id]), sort_keys=True) + "\n")
        save_embeddings(self.store, embeddings_path)


def _words(rng, count, taken):
    out = []
    while len(out) < count:
        syll = int(rng.integers(2, 4))
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))] for _ in range(syll))
        w += _CODAS[rng.integers(len(_CODAS))]
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


def _sentence(words):
    text = " ".join(words)
    return text[0].upper() + text[1:] + "."


def generate_corpus(n_docs: int = 500, n_entities: int = 150, n_themes: int = 6, dimension: int = 32,
                    theme_words: int = 60, generic_words: int = 150, sentences=(12, 20),
                    mentions=(2, 5), bridge_rate: float = 0.05, generic_rate: float = 0.3,
                    popularity_exponent: float = 1.0, spread: float = 1.0, seed: int = 0) -> SyntheticCorpus:
    rng = np.random.default_rng(seed)
    taken: set[str] = set()
    centres = rng.normal(size=(n_themes, dimension))
    centres /= np.linalg.norm(centres, axis=1, keepdims=True)
    vectors: dict[str, np.ndarray] = {}

    theme_vocab = []
    for t in range(n_themes):
        ws = _words(rng, theme_words, taken)
        for w in ws:
            vectors[w] = centres[t] + spread * rng.normal(size=dimension) / np.sqrt(dimension)
        theme_vocab.append(ws)
    generic = _words(rng, generic_words, taken)
    for w in generic:
        vectors[w] = rng.normal(size=dimension) / np.sqrt(dimension)

    entities, entity_theme, surfaces = [], {}, {}
    per_theme = [[] for _ in range(n_themes)]
    for i in range(n_entities):
        t = i % n_themes
        first = theme_vocab[t][int(rng.integers(theme_words))]
        (last,) = _words(rng, 1, taken)
        vectors[last] = centres[t] + spread * rng.normal(size=dimension) / np.sqrt(dimension)
        surface = f"{first.capitalize()} {last.capitalize()}"
        eid = surface.replace(" ", "_")
        entities.append(eid)
        entity_theme[eid] = t
        surfaces[eid] = surface
        per_theme[t].append(eid)

    popularity = []
    for t in range(n_themes):
        w = 1.0 / np.arange(1, len(per_theme[t]) + 1) ** popularity_exponent
        popularity.append(w / w.sum())

    def pick(t, k):
        k = min(k, len(per_theme[t]))
        idx = rng.choice(len(per_theme[t]), size=k, replace=False, p=popularity[t])
        return [per_theme[t][i] for i in idx]

    plans = []
    for d in range(n_docs):
        t = int(rng.integers(n_themes))
        k = int(rng.integers(mentions[0], mentions[1] + 1))
        ents = pick(t, k)
        if n_themes > 1 and rng.random() < bridge_rate:
            t2 = int((t + 1 + rng.integers(n_themes - 1)) % n_themes)
            ents = ents[: max(1, k - 2)] + pick(t2, 2)
        plans.append((t, ents))
    # every entity must occur somewhere
    mentioned = {e for _, ents in plans for e in ents}
    for e in entities:
        if e not in mentioned:
            d = int(rng.integers(n_docs))
            plans[d][1].append(e)

    documents, raw = [], {}
    for d, (t, ents) in enumerate(plans):
        n_sent = int(rng.integers(sentences[0], sentences[1] + 1))
        sents = []
        for _ in range(n_sent):
            length = int(rng.integers(8, 15))
            words = [generic[rng.integers(generic_words)] if rng.random() < generic_rate
                     else theme_vocab[t][rng.integers(theme_words)] for _ in range(length)]
            sents.append(words)
        ments = []
        for e in ents:
            s = int(rng.integers(n_sent))
            pos = int(rng.integers(len(sents[s]) + 1))
            sents[s].insert(pos, surfaces[e])
            ments.append(Mention(e, surfaces[e], s))
        raw_s = [_sentence(w) for w in sents]
        doc_id = f"doc{d:05d}"
        raw[doc_id] = raw_s
        documents.append(Document(
            doc_id=doc_id,
            title=f"Document {d}",
            sentences=tuple(tuple(tokenize(s)) for s in raw_s),
            mentions=tuple(ments),
            label=f"theme{t}",
        ))
    store = EmbeddingStore(dimension, {w: v.astype(np.float64) for w, v in sorted(vectors.items())})
    return SyntheticCorpus(documents, raw, store, entities, entity_theme)


def write_synthetic(outdir, **kwargs) -> tuple[Path, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    corpus = generate_corpus(**kwargs)
    cpath, epath = outdir / "corpus.jsonl", outdir / "embeddings.txt"
    corpus.write(cpath, epath)
    return cpath, epath
