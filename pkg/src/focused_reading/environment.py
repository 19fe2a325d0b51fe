"""The focused-reading MDP.

An episode starts from a knowledge graph holding only the two endpoints.
Each step the agent picks one of up to ``3n`` beam-ranked template queries
(or early stop); unseen retrieved documents are read, their co-occurrence
relations are merged into the graph, and the episode ends as soon as the
endpoints are connected or the step budget runs out.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import CorpusIndex, Query, Template
from .embeddings import EmbeddingStore, entity_vector
from .errors import ConfigurationError, ContractViolation, InvalidProblemError
from .extraction import extract
from .graph import InferencePath, KnowledgeGraph
from .topics import LdaModel, aggregate, entropy, kl_divergence

SEARCH_NORMALIZERS = ("max_steps", 1000.0, 1000.0, 1000.0)
FEATURE_GROUPS = ("search", "embeddings", "query", "topic")


class Outcome(enum.Enum):
    RUNNING = "running"
    SUCCESS = "success"
    TIMEOUT = "timeout"
    EARLY_STOP = "early_stop"


@dataclass(frozen=True)
class SearchProblem:
    source: str
    destination: str

    def __post_init__(self):
        if self.source == self.destination:
            raise InvalidProblemError(f"search problem endpoints are identical: {self.source!r}")

    def to_dict(self):
        return {"source": self.source, "destination": self.destination}


@dataclass(frozen=True)
class Action:
    query: Query | None
    rank_score: float = 0.0
    slot: int = -1  # position in the fixed 3n + 1 layout; -1 for queries outside the beam

    @property
    def is_stop(self) -> bool:
        return self.query is None

    @property
    def template(self):
        return None if self.query is None else self.query.template

    def __str__(self):
        return "early_stop" if self.query is None else str(self.query)


EARLY_STOP = Action(None, 0.0)


@dataclass
class RewardConfig:
    success: float = 1000.0
    doc_cost: float = 10.0
    empty_cost: float = 100.0
    early_stop_cost: float | None = None  # defaults to empty_cost

    def __post_init__(self):
        if not (self.success > 0 and self.doc_cost > 0 and self.empty_cost > 0):
            raise ConfigurationError("reward parameters S, c and e must all be positive")

    @property
    def stop_cost(self) -> float:
        return self.empty_cost if self.early_stop_cost is None else self.early_stop_cost


@dataclass
class EnvConfig:
    n_per_template: int = 15
    max_steps: int = 10
    reward: RewardConfig = field(default_factory=RewardConfig)
    max_pairs: int = 200_000
    prefilter_entities: int = 1000

    def __post_init__(self):
        if self.n_per_template < 1 or self.max_steps < 1:
            raise ConfigurationError("n_per_template and max_steps must be at least 1")
        if isinstance(self.reward, dict):
            self.reward = RewardConfig(**self.reward)

    @property
    def num_actions(self) -> int:
        return 3 * self.n_per_template + 1

    @property
    def stop_slot(self) -> int:
        return 3 * self.n_per_template


@dataclass
class StepRecord:
    iteration: int
    action: str
    m: int
    reward: float
    outcome: str

    def to_dict(self):
        return {"iteration": self.iteration, "action": self.action, "new_docs": self.m,
                "reward": self.reward, "outcome": self.outcome}


@dataclass
class EpisodeState:
    problem: SearchProblem
    kg: KnowledgeGraph
    seen_docs: set[str] = field(default_factory=set)
    iteration: int = 0
    last_step_docs: frozenset[str] = frozenset()
    outcome: Outcome = Outcome.RUNNING
    total_reward: float = 0.0
    path: InferencePath | None = None
    trace: list[StepRecord] = field(default_factory=list)

    @property
    def done(self) -> bool:
        return self.outcome is not Outcome.RUNNING

    @property
    def docs_processed(self) -> int:
        return len(self.seen_docs)


def feature_layout(dimension: int, n: int) -> dict[str, tuple[int, int]]:
    """Half-open [start, stop) offsets of each feature group."""
    spans = (("search", 4), ("embeddings", 2 * dimension), ("query", 6 * n), ("topic", 6 * n))
    out, start = {}, 0
    for name, size in spans:
        out[name] = (start, start + size)
        start += size
    return out


def feature_length(dimension: int, n: int) -> int:
    return 4 + 2 * dimension + 12 * n


def _top_indices(scores: np.ndarray, n: int) -> np.ndarray:
    """Indices of the n largest scores; ties keep ascending index order."""
    if scores.size <= n:
        return np.argsort(-scores, kind="stable")
    threshold = np.partition(scores, scores.size - n)[scores.size - n]
    keep = np.flatnonzero(scores >= threshold)
    order = np.argsort(-scores[keep], kind="stable")
    return keep[order][:n]


class FocusedReadingEnv:
    """Shared, read-only environment; all episode data lives in ``EpisodeState``."""

    def __init__(self, index: CorpusIndex, store: EmbeddingStore, lda: LdaModel | None = None,
                 config: EnvConfig | None = None):
        self.index = index
        self.store = store
        self.lda = lda
        self.config = config or EnvConfig()
        self._entity_row: dict[str, int] = {}
        entities = index.entities
        self._entity_row = {e: i for i, e in enumerate(entities)}
        self._vectors = np.zeros((len(entities), store.dimension))
        for e, i in self._entity_row.items():
            self._vectors[i] = entity_vector(store, index.description(e))
        self._tfidf = np.array([index.entity_tfidf(e) for e in entities], dtype=np.float64)
        self._extracted: dict[str, tuple] = {}

    @property
    def dimension(self) -> int:
        return self.store.dimension

    @property
    def feature_length(self) -> int:
        return feature_length(self.store.dimension, self.config.n_per_template)

    def vector(self, entity: str) -> np.ndarray:
        return self._vectors[self._entity_row[entity]]

    def similarity(self, a: str, b: str) -> float:
        va, vb = self.vector(a), self.vector(b)
        na, nb = np.linalg.norm(va), np.linalg.norm(vb)
        if na == 0 or nb == 0:
            return 0.0
        return float(np.clip(va @ vb / (na * nb), -1.0, 1.0))

    def _extract(self, doc_id):
        got = self._extracted.get(doc_id)
        if got is None:
            got = extract(self.index.documents[doc_id])
            self._extracted[doc_id] = got
        return got

    # episode lifecycle

    def reset(self, problem: SearchProblem) -> EpisodeState:
        for e in (problem.source, problem.destination):
            if e not in self._entity_row:
                raise InvalidProblemError(f"endpoint {e!r} does not occur in the corpus")
        return EpisodeState(problem=problem, kg=KnowledgeGraph.from_endpoints(problem.source, problem.destination))

    def candidate_actions(self, state: EpisodeState) -> list[Action]:
        """Beam-ranked query actions for every template followed by early stop."""
        if state.done:
            raise ContractViolation("candidate_actions on a finished episode")
        n = self.config.n_per_template
        verts = state.kg.sorted_vertices()
        rows = np.array([self._entity_row[v] for v in verts])
        actions: list[Action] = []

        pair_verts, pair_rows = verts, rows
        if len(verts) * (len(verts) - 1) // 2 > self.config.max_pairs:
            keep = np.sort(_top_indices(self._tfidf[rows], self.config.prefilter_entities))
            pair_verts = [verts[i] for i in keep]
            pair_rows = rows[keep]
        if len(pair_verts) >= 2:
            vecs = self._vectors[pair_rows]
            norms = np.linalg.norm(vecs, axis=1)
            unit = vecs / np.where(norms > 0, norms, 1.0)[:, None]
            iu, ju = np.triu_indices(len(pair_verts), 1)
            sims = np.clip(np.einsum("ij,ij->i", unit[iu], unit[ju]), -1.0, 1.0)
            top = _top_indices(sims, n)
            pairs = [(pair_verts[iu[k]], pair_verts[ju[k]], float(sims[k])) for k in top]
            for slot, (a, b, s) in enumerate(pairs):
                actions.append(Action(Query(Template.CONJUNCTION, (a, b)), s, slot))
            for slot, (a, b, s) in enumerate(pairs):
                actions.append(Action(Query(Template.DISJUNCTION, (a, b)), s, n + slot))

        scores = self._tfidf[rows]
        for slot, k in enumerate(_top_indices(scores, n)):
            actions.append(Action(Query(Template.SINGLETON, (verts[k],)), float(scores[k]), 2 * n + slot))
        actions.append(Action(None, 0.0, self.config.stop_slot))
        return actions

    def action_mask(self, actions: list[Action]) -> np.ndarray:
        mask = np.zeros(self.config.num_actions, dtype=bool)
        for a in actions:
            if a.slot >= 0:
                mask[a.slot] = True
        return mask

    def new_documents(self, state: EpisodeState, query: Query) -> frozenset[str]:
        return self.index.retrieve_set(query) - state.seen_docs

    def featurize(self, state: EpisodeState, actions: list[Action]) -> np.ndarray:
        n = self.config.n_per_template
        d = self.store.dimension
        slots = [a.slot for a in actions]
        if len(set(slots)) != len(slots) or any(not 0 <= s < self.config.num_actions for s in slots):
            raise ContractViolation("action list does not come from candidate_actions")
        kg = state.kg
        x = np.zeros(feature_length(d, n))
        x[0] = state.iteration / self.config.max_steps
        x[1] = len(state.seen_docs) / SEARCH_NORMALIZERS[1]
        x[2] = kg.num_vertices / SEARCH_NORMALIZERS[2]
        x[3] = kg.num_edges / SEARCH_NORMALIZERS[3]
        x[4:4 + d] = self.vector(state.problem.source)
        x[4 + d:4 + 2 * d] = self.vector(state.problem.destination)
        qbase = 4 + 2 * d
        tbase = qbase + 6 * n
        if self.lda is not None:
            kg_topics = aggregate(self.lda, state.seen_docs)
            prev_entropy = entropy(aggregate(self.lda, state.last_step_docs))
        for a in actions:
            if a.is_stop:
                continue
            if any(p not in kg for p in a.query.params):
                raise ContractViolation(f"{a} references entities outside the knowledge graph")
            new = self.new_documents(state, a.query)
            x[qbase + 2 * a.slot] = a.rank_score
            x[qbase + 2 * a.slot + 1] = len(new)
            if self.lda is not None:
                topics = aggregate(self.lda, new)
                x[tbase + 2 * a.slot] = entropy(topics) - prev_entropy
                x[tbase + 2 * a.slot + 1] = kl_divergence(topics, kg_topics)
        return x

    def step(self, state: EpisodeState, action: Action) -> tuple[EpisodeState, float, bool]:
        if state.done:
            raise ContractViolation("step on a finished episode")
        reward_cfg = self.config.reward
        if action.is_stop:
            state.iteration += 1
            state.outcome = Outcome.EARLY_STOP
            reward = -float(reward_cfg.stop_cost)
            state.total_reward += reward
            state.trace.append(StepRecord(state.iteration, str(action), 0, reward, state.outcome.value))
            return state, reward, True

        kg = state.kg
        if any(p not in kg for p in action.query.params):
            raise ContractViolation(f"{action} references entities outside the knowledge graph")
        new = self.new_documents(state, action.query)
        m = len(new)
        state.iteration += 1
        for doc_id in sorted(new):
            ents, rels = self._extract(doc_id)
            kg.expand(ents, rels, state.iteration)
        state.seen_docs |= new
        state.last_step_docs = frozenset(new)

        src, dst = state.problem.source, state.problem.destination
        if kg.is_connected(src, dst):
            state.outcome = Outcome.SUCCESS
            state.path = kg.shortest_path(src, dst)
            reward = float(reward_cfg.success)
        elif m > 0:
            reward = -float(reward_cfg.doc_cost) * m
        else:
            reward = -float(reward_cfg.empty_cost)
        if state.outcome is Outcome.RUNNING and state.iteration >= self.config.max_steps:
            state.outcome = Outcome.TIMEOUT
        state.total_reward += reward
        state.trace.append(StepRecord(state.iteration, str(action), m, reward, state.outcome.value))
        return state, reward, state.done


def write_trace(state: EpisodeState, fh) -> None:
    for rec in state.trace:
        fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def read_problems(path) -> list[SearchProblem]:
    problems = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                problems.append(SearchProblem(rec["source"], rec["destination"]))
    return problems


def write_problems(problems, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in problems:
            fh.write(json.dumps(p.to_dict(), sort_keys=True) + "\n")
