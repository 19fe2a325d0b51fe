"""Learning to direct multi-hop focused reading with actor-critic RL."""

from .corpus import CorpusIndex, Document, Query, Template, ingest_corpus
from .environment import Action, EnvConfig, FocusedReadingEnv, Outcome, RewardConfig, SearchProblem
from .graph import InferencePath, KnowledgeGraph, Relation

__version__ = "0.1.0"

__all__ = [
    "Action",
    "CorpusIndex",
    "Document",
    "EnvConfig",
    "FocusedReadingEnv",
    "InferencePath",
    "KnowledgeGraph",
    "Outcome",
    "Query",
    "RewardConfig",
    "SearchProblem",
    "Relation",
    "Template",
    "ingest_corpus",
]
