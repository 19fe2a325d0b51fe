import numpy as np
import pytest

from focused_reading.corpus import build_index
from focused_reading.embeddings import EmbeddingStore

from .helpers import ACCEPTANCE_RESULTS, make_doc


@pytest.fixture
def tiny_store():
    vecs = {
        "alpha": np.array([1.0, 0.0, 0.0, 0.0]),
        "beta": np.array([0.0, 1.0, 0.0, 0.0]),
        "gamma": np.array([1.0, 1.0, 0.0, 0.0]),
        "delta": np.array([0.0, 0.0, 1.0, 0.0]),
    }
    return EmbeddingStore(4, vecs)


@pytest.fixture
def chain_index():
    """E1 -d1- C -d2- E2, plus an isolated pair D-F in d3."""
    docs = [
        make_doc("d1", [("E1", 0), ("C", 1)]),
        make_doc("d2", [("C", 0), ("E2", 2)]),
        make_doc("d3", [("D", 0), ("F", 0)]),
    ]
    return build_index(docs)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
