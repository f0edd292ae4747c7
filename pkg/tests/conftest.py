import os
from pathlib import Path

import numpy as np
import pytest

from lasagne_graph import datasets
from lasagne_graph.graph import CsrGraph

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def data_dir():
    """Directory holding user-supplied datasets, or None."""
    d = os.environ.get("LASAGNE_DATA_DIR")
    return Path(d) if d else None


def dataset_files(*names):
    d = data_dir()
    if d is None:
        return None
    paths = [d / n for n in names]
    return paths if all(p.exists() for p in paths) else None


def graph_from_edges(edges, n=None):
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return CsrGraph.from_edges(e[:, 0], e[:, 1], n)


@pytest.fixture(scope="session")
def karate():
    return datasets.karate_graph()


@pytest.fixture(scope="session")
def karate_factions(karate):
    return datasets.karate_labels(karate)


@pytest.fixture
def two_triangles():
    return graph_from_edges([(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)])


@pytest.fixture
def edge_file(tmp_path):
    def write(text, name="g.txt"):
        p = tmp_path / name
        p.write_text(text)
        return p
    return write
