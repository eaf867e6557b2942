import pytest

from qpp_workbench.index import build_index, load_index, read_topics
from qpp_workbench.metrics import read_qrels
from qpp_workbench.synthetic import bundled_paths

TOY_DOCS = [
    ("d1", "the cat sat on the mat"),
    ("d2", "a cat ran fast and the cat jumped"),
    ("d3", "dogs bark loudly at night"),
    ("d4", "cat and dog play together in the garden"),
    ("d5", "garden flowers bloom"),
]


@pytest.fixture(scope="session")
def toy_index():
    return build_index(TOY_DOCS)


@pytest.fixture(scope="session")
def bundled():
    paths = bundled_paths()
    return {
        "paths": paths,
        "index": load_index(paths["corpus"]),
        "queries": read_topics(paths["topics"]),
        "qrels": read_qrels(paths["qrels"]),
    }


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
