import pathlib

import pytest

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
TUTORIALS = FIXTURES / "tutorials"
FILTER_TREE = FIXTURES / "filter_tree"
LOGS = FIXTURES / "logs"


def dictionary_corpus():
    """Every OpenFOAM dictionary file vendored under tests/fixtures."""
    skip = {".msh", ".inp"}
    return sorted(
        p
        for p in FIXTURES.rglob("*")
        if p.is_file() and p.suffix not in skip and "logs" not in p.parts
    )


@pytest.fixture(scope="session")
def tutorials_root():
    return TUTORIALS


@pytest.fixture(scope="session")
def filter_tree_root():
    return FILTER_TREE
