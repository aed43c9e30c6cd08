import functools

import pytest

from permcover.graph import build_graph


@functools.lru_cache(maxsize=None)
def _graph(n):
    return build_graph(n)


@pytest.fixture(scope="session")
def graph():
    """Callable fixture: graph(n) builds each coverage graph once per session."""
    return _graph
