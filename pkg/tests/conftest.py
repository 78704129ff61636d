import itertools

import pytest
from hypothesis import strategies as st

from lossyaep.measures import Alphabet, ColoredGraph

AB = Alphabet(("a", "b"))
ABC = Alphabet(("a", "b", "c"))


@st.composite
def graphs(draw, alphabet=ABC, max_n=7):
    n = draw(st.integers(1, max_n))
    colors = draw(st.lists(st.sampled_from(alphabet.symbols), min_size=n, max_size=n))
    pairs = list(itertools.combinations(range(n), 2))
    edges = draw(st.sets(st.sampled_from(pairs), max_size=len(pairs))) if pairs else set()
    return ColoredGraph(alphabet, tuple(colors), frozenset(edges))


@st.composite
def graph_pairs(draw, alphabet=ABC, max_n=6):
    x = draw(graphs(alphabet, max_n))
    n = x.n
    colors = draw(st.lists(st.sampled_from(alphabet.symbols), min_size=n, max_size=n))
    pairs = list(itertools.combinations(range(n), 2))
    edges = draw(st.sets(st.sampled_from(pairs), max_size=len(pairs))) if pairs else set()
    return x, ColoredGraph(alphabet, tuple(colors), frozenset(edges))


@pytest.fixture
def ab():
    return AB


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
