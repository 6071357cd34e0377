import pytest

from app.schemas.cards import dump_cards
from app.schemas.query import dump_query
from tests import queries


# ------------------------------
# Queries
# ------------------------------
@pytest.fixture
def star_query():
    return queries.star


@pytest.fixture
def hier_query():
    return queries.hierarchical()


@pytest.fixture
def four_way_query():
    return queries.four_way()


@pytest.fixture
def two_level_query():
    return queries.two_level_minor()


@pytest.fixture
def five_children_query():
    return queries.five_children_minor()


@pytest.fixture
def dummy_query():
    return queries.dummy_shared()


@pytest.fixture
def movies_query():
    return queries.movie_keywords()


@pytest.fixture
def triangle_query():
    return queries.triangle()


# ------------------------------
# Plans and trees over the hierarchical query
# ------------------------------
@pytest.fixture
def hier_tree(hier_query):
    """R1 at the root with R2 and R4 below it, R3 under R2."""
    return queries.tree(hier_query, "R1", {"R2": "R1", "R4": "R1", "R3": "R2"})


@pytest.fixture
def hier_bushy_plan(hier_query):
    return queries.plan(hier_query, (("R1", "R4"), ("R2", "R3")))


@pytest.fixture
def hier_wide_plan(hier_query):
    return queries.plan(hier_query, ((("R1", "R2"), "R3"), "R4"))


@pytest.fixture
def hier_cards(hier_query):
    return queries.hierarchical_cards(hier_query)


# ------------------------------
# Files for CLI runs
# ------------------------------
@pytest.fixture
def write_query(tmp_path):
    def write(H, name="query.json"):
        path = tmp_path / name
        path.write_text(dump_query(H))
        return str(path)
    return write


@pytest.fixture
def write_cards(tmp_path):
    def write(cp, name="cards.json"):
        path = tmp_path / name
        path.write_text(dump_cards(cp))
        return str(path)
    return write
