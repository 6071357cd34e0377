import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.errors import DisconnectedError, InvalidArgumentError
from app.models.hypergraph import BitsetIndex, EdgeRef, Hypergraph, gyo_is_acyclic, gyo_order, is_ear, overlap
from app.services.oracle import oracle_join_trees
from app.services.workload import gen_acyclic
from tests.queries import ids


def test_attribute_ids_follow_first_appearance(hier_query):
    assert hier_query.attribute_names == ("x1", "x2", "x3", "x4", "x5", "x6", "x7")
    assert hier_query.attribute_id("x5") == 4
    assert hier_query.relation_id("R3") == 2
    assert hier_query.edges[2] == frozenset({4, 5})


def test_rejects_malformed_queries():
    with pytest.raises(InvalidArgumentError):
        Hypergraph.from_relations([("R", ["a"]), ("R", ["a", "b"])])
    with pytest.raises(InvalidArgumentError):
        Hypergraph.from_relations([("R", ["a", "a"])])
    with pytest.raises(InvalidArgumentError):
        Hypergraph.from_relations([("R", ["a"])], output=["z"])
    with pytest.raises(InvalidArgumentError):
        Hypergraph.from_relations([])


def test_disconnected_queries():
    relations = [("A", ["x"]), ("B", ["y"])]
    with pytest.raises(DisconnectedError):
        Hypergraph.from_relations(relations)
    H = Hypergraph.from_relations(relations, require_connected=False)
    assert not H.is_connected()


def test_unknown_names(hier_query):
    with pytest.raises(InvalidArgumentError):
        hier_query.relation_id("R9")
    with pytest.raises(InvalidArgumentError):
        hier_query.attribute_id("x9")


def test_interface_and_width1_sets(hier_query):
    x = hier_query.attribute_id
    assert hier_query.interface(ids(hier_query, "R1", "R2")) == {x("x3"), x("x5")}
    assert not hier_query.is_width1_set(ids(hier_query, "R1", "R2"))
    assert hier_query.interface(ids(hier_query, "R1", "R4")) == {x("x1")}
    assert hier_query.is_width1_set(ids(hier_query, "R1", "R4"))
    assert hier_query.interface(hier_query.full) == frozenset()


def test_overlap_and_ears(hier_query):
    x = hier_query.attribute_id
    assert overlap(2, hier_query) == {x("x5")}
    assert is_ear(2, hier_query) == (True, EdgeRef("R", 1))
    assert is_ear(0, hier_query) == (False, None)


def test_gyo(hier_query, triangle_query, four_way_query):
    order = gyo_order(hier_query)
    assert sorted(ref.index for ref, _ in order) == [0, 1, 2, 3]
    assert order[-1][1] is None
    assert gyo_is_acyclic(four_way_query)
    assert gyo_order(triangle_query) is None
    assert not gyo_is_acyclic(triangle_query)


def test_connected_subsets_of_a_path(hier_query):
    subsets = list(hier_query.connected_subsets())
    assert len(subsets) == 10
    assert ids(hier_query, "R1", "R3") not in subsets
    assert hier_query.full in subsets


def test_dominating_relation(movies_query, hier_query):
    assert movies_query.dominating_relation() == movies_query.relation_id("n")
    assert hier_query.dominating_relation() == 0
    H = Hypergraph.from_relations([("A", ["x", "a"]), ("B", ["x", "b"])], output=["a", "b"])
    assert H.dominating_relation() is None


def test_permuted_keeps_the_query(hier_query):
    P = hier_query.permuted([3, 2, 1, 0])
    assert P.relation_names == ("R4", "R3", "R2", "R1")
    for name in hier_query.relation_names:
        # attribute ids are renumbered, names stay
        assert set(P.attr_labels(P.edges[P.relation_id(name)])) == \
            set(hier_query.attr_labels(hier_query.edges[hier_query.relation_id(name)]))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 7), seed=st.integers(0, 10_000), mask_seed=st.integers(0, 1 << 7))
def test_bitset_index_agrees_with_sets(n, seed, mask_seed):
    H = gen_acyclic(n, seed=seed)
    index = BitsetIndex(H)
    mask = mask_seed % index.full + 1
    rels = index.rels(mask)
    assert index.connected(mask) == H.is_connected(rels)
    assert index.width1(mask) == H.is_width1_set(rels)
    cut = {a for a in range(len(H.attribute_names)) if index.cut(mask) >> a & 1}
    assert cut == H.interface(rels)


# ------------------------------
# GYO against join-tree search
# ------------------------------
small_edges = st.lists(st.sets(st.sampled_from("abcde"), min_size=1, max_size=4), min_size=1, max_size=5)


def _query(edges) -> Hypergraph:
    return Hypergraph.from_relations([(f"R{i}", sorted(e)) for i, e in enumerate(edges, 1)], require_connected=False)


@settings(max_examples=150, deadline=None)
@given(edges=small_edges)
def test_gyo_agrees_with_join_tree_search(edges):
    H = _query(edges)
    if not H.is_connected():
        return
    assert gyo_is_acyclic(H) == bool(oracle_join_trees(H))


@settings(max_examples=100, deadline=None)
@given(edges=small_edges)
def test_removing_an_ear_keeps_acyclicity(edges):
    H = _query(edges)
    if not H.is_connected() or H.n_relations < 2:
        return
    acyclic = bool(oracle_join_trees(H))
    for r in H.relations:
        if is_ear(r, H)[0]:
            rest = _query([edges[s] for s in H.relations if s != r])
            assert bool(oracle_join_trees(rest)) == acyclic
            assert gyo_is_acyclic(rest) == acyclic


def test_cyclic_cores():
    square = _query([{"a", "b"}, {"b", "c"}, {"c", "d"}, {"d", "a"}])
    assert not gyo_is_acyclic(square) and not oracle_join_trees(square)
    covered = _query([{"a", "b"}, {"b", "c"}, {"c", "a"}, {"a", "b", "c"}])
    assert gyo_is_acyclic(covered) and oracle_join_trees(covered)
