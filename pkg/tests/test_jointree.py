import pytest

from app.errors import InvalidArgumentError
from app.models.jointree import JoinTree, TreeNode, validate
from tests.queries import ids, tree


def test_valid_tree(hier_query, hier_tree):
    assert validate(hier_tree, hier_query) is None
    assert hier_tree.fanout() == 2
    assert hier_tree.preorder()[0] == hier_query.relation_id("R1")


def test_induced_queries(hier_query, hier_tree):
    assert hier_tree.induced_query(hier_query.relation_id("R2")) == ids(hier_query, "R2", "R3")
    assert hier_tree.induced_query(hier_tree.root) == hier_query.full


def test_reroot_keeps_the_edges(hier_query, hier_tree):
    R3 = hier_query.relation_id("R3")
    rerooted = hier_tree.reroot(R3)
    assert rerooted.root == R3
    assert rerooted.undirected_edges() == hier_tree.undirected_edges()
    assert validate(rerooted, hier_query) is None
    assert rerooted.induced_query(hier_query.relation_id("R1")) == ids(hier_query, "R1", "R4")
    assert rerooted != hier_tree
    assert hier_tree.reroot(hier_tree.root) is hier_tree


def test_directed_subtree(hier_query, hier_tree):
    R1, R2 = hier_query.relation_id("R1"), hier_query.relation_id("R2")
    assert set(hier_tree.directed_subtree(R2, R1)) == ids(hier_query, "R1", "R4")
    with pytest.raises(InvalidArgumentError):
        hier_tree.directed_subtree(R1, hier_query.relation_id("R3"))


def test_disconnected_attribute_is_c2(hier_query):
    # R4 under R2 separates the x3 holders
    T = tree(hier_query, "R1", {"R2": "R1", "R3": "R2", "R4": "R2"})
    violation = validate(T, hier_query)
    assert violation.condition == "C2"
    assert violation.attribute == hier_query.attribute_id("x3")


def test_missing_relation_is_c1(hier_query):
    T = tree(hier_query, "R1", {"R2": "R1", "R3": "R2"})
    assert validate(T, hier_query).condition == "C1"


def test_wrong_chi_is_c3(hier_query, hier_tree):
    nodes = dict(hier_tree.nodes)
    nodes[0] = TreeNode(0, frozenset({0}))
    T = JoinTree(nodes, hier_tree.root, hier_tree.parent)
    assert validate(T, hier_query).condition == "C3"


def test_cycle_is_not_a_tree(hier_query, hier_tree):
    parent = dict(hier_tree.parent)
    parent[hier_tree.root] = hier_query.relation_id("R3")
    T = JoinTree(hier_tree.nodes, hier_tree.root, parent)
    assert validate(T, hier_query).condition == "tree"


def test_equality_and_hash(hier_query, hier_tree):
    same = JoinTree.from_edges(hier_query, hier_tree.root, [tuple(e) for e in hier_tree.undirected_edges()])
    assert same == hier_tree
    assert hash(same) == hash(hier_tree)
    assert len({same, hier_tree}) == 1


def test_canonical_and_to_dict(hier_query, hier_tree):
    assert hier_tree.canonical() == (0, ((1, ((2, ()),)), (3, ())))
    assert hier_tree.to_dict(hier_query) == {
        "relation": "R1",
        "children": [
            {"relation": "R2", "children": [{"relation": "R3", "children": []}]},
            {"relation": "R4", "children": []},
        ],
    }
