import itertools

import numpy as np
import pytest

from app.errors import InvalidArgumentError
from app.models.hypergraph import EMPTY
from app.models.jointree import validate
from app.models.metadecomp import build_meta
from app.services.enumerate import (
    count_join_trees,
    enumerate_join_trees,
    enumerate_join_trees_gyo,
    enumerate_trees,
    rerootings,
)
from app.services.oracle import oracle_join_trees
from app.services.workload import gen_star
from tests.queries import random_instance


# ------------------------------
# Labeled trees
# ------------------------------
@pytest.mark.parametrize("n, expected", [(1, 1), (2, 1), (3, 3), (4, 16), (5, 125), (6, 1296)])
def test_cayley_counts(n, expected):
    trees = list(enumerate_trees(range(n)))
    assert len(trees) == expected
    assert len({frozenset(t) for t in trees}) == expected
    for edges in trees:
        assert len(edges) == n - 1


def test_three_vertex_trees_by_adjacency():
    # the three paths, one per middle vertex
    assert sorted(enumerate_trees([10, 20, 30])) == [
        [(10, 20), (10, 30)],
        [(10, 20), (20, 30)],
        [(10, 30), (20, 30)],
    ]


def test_no_vertices():
    with pytest.raises(InvalidArgumentError):
        list(enumerate_trees([]))


def test_rerootings_cover_every_other_root(hier_query, hier_tree):
    roots = [T.root for T in rerootings(hier_tree)]
    assert sorted(roots) == sorted(r for r in hier_query.relations if r != hier_tree.root)


def test_rerootings_filter_by_key(hier_query, hier_tree):
    x1 = frozenset({hier_query.attribute_id("x1")})
    roots = [T.root for T in rerootings(hier_tree, key=x1)]
    assert roots == [hier_query.relation_id("R2")]


# ------------------------------
# Counts on known queries
# ------------------------------
@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_star_counting_law(n):
    M = build_meta(gen_star(n, seed=n))
    assert count_join_trees(M, 10 ** 6) == n ** (n - 1)


@pytest.mark.parametrize("fixture, expected", [
    ("hier_query", 4),
    ("four_way_query", 4),
    ("two_level_query", 20),
    ("five_children_query", 40),
    ("dummy_query", 12),
])
def test_counts_of_worked_examples(request, fixture, expected):
    H = request.getfixturevalue(fixture)
    trees = list(enumerate_join_trees(build_meta(H)))
    assert len(trees) == expected
    assert set(trees) == oracle_join_trees(H)


def test_count_limit(two_level_query):
    M = build_meta(two_level_query)
    assert count_join_trees(M, 20) == 20
    assert count_join_trees(M, 19) is None
    with pytest.raises(InvalidArgumentError):
        count_join_trees(M, 0)


def test_counters(two_level_query):
    stats: dict = {}
    trees = list(enumerate_join_trees(build_meta(two_level_query), stats))
    assert stats["yields"] == len(trees)
    assert 0 < stats["max_gap"] <= stats["ops"]


def test_gyo_baseline_agrees(two_level_query, dummy_query):
    for H in (two_level_query, dummy_query):
        stats: dict = {}
        baseline = list(enumerate_join_trees_gyo(H, stats=stats))
        assert set(baseline) == set(enumerate_join_trees(build_meta(H)))
        assert len(baseline) == len(set(baseline))
        assert stats["yields"] == len(baseline)
    assert len(list(enumerate_join_trees_gyo(two_level_query, limit=7))) == 7


def test_lazy_stream(star_query):
    M = build_meta(star_query(6))
    first = list(itertools.islice(enumerate_join_trees(M), 5))
    assert len(first) == 5
    assert all(validate(T, M.H) is None for T in first)


# ------------------------------
# Against the oracle
# ------------------------------
@pytest.mark.slow
def test_matches_oracle_on_random_instances():
    for seed in range(200):
        H = random_instance(seed)
        trees = list(enumerate_join_trees(build_meta(H)))
        assert len(trees) == len(set(trees)), seed
        for T in trees:
            assert validate(T, H) is None, seed
        assert set(trees) == oracle_join_trees(H), seed


def test_rerooting_filter_matches_brute_force():
    for seed in range(30):
        H = random_instance(seed)
        for T in (T for T in oracle_join_trees(H) if T.root == 0):
            keys = {EMPTY} | {T.nodes[c].chi & T.nodes[p].chi for c, p in T.parent.items()}
            for key in keys:
                found = list(rerootings(T, key=key))
                roots = [R.root for R in found]
                assert len(roots) == len(set(roots)), seed
                assert set(roots) == {v for v in T.nodes if v != T.root and key <= T.nodes[v].chi}, seed
                for R in found:
                    assert R.undirected_edges() == T.undirected_edges()
                    assert validate(R, H) is None, seed


@pytest.mark.slow
def test_delay_grows_linearly_on_stars():
    sizes = np.arange(4, 8)
    gaps = []
    for n in sizes:
        stats: dict = {}
        for _ in enumerate_join_trees(build_meta(gen_star(int(n))), stats):
            pass
        assert stats["yields"] == n ** (n - 1)
        gaps.append(stats["max_gap"])
    gaps = np.array(gaps, dtype=float)
    slope, intercept = np.polyfit(sizes, gaps, 1)
    fitted = slope * sizes + intercept
    r2 = 1 - np.sum((gaps - fitted) ** 2) / np.sum((gaps - gaps.mean()) ** 2)
    assert slope > 0
    assert r2 >= 0.9


# ------------------------------
# Input order
# ------------------------------
@pytest.mark.parametrize("fixture", ["hier_query", "two_level_query", "five_children_query", "dummy_query"])
def test_edge_order_does_not_change_the_trees(request, fixture):
    H = request.getfixturevalue(fixture)
    expected = {T.named_signature(H) for T in enumerate_join_trees(build_meta(H))}
    rng = np.random.default_rng(7)
    for _ in range(10):
        P = H.permuted([int(r) for r in rng.permutation(H.n_relations)])
        assert {T.named_signature(P) for T in enumerate_join_trees(build_meta(P))} == expected


@pytest.mark.slow
def test_edge_order_on_random_instances():
    for seed in range(40):
        H = random_instance(seed)
        expected = {T.named_signature(H) for T in enumerate_join_trees(build_meta(H))}
        rng = np.random.default_rng(seed)
        for _ in range(10):
            P = H.permuted([int(r) for r in rng.permutation(H.n_relations)])
            assert {T.named_signature(P) for T in enumerate_join_trees(build_meta(P))} == expected, seed
