import functools
import itertools
import logging
from collections import deque
from typing import Callable, Dict, Iterator, List, MutableMapping, Optional, Sequence, Tuple

import networkx as nx

from app.errors import InternalInvariantError, InvalidArgumentError
from app.models.hypergraph import EMPTY, AttrSet, Hypergraph
from app.models.jointree import JoinTree, TreeNode
from app.models.metadecomp import MetaDecomposition

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]
Stats = MutableMapping[str, int]


def _new_stats(stats: Optional[Stats]) -> Stats:
    stats = {} if stats is None else stats
    for key in ("ops", "yields", "max_gap"):
        stats.setdefault(key, 0)
    return stats


# ------------------------------
# Unrooted trees and rerooting
# ------------------------------
def enumerate_trees(vertices: Sequence[int]) -> Iterator[List[Edge]]:
    """Every labeled tree over vertices as a sorted edge list, decoded from Pruefer codes."""
    vertices = sorted(vertices)
    n = len(vertices)
    if n == 0:
        raise InvalidArgumentError("cannot enumerate trees over no vertices")
    if n == 1:
        yield []
        return
    if n == 2:
        yield [(vertices[0], vertices[1])]
        return
    for code in itertools.product(range(n), repeat=n - 2):
        tree = nx.from_prufer_sequence(list(code))
        yield sorted((vertices[min(a, b)], vertices[max(a, b)]) for a, b in tree.edges())


def rerootings(T: JoinTree, prev_parent: Optional[int] = None, key: AttrSet = EMPTY,
               stats: Optional[Stats] = None) -> Iterator[JoinTree]:
    """
    Every rerooting of T at a node whose chi contains key, the current rooting
    excluded. prev_parent marks the neighbour the walk came from.
    """
    root = T.root
    root_has_key = key <= T.nodes[root].chi
    for c in T.children[root]:
        if c == prev_parent:
            continue
        # key holders are connected, so nothing past c can hold key
        if root_has_key and not key <= T.nodes[c].chi:
            continue
        R = T.reroot(c)
        if stats is not None:
            stats["ops"] += len(R)
        if key <= R.nodes[c].chi:
            yield R
        yield from rerootings(R, root, key, stats)


def _bfs(edges: Sequence[Edge], root: int) -> Tuple[List[int], Dict[int, int]]:
    adjacency: Dict[int, List[int]] = {root: []}
    for a, b in edges:
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)
    order, parent, queue = [root], {}, deque([root])
    while queue:
        v = queue.popleft()
        for w in sorted(adjacency[v]):
            if w != root and w not in parent:
                parent[w] = v
                order.append(w)
                queue.append(w)
    return order, parent


def _cut(T: JoinTree, p: int) -> JoinTree:
    below = T.subtree(p)
    return JoinTree({w: T.nodes[w] for w in below}, p, {w: T.parent[w] for w in below if w != p})


# ------------------------------
# Enumeration over a meta-decomposition
# ------------------------------
class _Partial:
    """Tree under construction; steps attach and detach subtrees in place."""

    def __init__(self):
        self.root: Optional[int] = None
        self.nodes: Dict[int, TreeNode] = {}
        self.parent: Dict[int, int] = {}


Step = Callable[[_Partial], Iterator[None]]


class JoinTreeEnumerator:
    """
    Lazy enumeration of every join tree encoded by a meta-decomposition.

    Sub-results of non-root meta nodes are memoized for the lifetime of one
    iteration. stats counts abstract work: "ops" grows by the size of every
    attached, detached, materialized or rerooted tree, "yields" by each tree
    produced, and "max_gap" keeps the largest ops difference between yields.
    """

    def __init__(self, M: MetaDecomposition, stats: Optional[Stats] = None):
        self.M = M
        self.stats = _new_stats(stats)
        self._members: Dict[int, List[int]] = {v: sorted(M.relations_below(v)) for v in M.nodes}
        self._shape_memo: Dict[int, List[JoinTree]] = {}
        self._rooting_memo: Dict[int, List[JoinTree]] = {}
        self._parts_memo: Dict[int, List[List[JoinTree]]] = {}
        self._last = 0

    def __iter__(self) -> Iterator[JoinTree]:
        self._last = self.stats["ops"]
        try:
            for T in self._enum(self.M.root):
                yield self._emit(T)
                for R in rerootings(T, None, EMPTY, self.stats):
                    yield self._emit(R)
        finally:
            self._shape_memo.clear()
            self._rooting_memo.clear()
            self._parts_memo.clear()

    def _emit(self, T: JoinTree) -> JoinTree:
        ops = self.stats["ops"]
        self.stats["yields"] += 1
        self.stats["max_gap"] = max(self.stats["max_gap"], ops - self._last)
        self._last = ops
        return T

    # ------------------------------
    # Bookkeeping
    # ------------------------------
    def _ordered_children(self, v: int) -> List[int]:
        return sorted(self.M.children[v], key=lambda c: (-len(self.M.nodes[c].kappa), c))

    def _single(self, v: int) -> JoinTree:
        node = self.M.nodes[v]
        return JoinTree({v: TreeNode(node.relation, node.chi)}, v, {})

    def _attach(self, state: _Partial, sub: JoinTree, u: Optional[int]) -> None:
        state.nodes.update(sub.nodes)
        state.parent.update(sub.parent)
        if u is None:
            state.root = sub.root
        else:
            state.parent[sub.root] = u
        self.stats["ops"] += len(sub)

    def _detach(self, state: _Partial, sub: JoinTree) -> None:
        for w in sub.nodes:
            del state.nodes[w]
            state.parent.pop(w, None)
        self.stats["ops"] += len(sub)

    def _materialize(self, state: _Partial) -> JoinTree:
        self.stats["ops"] += len(state.nodes)
        return JoinTree(state.nodes, state.root, state.parent)

    # ------------------------------
    # Memoized sub-results
    # ------------------------------
    def _shapes(self, c: int) -> List[JoinTree]:
        if c not in self._shape_memo:
            self._shape_memo[c] = list(self._enum(c))
        return self._shape_memo[c]

    def _rootings(self, c: int) -> List[JoinTree]:
        """Shapes of c rooted at every physical node that holds kappa(c)."""
        if c not in self._rooting_memo:
            node = self.M.nodes[c]
            if node.dummy:
                out = self._shapes(c)
            else:
                out = []
                for T in self._shapes(c):
                    if node.kappa <= T.nodes[T.root].chi:
                        out.append(T)
                    out.extend(rerootings(T, None, node.kappa, self.stats))
            self._rooting_memo[c] = out
        return self._rooting_memo[c]

    def _parts(self, c: int) -> List[List[JoinTree]]:
        """For a dummy minor: per shape, the subtrees hanging off the dummy node."""
        if c not in self._parts_memo:
            self._parts_memo[c] = [[_cut(shape, p) for p in shape.children[c]] for shape in self._shapes(c)]
        return self._parts_memo[c]

    # ------------------------------
    # Steps
    # ------------------------------
    def _option_step(self, options: Callable[[], Sequence[JoinTree]], points: Sequence[Optional[int]]) -> Step:
        def step(state: _Partial) -> Iterator[None]:
            for option in options():
                for u in points:
                    self._attach(state, option, u)
                    yield
                    self._detach(state, option)
        return step

    def _dummy_step(self, c: int, points: Sequence[int]) -> Step:
        def step(state: _Partial) -> Iterator[None]:
            for parts in self._parts(c):
                for choice in itertools.product(points, repeat=len(parts)):
                    for part, u in zip(parts, choice):
                        self._attach(state, part, u)
                    yield
                    for part in parts:
                        self._detach(state, part)
        return step

    def _proper_steps(self, v: int, pool: List[int], children: Sequence[int]) -> List[Step]:
        steps = []
        pool = list(pool)
        for c in children:
            node = self.M.nodes[c]
            need = node.chi if node.dummy else node.kappa
            points = [u for u in pool if need <= self.M.nodes[u].chi]
            if not points:
                raise InternalInvariantError(f"no attachment point for meta node {c} under {v}")
            if node.dummy:
                steps.append(self._dummy_step(c, points))
            else:
                steps.append(self._option_step(functools.partial(self._rootings, c), points))
            pool.extend(self._members[c])
        return steps

    def _skeleton(self, v: int, edges: Sequence[Edge], root: int) -> Tuple[List[JoinTree], List[Step]]:
        order, sk_parent = _bfs(edges, root)
        dummy = self.M.nodes[v].dummy
        starts = [self._single(v)] if dummy else self._shapes(root)
        steps = []
        for d in order[1:]:
            par = sk_parent[d]
            kappa = self.M.nodes[d].kappa
            if par == v:
                points = [v]
            else:
                points = [u for u in self._members[par] if kappa <= self.M.nodes[u].chi]
            steps.append(self._option_step(functools.partial(self._rootings, d), points))
        return starts, steps

    def _chain(self, state: _Partial, steps: Sequence[Step], i: int = 0) -> Iterator[JoinTree]:
        if i == len(steps):
            yield self._materialize(state)
            return
        for _ in steps[i](state):
            yield from self._chain(state, steps, i + 1)

    def _enum(self, v: int) -> Iterator[JoinTree]:
        """Every shape of the meta subtree at v, one rooting per unrooted shape."""
        node = self.M.nodes[v]
        children = self._ordered_children(v)
        if not node.minor:
            layouts = [([self._single(v)], [])]
            proper = children
            pool = [v]
        else:
            origins = sorted(c for c in children if self.M.nodes[c].kappa == node.chi)
            if not origins:
                raise InternalInvariantError(f"minor node {v} has no child carrying its chi")
            proper = [c for c in children if c not in origins]
            pool = [u for c in origins for u in self._members[c]]
            if node.dummy:
                skeleton_nodes, root = [v] + origins, v
            else:
                skeleton_nodes, root = origins, origins[0]
            layouts = (self._skeleton(v, edges, root) for edges in enumerate_trees(skeleton_nodes))

        proper_steps = self._proper_steps(v, pool, proper)
        for starts, steps in layouts:
            start = self._option_step(lambda s=starts: s, [None])
            yield from self._chain(_Partial(), [start, *steps, *proper_steps])


def enumerate_join_trees(M: MetaDecomposition, stats: Optional[Stats] = None) -> Iterator[JoinTree]:
    return iter(JoinTreeEnumerator(M, stats))


def count_join_trees(M: MetaDecomposition, limit: int, stats: Optional[Stats] = None) -> Optional[int]:
    """Exact count when at most limit, else None."""
    if limit < 1:
        raise InvalidArgumentError("limit must be at least 1")
    count = 0
    for _ in enumerate_join_trees(M, stats):
        count += 1
        if count > limit:
            return None
    return count


# ------------------------------
# Naive GYO baseline
# ------------------------------
def enumerate_join_trees_gyo(H: Hypergraph, limit: Optional[int] = None,
                             stats: Optional[Stats] = None) -> Iterator[JoinTree]:
    """
    Join trees by exploring every ear removal order with every witness,
    de-duplicated on the undirected edge set. Exponential; a baseline only.
    """
    stats = _new_stats(stats)
    working = H.to_working()
    parent: Dict[int, int] = {}
    seen = set()
    produced = 0

    def explore() -> Iterator[Tuple[int, Dict[int, int]]]:
        stats["ops"] += 1
        refs = working.refs()
        if len(refs) == 1:
            yield refs[0].index, dict(parent)
            return
        for ref in refs:
            if not working.is_ear(ref)[0]:
                continue
            shared = working.overlap(ref)
            witnesses = [w for w in refs if w != ref and shared <= working.attrs(w)]
            attrs = working.remove(ref)
            for w in witnesses:
                parent[ref.index] = w.index
                yield from explore()
                del parent[ref.index]
            working.restore(ref, attrs)

    for root, tree_parent in explore():
        T = JoinTree.from_parents(H, root, tree_parent)
        key = T.undirected_edges()
        if key in seen:
            continue
        seen.add(key)
        for r in [root] + [w for w in H.relations if w != root]:
            if limit is not None and produced >= limit:
                return
            stats["ops"] += len(T)
            stats["yields"] += 1
            produced += 1
            yield T if r == root else T.reroot(r)
