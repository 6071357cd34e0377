import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import networkx as nx

from app.errors import FanoutLimitError, InternalInvariantError, InvalidArgumentError
from app.models.cards import CardinalityProvider
from app.models.hypergraph import BitsetIndex, Hypergraph
from app.models.jointree import JoinTree
from app.models.metadecomp import MetaDecomposition
from app.models.plan import Join, PlanNode, QueryPlan, Scan

logger = logging.getLogger(__name__)

Link = Tuple[int, int]


@dataclass(frozen=True)
class Candidate:
    """A sub-plan with its C_out cost and the join-tree edges it joins across."""
    node: PlanNode
    cost: float
    root: int
    edges: FrozenSet[Link] = frozenset()

    @property
    def relations(self) -> FrozenSet[int]:
        return self.node.relations


@dataclass
class OptimizedPlan:
    plan: QueryPlan
    cost: float
    join_tree: Optional[JoinTree]
    warnings: List[str] = field(default_factory=list)
    stats: Dict[str, int] = field(default_factory=dict)

    def to_dict(self, cp: Optional[CardinalityProvider] = None, cap: int = 4) -> dict:
        H = self.plan.H
        out = {
            "plan": self.plan.to_dict(cp=cp, cap=cap),
            "cost": self.cost,
            "width": self.plan.width(cap).total,
        }
        if self.join_tree is not None:
            out["join_tree"] = self.join_tree.to_dict(H)
        if self.warnings:
            out["warnings"] = list(self.warnings)
        out["counters"] = dict(self.stats)
        return out


def scan(r: int, cp: CardinalityProvider) -> Candidate:
    return Candidate(Scan(r), cp.card((r,)), r)


def _holder(H: Hypergraph, rels: FrozenSet[int], preferred: int, attrs) -> Optional[int]:
    if attrs <= H.edges[preferred]:
        return preferred
    return next((r for r in sorted(rels) if attrs <= H.edges[r]), None)


def join_candidates(a: Candidate, b: Candidate, cp: CardinalityProvider, link: Optional[Link] = None) -> Candidate:
    """a ⋈ b. Without an explicit link the tree edge joins relations holding the shared attributes."""
    H = cp.H
    if link is None:
        shared = H.attrs(a.relations) & H.attrs(b.relations)
        u, v = _holder(H, a.relations, a.root, shared), _holder(H, b.relations, b.root, shared)
        if u is None or v is None:
            raise InternalInvariantError("joined sub-plans share attributes no single relation holds")
        link = (u, v)
    node = Join(a.node, b.node)
    return Candidate(node, a.cost + b.cost + cp.card(node.relations), a.root,
                     a.edges | b.edges | {tuple(sorted(link))})


def admissible(H: Hypergraph, a: Candidate, b: Candidate) -> bool:
    """No Cartesian product and the union's interface fits in one relation."""
    return H.shares_attrs(a.relations, b.relations) and H.is_width1_set(a.relations | b.relations)


def _tick(stats: Optional[Dict[str, int]], key: str = "dp_cells", n: int = 1) -> None:
    if stats is not None:
        stats[key] = stats.get(key, 0) + n


# ------------------------------
# Local star-join ordering
# ------------------------------
def optimize_local_exact(hub: Optional[Candidate], satellites: Sequence[Candidate], cp: CardinalityProvider,
                         limit: int = 12, seeds: Optional[Sequence[int]] = None,
                         stats: Optional[Dict[str, int]] = None) -> Candidate:
    """
    Optimal left-deep order over the hub and satellites by subset DP. The
    hub sits in the deepest join; without a hub any of `seeds` may start.
    """
    k = len(satellites)
    if k > limit:
        raise FanoutLimitError(f"{k} satellites exceed exact_fanout={limit}")
    if k == 0:
        if hub is None:
            raise InvalidArgumentError("nothing to join")
        return hub
    H = cp.H
    best: Dict[int, Candidate] = {}
    if hub is not None:
        best[0] = hub
    else:
        for i in (seeds or range(k)):
            best[1 << i] = satellites[i]
    for mask in range(1, 1 << k):
        current = best.get(mask)
        for i in range(k):
            if not mask >> i & 1:
                continue
            prev = best.get(mask ^ (1 << i))
            if prev is None:
                continue
            _tick(stats)
            if not admissible(H, prev, satellites[i]):
                continue
            cand = join_candidates(prev, satellites[i], cp)
            if current is None or cand.cost < current.cost:
                current = cand
        if current is not None:
            best[mask] = current
    full = (1 << k) - 1
    if full not in best:
        raise InternalInvariantError("no width-1 order joins every satellite")
    return best[full]


def optimize_local_greedy(hub: Optional[Candidate], satellites: Sequence[Candidate], cp: CardinalityProvider,
                          seeds: Optional[Sequence[int]] = None,
                          stats: Optional[Dict[str, int]] = None) -> Candidate:
    """Join next the satellite giving the smallest result; ties go to the smallest relation id."""
    remaining = list(range(len(satellites)))
    if hub is None:
        if not remaining:
            raise InvalidArgumentError("nothing to join")
        pool = list(seeds) if seeds else remaining
        first = min(pool, key=lambda i: (cp.card(satellites[i].relations), min(satellites[i].relations)))
        prefix = satellites[first]
        remaining.remove(first)
    else:
        prefix = hub
    H = cp.H
    while remaining:
        options = []
        for i in remaining:
            _tick(stats)
            if admissible(H, prefix, satellites[i]):
                rels = prefix.relations | satellites[i].relations
                options.append((cp.card(rels), min(satellites[i].relations), i))
        if not options:
            raise InternalInvariantError("greedy ordering found no admissible satellite")
        _, _, i = min(options)
        prefix = join_candidates(prefix, satellites[i], cp)
        remaining.remove(i)
    return prefix


class LocalOptimizer:
    """Dispatches to the exact or greedy local step, falling back to greedy past the fan-out limit."""

    def __init__(self, cp: CardinalityProvider, local: str = "exact", exact_fanout_limit: int = 12):
        if local not in ("exact", "greedy"):
            raise InvalidArgumentError(f"unknown local optimizer '{local}'")
        self.cp = cp
        self.local = local
        self.limit = exact_fanout_limit
        self.warnings: List[str] = []
        self.stats: Dict[str, int] = {"dp_cells": 0}

    def __call__(self, hub: Optional[Candidate], satellites: Sequence[Candidate],
                 seeds: Optional[Sequence[int]] = None, where: str = "") -> Candidate:
        if self.local == "exact":
            try:
                return optimize_local_exact(hub, satellites, self.cp, self.limit, seeds, self.stats)
            except FanoutLimitError as e:
                message = f"{where}: {e.detail}; using greedy ordering"
                logger.warning(message)
                self.warnings.append(message)
        return optimize_local_greedy(hub, satellites, self.cp, seeds, self.stats)


def _finish(cp: CardinalityProvider, best: Candidate, local: LocalOptimizer, root: Optional[int] = None) -> OptimizedPlan:
    H = cp.H
    plan = QueryPlan(best.node, H)
    tree = JoinTree.from_edges(H, best.root if root is None else root, best.edges)
    warnings = list(local.warnings)
    if cp.estimated:
        warnings.append(f"estimated {len(cp.estimated)} cardinalities with the independence model")
    return OptimizedPlan(plan, best.cost, tree, warnings, dict(local.stats))


# ------------------------------
# Per join tree
# ------------------------------
def optimize_tree(T: JoinTree, cp: CardinalityProvider, local: str = "exact",
                  exact_fanout_limit: int = 12) -> OptimizedPlan:
    """Best plan induced by T: bottom-up, each node's relation deepest in its left-deep local plan."""
    step = LocalOptimizer(cp, local, exact_fanout_limit)
    done: Dict[int, Candidate] = {}
    for p in T.postorder():
        relation = T.nodes[p].relation
        hub = scan(relation, cp)
        satellites = [done[c] for c in T.children[p]]
        done[p] = step(hub, satellites, where=f"node {cp.H.relation_names[relation]}")
    best = done[T.root]
    return OptimizedPlan(QueryPlan(best.node, cp.H), best.cost, T, step.warnings, dict(step.stats))


# ------------------------------
# On the meta-decomposition
# ------------------------------
class MetaPlanner:
    """Bottom-up and top-down passes over M, then the cheapest edge combination."""

    def __init__(self, M: MetaDecomposition, cp: CardinalityProvider, local: LocalOptimizer):
        self.M = M
        self.cp = cp
        self.local = local
        self.down: Dict[int, Candidate] = {}
        self.up: Dict[int, Candidate] = {}

    def _hub(self, v: int) -> Optional[Candidate]:
        node = self.M.nodes[v]
        return None if node.minor else scan(node.relation, self.cp)

    def _seeds(self, v: int, satellites: Sequence[Candidate]) -> Optional[List[int]]:
        """At a minor node, sub-plans holding a relation with the node's whole chi."""
        node = self.M.nodes[v]
        if not node.minor:
            return None
        H = self.cp.H
        seeds = [i for i, s in enumerate(satellites) if any(node.chi <= H.edges[r] for r in s.relations)]
        return seeds or None

    def _local(self, v: int, satellites: List[Candidate]) -> Candidate:
        hub = self._hub(v)
        if hub is None and len(satellites) == 1:
            return satellites[0]
        return self.local(hub, satellites, self._seeds(v, satellites), where=f"meta node {v}")

    def run(self) -> Candidate:
        M = self.M
        for v in M.postorder():
            self.down[v] = self._local(v, [self.down[c] for c in M.children[v]])
        for v in M.subtree(M.root):
            for q in M.children[v]:
                satellites = [self.down[c] for c in M.children[v] if c != q]
                if v != M.root:
                    satellites.append(self.up[v])
                self.up[q] = self._local(v, satellites)
        if not M.parent:
            return self.down[M.root]
        best, best_key = None, None
        for q in sorted(M.parent, key=lambda q: (M.parent[q], q)):
            down, up = self.down[q], self.up[q]
            if not admissible(self.cp.H, down, up):
                continue
            cand = join_candidates(down, up, self.cp)
            if best is None or cand.cost < best.cost:
                best, best_key = cand, (M.parent[q], q)
        if best is None:
            raise InternalInvariantError("no admissible root edge")
        logger.debug("root edge %s", best_key)
        return best


def optimize_meta(M: MetaDecomposition, cp: CardinalityProvider, local: str = "exact",
                  exact_fanout_limit: int = 12) -> OptimizedPlan:
    step = LocalOptimizer(cp, local, exact_fanout_limit)
    best = MetaPlanner(M, cp, step).run()
    return _finish(cp, best, step)


# ------------------------------
# Re-branching on the meta-decomposition
# ------------------------------
Choice = Optional[Tuple[float, int]]


class RebranchPlanner:
    """
    Exact width-1 optimum over every join tree M encodes, re-branched
    subtrees included.

    Around a relation q, M falls apart into branches once q is removed and
    every M edge whose interface lies inside chi(q) is cut. Each branch can
    hang directly under q, whether it sits below one of q's children, on the
    parent side, or elsewhere in M as a re-attachable subtree. A region hung
    from q is therefore q plus some of its branches, one include bit each,
    and the memo is keyed by (hub, branch bits). Every hub runs a subset DP
    over its own branches only, so the work grows with the fan-out and not
    with the number of relations.
    """

    def __init__(self, M: MetaDecomposition, cp: CardinalityProvider, stats: Dict[str, int], limit: int = 12):
        self.M = M
        self.H = M.H
        self.cp = cp
        self.stats = stats
        self.index = BitsetIndex(M.H)
        below = {v: sum(1 << r for r in M.relations_below(v)) for v in M.nodes}
        self.edge_cut = {c: self.index.cut(below[c]) for c in M.parent}
        self.branches: Dict[int, List[int]] = {q: self._branches(q) for q in self.H.relations}
        widest = max(self.H.relations, key=lambda q: (len(self.branches[q]), -q))
        if len(self.branches[widest]) > limit:
            raise FanoutLimitError(f"relation {self.H.relation_names[widest]} has "
                                   f"{len(self.branches[widest])} branches, over rebranch={limit}")
        self._unions: Dict[int, Dict[int, int]] = {q: {0: 0} for q in self.H.relations}
        self._hub: Dict[Tuple[int, int], Choice] = {}
        self._rooted: Dict[int, Choice] = {}
        self._cards: Dict[int, float] = {}

    def _branches(self, q: int) -> List[int]:
        """Relation masks of the branches around q."""
        chi = self.index.edge_bits[q]
        g = nx.Graph()
        g.add_nodes_from(v for v in self.M.nodes if v != q)
        g.add_edges_from((c, p) for c, p in self.M.parent.items()
                         if q not in (c, p) and self.edge_cut[c] & ~chi)
        masks = []
        for part in nx.connected_components(g):
            mask = sum(1 << self.M.nodes[v].relation for v in part if not self.M.nodes[v].minor)
            if mask:
                masks.append(mask)
        return sorted(masks)

    def _union(self, q: int, bits: int) -> int:
        unions = self._unions[q]
        mask = unions.get(bits)
        if mask is None:
            low = bits & -bits
            mask = self._union(q, bits ^ low) | self.branches[q][low.bit_length() - 1]
            unions[bits] = mask
        return mask

    def _bits_within(self, q: int, region: int) -> int:
        bits = 0
        for i, branch in enumerate(self.branches[q]):
            if branch & region:
                if branch & ~region:
                    raise InternalInvariantError("a branch crosses a region boundary")
                bits |= 1 << i
        return bits

    def card(self, mask: int) -> float:
        if mask not in self._cards:
            self._cards[mask] = self.cp.card(self.index.rels(mask))
        return self._cards[mask]

    def hub_plan(self, q: int, bits: int) -> Choice:
        """(cost, last branch set) for q plus the given branches, q in the deepest join."""
        key = (q, bits)
        if key in self._hub:
            return self._hub[key]
        region = (1 << q) | self._union(q, bits)
        result = (self.card(region), 0) if not bits else None
        sub = bits
        while sub:
            _tick(self.stats)
            right = self.best_rooted(self._union(q, sub))
            if right is not None:
                left = self.hub_plan(q, bits ^ sub)
                if left is not None:
                    cost = left[0] + right[0] + self.card(region)
                    if result is None or cost < result[0]:
                        result = (cost, sub)
            sub = (sub - 1) & bits
        self._hub[key] = result
        return result

    def best_rooted(self, region: int) -> Choice:
        """(cost, root) of the cheapest plan for region over roots holding its interface."""
        if region in self._rooted:
            return self._rooted[region]
        boundary = self.index.cut(region)
        result = None
        for c in self.index.rels(region):
            if boundary & ~self.index.edge_bits[c]:
                continue
            got = self.hub_plan(c, self._bits_within(c, region))
            if got is not None and (result is None or (got[0], c) < result):
                result = (got[0], c)
        self._rooted[region] = result
        return result

    def build(self, q: int, bits: int) -> Candidate:
        _, sub = self._hub[(q, bits)]
        if not sub:
            return scan(q, self.cp)
        left = self.build(q, bits ^ sub)
        region = self._union(q, sub)
        _, c = self._rooted[region]
        right = self.build(c, self._bits_within(c, region))
        return join_candidates(left, right, self.cp, link=(q, c))

    def solve(self, root: Optional[int] = None) -> Candidate:
        roots = self.H.relations if root is None else [root]
        best = None
        for q in roots:
            everything = (1 << len(self.branches[q])) - 1
            got = self.hub_plan(q, everything)
            if got is not None and (best is None or got[0] < best[0]):
                best = (got[0], q, everything)
        if best is None:
            raise InternalInvariantError("no join tree found; the query is not acyclic")
        logger.debug("re-branching: %d hub states, %d regions", len(self._hub), len(self._rooted))
        return self.build(best[1], best[2])


def optimize_meta_rebranch(M: MetaDecomposition, cp: CardinalityProvider, local: str = "exact",
                           exact_fanout_limit: int = 12, rebranch_limit: int = 12) -> OptimizedPlan:
    """
    Exact width-1 optimum over every join tree M encodes. rebranch_limit
    bounds the branches around any relation; past it FanoutLimitError is
    raised rather than losing exactness.
    """
    if local == "greedy":
        plan = optimize_meta(M, cp, local, exact_fanout_limit)
        plan.warnings.append("re-branching search is exact only; used the greedy meta pass")
        return plan
    step = LocalOptimizer(cp, local, exact_fanout_limit)
    best = RebranchPlanner(M, cp, step.stats, rebranch_limit).solve()
    return _finish(cp, best, step)


def optimize_rooted(M: MetaDecomposition, cp: CardinalityProvider, root_relation: int,
                    rebranch_limit: int = 12) -> OptimizedPlan:
    """Exact optimum restricted to join trees rooted at root_relation."""
    if not 0 <= root_relation < M.H.n_relations:
        raise InvalidArgumentError(f"unknown relation {root_relation}")
    step = LocalOptimizer(cp)
    best = RebranchPlanner(M, cp, step.stats, rebranch_limit).solve(root_relation)
    return _finish(cp, best, step, root=root_relation)


def optimal_join_tree(M: MetaDecomposition, cp: CardinalityProvider, **kwargs) -> JoinTree:
    return optimize_meta_rebranch(M, cp, **kwargs).join_tree
