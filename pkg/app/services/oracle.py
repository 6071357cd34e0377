import logging
from typing import Callable, Dict, Iterable, List, Optional, Set, Tuple

from app.errors import CapExceededError, NotAcyclicError
from app.models.cards import CardinalityProvider
from app.models.hypergraph import BitsetIndex, Hypergraph
from app.models.jointree import JoinTree, validate
from app.models.plan import Join, PlanNode, QueryPlan, Scan
from app.services.enumerate import enumerate_trees
from app.services.optimizer import Candidate, OptimizedPlan, join_candidates, scan

logger = logging.getLogger(__name__)


# ------------------------------
# Join trees by filtering
# ------------------------------
def oracle_join_trees(H: Hypergraph, cap: int = 8) -> Set[JoinTree]:
    """Every valid rooted join tree, found by testing all labeled trees."""
    if H.n_relations > cap:
        raise CapExceededError(f"{H.n_relations} relations exceed oracle_trees={cap}")
    found: Set[JoinTree] = set()
    checked = 0
    for edges in enumerate_trees(list(H.relations)):
        checked += 1
        T = JoinTree.from_edges(H, 0, edges)
        # coverage, connectedness and width do not depend on the root
        if validate(T, H) is not None:
            continue
        found.update(T.reroot(r) for r in H.relations)
    logger.info("oracle: %d of %d labeled trees are join trees", len(found) // H.n_relations, checked)
    return found


# ------------------------------
# Plan space
# ------------------------------
def enumerate_plans(H: Hypergraph, rels: Optional[Iterable[int]] = None) -> List[PlanNode]:
    """All bushy Cartesian-free plans over rels, mirror images counted once."""
    index = BitsetIndex(H)
    memo: Dict[int, List[PlanNode]] = {}

    def plans(mask: int) -> List[PlanNode]:
        if mask in memo:
            return memo[mask]
        low = mask & -mask
        if mask == low:
            out = [Scan(low.bit_length() - 1)]
        else:
            out = []
            rest = mask ^ low
            sub = rest
            while True:
                left = low | sub
                right = mask ^ left
                if right and index.connected(left) and index.connected(right):
                    out.extend(Join(a, b) for a in plans(left) for b in plans(right))
                if not sub:
                    break
                sub = (sub - 1) & rest
        memo[mask] = out
        return out

    mask = index.full if rels is None else sum(1 << r for r in rels)
    if not index.connected(mask):
        return []
    return plans(mask)


# ------------------------------
# Subset DP baselines
# ------------------------------
def _subset_dp(H: Hypergraph, cp: CardinalityProvider, admit: Callable[[int], bool]) -> Tuple[float, PlanNode, int]:
    """
    Cheapest plan built from two connected halves per admitted set. Connected
    halves of a connected set always share an attribute, so no split is a
    Cartesian product.
    """
    index = BitsetIndex(H)
    best: Dict[int, Tuple[float, int]] = {}
    cells = 0
    for mask in range(1, index.full + 1):
        if not index.connected(mask) or not admit(mask):
            continue
        card = cp.card(index.rels(mask))
        low = mask & -mask
        if mask == low:
            best[mask] = (card, 0)
            continue
        rest = mask ^ low
        sub = rest
        choice = None
        while True:
            left = low | sub
            right = mask ^ left
            if right and left in best and right in best:
                cells += 1
                cost = best[left][0] + best[right][0] + card
                if choice is None or cost < choice[0]:
                    choice = (cost, left)
            if not sub:
                break
            sub = (sub - 1) & rest
        if choice is not None:
            best[mask] = choice

    def build(mask: int) -> PlanNode:
        _, left = best[mask]
        if left == 0:
            return Scan(mask.bit_length() - 1)
        return Join(build(left), build(mask ^ left))

    cost, _ = best[index.full]
    return cost, build(index.full), cells


def oracle_global_dp(H: Hypergraph, cp: CardinalityProvider, cap: int = 14) -> OptimizedPlan:
    """Cheapest plan over all bushy Cartesian-free plans, any width."""
    if H.n_relations > cap:
        raise CapExceededError(f"{H.n_relations} relations exceed global_dp={cap}")
    cost, root, cells = _subset_dp(H, cp, lambda mask: True)
    logger.info("global DP: cost %.1f over %d cells", cost, cells)
    return OptimizedPlan(QueryPlan(root, H), cost, None, stats={"dp_cells": cells})


def oracle_width1_dp(H: Hypergraph, cp: CardinalityProvider, cap: int = 14) -> OptimizedPlan:
    """Same DP, restricted to sets whose interface one member relation covers."""
    if H.n_relations > cap:
        raise CapExceededError(f"{H.n_relations} relations exceed global_dp={cap}")
    index = BitsetIndex(H)
    cost, root, cells = _subset_dp(H, cp, index.width1)
    return OptimizedPlan(QueryPlan(root, H), cost, None, stats={"dp_cells": cells})


def width1_plans(H: Hypergraph) -> List[QueryPlan]:
    """Every width-1 plan of H; small queries only."""
    out = []
    for root in enumerate_plans(H):
        P = QueryPlan(root, H)
        if all(H.is_width1_set(node.relations) for node in P.nodes()):
            out.append(P)
    return out


def induced_plans(T: JoinTree, H: Hypergraph) -> List[QueryPlan]:
    """Plans induced by T, found by filtering the full plan space."""
    return [P for P in (QueryPlan(root, H) for root in enumerate_plans(H)) if P.is_induced_by(T)[0]]


# ------------------------------
# Region DP over every relation mask
# ------------------------------
class RegionDP:
    """
    hub_plan(q, S): cheapest plan for region S rooted at q, with q in the
    deepest join. Child regions U hang under q when every attribute crossing
    U's boundary lies in chi(q) and chi(child root). Tries every submask, so
    it covers every rooted join tree without looking at any decomposition.
    """

    def __init__(self, H: Hypergraph, cp: CardinalityProvider, stats: Dict[str, int]):
        self.H = H
        self.cp = cp
        self.stats = stats
        self.index = BitsetIndex(H)
        self.edge_bits = self.index.edge_bits
        self._hub: Dict[Tuple[int, int], Optional[Tuple[float, int]]] = {}
        self._rooted: Dict[int, Optional[Tuple[float, int]]] = {}

    def card(self, mask: int) -> float:
        return self.cp.card(self.index.rels(mask))

    def hub_plan(self, q: int, S: int) -> Optional[Tuple[float, int]]:
        """(cost, last child region) or None when S cannot hang from q."""
        key = (q, S)
        if key in self._hub:
            return self._hub[key]
        chi = self.edge_bits[q]
        result = None
        if self.index.cut(S) & ~chi:
            result = None
        elif S == 1 << q:
            result = (self.card(S), 0)
        else:
            rest = S ^ (1 << q)
            U = rest
            while U:
                self.stats["dp_cells"] += 1
                if not self.index.cut(U) & ~chi:
                    left = self.hub_plan(q, S ^ U)
                    right = self.best_rooted(U)
                    if left is not None and right is not None:
                        cost = left[0] + right[0] + self.card(S)
                        if result is None or cost < result[0]:
                            result = (cost, U)
                U = (U - 1) & rest
        self._hub[key] = result
        return result

    def best_rooted(self, U: int) -> Optional[Tuple[float, int]]:
        if U in self._rooted:
            return self._rooted[U]
        result = None
        boundary = self.index.cut(U)
        for c in range(self.index.n):
            if U >> c & 1 and not boundary & ~self.edge_bits[c]:
                sub = self.hub_plan(c, U)
                if sub is not None and (result is None or sub[0] < result[0]):
                    result = (sub[0], c)
        self._rooted[U] = result
        return result

    def build(self, q: int, S: int) -> Candidate:
        _, U = self._hub[(q, S)]
        if U == 0:
            return scan(q, self.cp)
        left = self.build(q, S ^ U)
        _, c = self._rooted[U]
        return join_candidates(left, self.build(c, U), self.cp, link=(q, c))


def oracle_region_dp(H: Hypergraph, cp: CardinalityProvider, root: Optional[int] = None,
                     cap: int = 14) -> OptimizedPlan:
    """Width-1 optimum over all rooted join trees, optionally with a fixed root."""
    if H.n_relations > cap:
        raise CapExceededError(f"{H.n_relations} relations exceed global_dp={cap}")
    dp = RegionDP(H, cp, {"dp_cells": 0})
    roots = H.relations if root is None else [root]
    best = None
    for q in roots:
        got = dp.hub_plan(q, dp.index.full)
        if got is not None and (best is None or got[0] < best[0]):
            best = (got[0], q)
    if best is None:
        raise NotAcyclicError("no join tree found; the query is not acyclic")
    plan = dp.build(best[1], dp.index.full)
    tree = JoinTree.from_edges(H, best[1], plan.edges)
    return OptimizedPlan(QueryPlan(plan.node, H), plan.cost, tree, stats=dict(dp.stats))
