import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, Iterator, List, Optional, Tuple, Union

from app.errors import InvalidArgumentError, WidthOverflowError
from app.models.hypergraph import AttrSet, Hypergraph
from app.models.jointree import JoinTree

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scan:
    relation: int

    @cached_property
    def relations(self) -> FrozenSet[int]:
        return frozenset((self.relation,))

    def __str__(self) -> str:
        return f"R{self.relation}"


@dataclass(frozen=True)
class Join:
    left: "PlanNode"
    right: "PlanNode"

    @cached_property
    def relations(self) -> FrozenSet[int]:
        return self.left.relations | self.right.relations

    def __str__(self) -> str:
        return f"({self.left} ⋈ {self.right})"


PlanNode = Union[Scan, Join]


def postorder(node: PlanNode) -> Iterator[PlanNode]:
    if isinstance(node, Join):
        yield from postorder(node.left)
        yield from postorder(node.right)
    yield node


def leaves(node: PlanNode) -> List[int]:
    return [n.relation for n in postorder(node) if isinstance(n, Scan)]


@dataclass(frozen=True)
class PlanWidth:
    per_node: Dict[PlanNode, int]
    total: int


class QueryPlan:
    """
    Binary join plan over scan leaves with projection pushdown: every node
    keeps its interface plus the output attributes of its subtree.
    """

    def __init__(self, root: PlanNode, H: Hypergraph):
        self.root = root
        self.H = H
        names = leaves(root)
        if len(set(names)) != len(names):
            raise InvalidArgumentError("a relation is scanned more than once")
        for r in names:
            if not 0 <= r < H.n_relations:
                raise InvalidArgumentError(f"unknown relation {r}")
        for node in self.nodes():
            if isinstance(node, Join) and not H.shares_attrs(node.left.relations, node.right.relations):
                raise InvalidArgumentError(f"Cartesian product in {self.label(node)}")

    def __repr__(self) -> str:
        return f"QueryPlan({self.label(self.root)})"

    def __eq__(self, other) -> bool:
        return isinstance(other, QueryPlan) and self.root == other.root

    def __hash__(self) -> int:
        return hash(self.root)

    def nodes(self) -> List[PlanNode]:
        return list(postorder(self.root))

    @property
    def complete(self) -> bool:
        return self.root.relations == self.H.full

    def label(self, node: Optional[PlanNode] = None) -> str:
        node = self.root if node is None else node
        if isinstance(node, Scan):
            return self.H.relation_names[node.relation]
        return f"({self.label(node.left)} ⋈ {self.label(node.right)})"

    # ------------------------------
    # Interface and width
    # ------------------------------
    def interface(self, node: PlanNode) -> AttrSet:
        return self.H.interface(node.relations)

    def kept_attrs(self, node: PlanNode) -> AttrSet:
        return self.interface(node) | (self.H.output_attrs & self.H.attrs(node.relations))

    def node_width(self, node: PlanNode, cap: int = 4) -> int:
        """Smallest number of subtree relations whose attributes cover the interface."""
        shared = self.interface(node)
        if not shared:
            return 0
        rels = sorted(node.relations)
        for k in range(1, min(cap, len(rels)) + 1):
            for cover in itertools.combinations(rels, k):
                if shared <= self.H.attrs(cover):
                    return k
        raise WidthOverflowError(f"interface cover of {self.label(node)} needs more than {cap} relations")

    def width(self, cap: int = 4) -> PlanWidth:
        per_node = {node: self.node_width(node, cap) for node in self.nodes()}
        return PlanWidth(per_node, max(per_node.values()))

    # ------------------------------
    # Join trees
    # ------------------------------
    def is_induced_by(self, T: JoinTree) -> Tuple[bool, Dict[str, object]]:
        """
        Induced-by check. The witness maps every tree node to the plan node
        with the same induced query, and every join to the adjacent relation
        pair covering its children's interfaces.
        """
        by_relations = {node.relations: node for node in self.nodes()}
        witness: Dict[str, object] = {"nodes": {}, "joins": {}}
        for p in T.nodes:
            target = by_relations.get(T.induced_query(p))
            if target is None:
                return False, {"missing": sorted(T.induced_query(p))}
            witness["nodes"][p] = target
        tree_edges = T.undirected_edges()
        for node in self.nodes():
            if not isinstance(node, Join):
                continue
            pair = self._adjacent_cover(node, tree_edges)
            if pair is None:
                return False, {"join": self.label(node)}
            witness["joins"][node] = pair
        return True, witness

    def _adjacent_cover(self, node: Join, tree_edges) -> Optional[Tuple[int, int]]:
        left_if, right_if = self.interface(node.left), self.interface(node.right)
        lefts = [s for s in sorted(node.left.relations) if left_if <= self.H.edges[s]]
        rights = [t for t in sorted(node.right.relations) if right_if <= self.H.edges[t]]
        for s in lefts:
            for t in rights:
                if frozenset((s, t)) in tree_edges:
                    return s, t
        return None

    # ------------------------------
    # Cost
    # ------------------------------
    def cost(self, cp) -> float:
        """C_out: sum of every node's output cardinality, scans included."""
        return sum(cp.card(node.relations) for node in self.nodes())

    def to_dict(self, node: Optional[PlanNode] = None, cp=None, cap: int = 4) -> dict:
        node = self.root if node is None else node
        out: dict = {}
        if isinstance(node, Scan):
            out["scan"] = self.H.relation_names[node.relation]
        else:
            out["join"] = [self.to_dict(node.left, cp, cap), self.to_dict(node.right, cp, cap)]
        out["interface"] = self.H.attr_labels(self.interface(node))
        out["kept"] = self.H.attr_labels(self.kept_attrs(node))
        out["width"] = self.node_width(node, cap)
        if cp is not None:
            out["rows"] = cp.card(node.relations)
        return out


def plan_from_shape(shape) -> PlanNode:
    """Build a plan node from nested pairs of relation ids, e.g. ((0, 3), (1, 2))."""
    if isinstance(shape, int):
        return Scan(shape)
    left, right = shape
    return Join(plan_from_shape(left), plan_from_shape(right))
