import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple

from app.errors import DisconnectedError, InternalInvariantError, NotAcyclicError
from app.models.hypergraph import AttrSet, EdgeRef, Hypergraph, gyo_is_acyclic
from app.models.jointree import JoinTree, Violation, connectedness_violation, structure_violation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetaNode:
    id: int
    relation: Optional[int]
    chi: AttrSet
    kappa: AttrSet

    @property
    def minor(self) -> bool:
        return self.relation is None

    @property
    def dummy(self) -> bool:
        """Minor node standing for a shared interface only (chi == kappa)."""
        return self.relation is None and self.kappa == self.chi


class MetaDecomposition:
    """
    Meta-decomposition of an acyclic query. Physical node ids equal their
    relation ids; minor nodes are numbered from |E(H)| upward.
    """

    def __init__(self, H: Hypergraph, nodes: Mapping[int, MetaNode], root: int, parent: Mapping[int, int]):
        self.H = H
        self.nodes: Dict[int, MetaNode] = dict(nodes)
        self.root = root
        self.parent: Dict[int, int] = dict(parent)
        children: Dict[int, List[int]] = {v: [] for v in self.nodes}
        for child, par in self.parent.items():
            if par in children:
                children[par].append(child)
        self.children: Dict[int, Tuple[int, ...]] = {v: tuple(sorted(cs)) for v, cs in children.items()}

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return f"MetaDecomposition(root={self.root}, parent={self.parent})"

    @property
    def minor_nodes(self) -> List[int]:
        return sorted(v for v, node in self.nodes.items() if node.minor)

    def subtree(self, p: int) -> List[int]:
        out, stack = [], [p]
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(reversed(self.children[v]))
        return out

    def postorder(self) -> List[int]:
        return list(reversed(self.subtree(self.root)))

    def relations_below(self, p: int) -> FrozenSet[int]:
        return frozenset(self.nodes[v].relation for v in self.subtree(p) if not self.nodes[v].minor)

    def fanout(self) -> int:
        return max((len(cs) for cs in self.children.values()), default=0)

    def as_join_tree(self) -> Optional[JoinTree]:
        """The decomposition itself when it has no minor node."""
        if self.minor_nodes:
            return None
        return JoinTree.from_parents(self.H, self.root, self.parent)

    def canonical(self, v: Optional[int] = None) -> tuple:
        """Nested (relation, chi, kappa, children) tuple with children in a stable order."""
        v = self.root if v is None else v
        node = self.nodes[v]
        kids = sorted((self.canonical(c) for c in self.children[v]), key=repr)
        return (node.relation, tuple(sorted(node.chi)), tuple(sorted(node.kappa)), tuple(kids))

    def to_dict(self, v: Optional[int] = None) -> dict:
        v = self.root if v is None else v
        node = self.nodes[v]
        out = {
            "relation": self.H.relation_names[node.relation] if not node.minor else None,
            "chi": self.H.attr_labels(node.chi),
            "kappa": self.H.attr_labels(node.kappa),
        }
        if node.minor:
            out["minor"] = True
        out["children"] = [self.to_dict(c) for c in self.children[v]]
        return out


# ------------------------------
# Validation
# ------------------------------
def validate_meta(M: MetaDecomposition, H: Hypergraph) -> Optional[Violation]:
    """Check C1, C2, C3'', C4 and C5 by definition; None when all hold."""
    broken = structure_violation(M.nodes, M.root, M.parent)
    if broken:
        return broken

    seen: Dict[int, int] = {}
    for v in sorted(M.nodes):
        node = M.nodes[v]
        if node.minor:
            if not node.chi:
                return Violation("C5", "minor node with empty chi", (v,))
            continue
        if not 0 <= node.relation < H.n_relations:
            return Violation("C1", f"unknown relation {node.relation}", (v,))
        if node.relation in seen:
            return Violation("C1", f"relation {node.relation} labels more than one node", (seen[node.relation], v))
        seen[node.relation] = v
        if node.chi != H.edges[node.relation]:
            return Violation("C3''", "chi differs from the relation's attributes", (v,))
    missing = sorted(set(H.relations) - set(seen))
    if missing:
        return Violation("C1", f"relation {missing[0]} labels no node")

    broken = connectedness_violation(M.nodes, M.parent, range(len(H.attribute_names)))
    if broken:
        return broken

    broken = _interface_violation(M)
    if broken:
        return broken

    by_kappa: Dict[AttrSet, List[int]] = defaultdict(list)
    for v, node in M.nodes.items():
        if v != M.root:
            by_kappa[node.kappa].append(v)
    for kappa, members in sorted(by_kappa.items(), key=lambda kv: sorted(kv[1])):
        if len(members) < 2:
            continue
        minors = [v for v in M.minor_nodes if M.nodes[v].chi == kappa]
        if len(minors) != 1:
            return Violation("C5", f"{len(minors)} minor nodes for a shared interface", tuple(sorted(members)))
    for v in M.minor_nodes:
        if len(M.children[v]) < 2:
            return Violation("C5", "minor node with fewer than two children", (v,))

    if len(M.nodes) > 2 * H.n_relations - 1:
        return Violation("size", f"{len(M.nodes)} nodes exceed 2|E(H)|-1")
    return None


def _interface_violation(M: MetaDecomposition) -> Optional[Violation]:
    if M.nodes[M.root].kappa:
        return Violation("C4", "root has a nonempty kappa", (M.root,))
    for p in sorted(M.parent):
        q = M.parent[p]
        inside = set(M.subtree(p))
        outside_chi = set()
        for s in M.nodes:
            if s not in inside:
                outside_chi |= M.nodes[s].chi
        kappa = M.nodes[p].kappa
        if kappa != M.nodes[p].chi & outside_chi:
            return Violation("C4(a)", "kappa is not the interface of the subtree", (p,))
        if not kappa <= M.nodes[q].chi:
            return Violation("C4(a)", "kappa is not contained in the parent's chi", (p, q))
        if kappa == M.nodes[q].chi:
            continue
        above = set(M.subtree(q))
        for s in sorted(M.nodes):
            if s not in above and kappa <= M.nodes[s].chi:
                return Violation("C4(b)", "kappa fits a node above the parent", (p, q, s))
    return None


# ------------------------------
# Construction
# ------------------------------
@dataclass(frozen=True)
class Group:
    """Mutually reducible ears sharing one overlap, replaced by a special edge."""
    overlap: AttrSet
    members: Tuple[EdgeRef, ...]
    special: EdgeRef


@dataclass
class RoundResult:
    groups: List[Group] = field(default_factory=list)
    ears: List[EdgeRef] = field(default_factory=list)

    @property
    def specials(self) -> List[EdgeRef]:
        return [g.special for g in self.groups]


class MetaBuilder:
    """Single-use state for one run of the ear-removal construction."""

    def __init__(self, H: Hypergraph):
        self.H = H
        self.working = H.to_working()
        self.chi: Dict[int, AttrSet] = {r: H.edges[r] for r in H.relations}
        self.relation: Dict[int, Optional[int]] = {r: r for r in H.relations}
        self.kappa: Dict[int, AttrSet] = {}
        self.order: Dict[int, int] = {}
        self.node_of: Dict[EdgeRef, int] = {EdgeRef("R", r): r for r in H.relations}
        self.minor_by_chi: Dict[AttrSet, int] = {}
        self._clock = 0

    def _minor(self, chi: AttrSet) -> int:
        node = self.minor_by_chi.get(chi)
        if node is None:
            node = len(self.chi)
            self.chi[node] = chi
            self.relation[node] = None
            self.minor_by_chi[chi] = node
            logger.debug("minor node %d for %s", node, self.H.attr_labels(chi))
        return node

    def _retire(self, ref: EdgeRef, kappa: AttrSet) -> int:
        self.working.remove(ref)
        node = self.node_of.pop(ref)
        self.kappa[node] = kappa
        self.order[node] = self._clock
        self._clock += 1
        return node

    def reduce_round(self) -> RoundResult:
        if not len(self.working):
            raise InternalInvariantError("reduce_round called on an empty hypergraph")
        result = RoundResult(groups=self._reduce_groups())
        result.ears = self._reduce_ears()
        if not result.groups and not result.ears:
            raise InternalInvariantError("no ear found; the input is not acyclic")
        return result

    def _reduce_groups(self) -> List[Group]:
        if len(self.working) < 2:
            return []
        buckets: Dict[AttrSet, List[EdgeRef]] = defaultdict(list)
        for ref in self.working.refs():
            if self.working.is_ear(ref)[0]:
                buckets[self.working.overlap(ref)].append(ref)

        groups = []
        for o in sorted(buckets, key=lambda s: sorted(s)):
            members = [ref for ref in buckets[o]
                       if ref in self.working and self.working.is_ear(ref)[0] and self.working.overlap(ref) == o]
            if not o or len(members) < 2:
                continue
            # a lone pair reduces to a plain edge unless an earlier interface needs the minor
            if len(members) == 2 == len(self.working) and not any(k <= o for k in self.kappa.values()):
                continue
            for ref in members:
                if ref.synthetic and self.chi[self.node_of[ref]] == o:
                    self.working.remove(ref)
                    del self.node_of[ref]
                else:
                    self._retire(ref, o)
            special = self.working.add_special(o)
            self.node_of[special] = self._minor(o)
            groups.append(Group(o, tuple(members), special))
        return groups

    def _reduce_ears(self) -> List[EdgeRef]:
        ears = [ref for ref in self.working.refs() if self.working.is_ear(ref)[0]]
        ordered = sorted((r for r in ears if not r.synthetic), reverse=True) \
            + sorted((r for r in ears if r.synthetic), reverse=True)
        removed = []
        for ref in ordered:
            if ref not in self.working or not self.working.is_ear(ref)[0]:
                continue
            self._retire(ref, self.working.overlap(ref))
            removed.append(ref)
        return removed

    def _add_dummy_minors(self) -> None:
        by_kappa: Dict[AttrSet, List[int]] = defaultdict(list)
        for node, kappa in self.kappa.items():
            if kappa:
                by_kappa[kappa].append(node)
        for kappa in sorted(by_kappa, key=lambda s: sorted(s)):
            if len(by_kappa[kappa]) >= 2 and kappa not in self.minor_by_chi:
                node = self._minor(kappa)
                self.kappa[node] = kappa
                self.order[node] = self._clock
                self._clock += 1

    def _parent_of(self, p: int) -> int:
        kappa = self.kappa[p]
        minor = self.minor_by_chi.get(kappa)
        if minor is not None and minor != p:
            return minor
        best = None
        for q in self.chi:
            if q == p or not kappa <= self.chi[q] or kappa <= self.kappa[q]:
                continue
            if best is None or (-self.order[q], q) < (-self.order[best], best):
                best = q
        if best is None:
            raise InternalInvariantError(f"no parent for node {p}")
        return best

    def build(self) -> MetaDecomposition:
        rounds = 0
        while len(self.working):
            self.reduce_round()
            rounds += 1
        self._add_dummy_minors()

        roots = [v for v, kappa in self.kappa.items() if not kappa]
        if len(roots) != 1:
            raise InternalInvariantError(f"expected one root, found {len(roots)}")
        root = roots[0]
        parent = {p: self._parent_of(p) for p in self.kappa if p != root}
        nodes = {v: MetaNode(v, self.relation[v], self.chi[v], self.kappa[v]) for v in self.chi}
        broken = structure_violation(nodes, root, parent)
        if broken:
            raise InternalInvariantError(f"construction produced a broken tree: {broken.detail}")
        logger.info("meta-decomposition: %d nodes, %d minor, %d rounds",
                    len(nodes), len(nodes) - self.H.n_relations, rounds)
        return MetaDecomposition(self.H, nodes, root, parent)


def build_meta(H: Hypergraph) -> MetaDecomposition:
    if not H.is_connected():
        raise DisconnectedError("query hypergraph is disconnected")
    if not gyo_is_acyclic(H):
        raise NotAcyclicError("query hypergraph is cyclic; no join tree exists")
    return MetaBuilder(H).build()


def reduce_round(builder: MetaBuilder) -> RoundResult:
    """
    One reduction round over builder.working, the working hypergraph H'.

    Groups of ears sharing one overlap are retired first and each group is
    replaced by a special edge; the remaining ears are then removed one by
    one. H' is changed in place, and chi, kappa and the retirement order of
    every removed edge are recorded on the builder for the parent assignment
    in build(). The result lists the removed ears, the groups and their new
    special edges.
    """
    return builder.reduce_round()
