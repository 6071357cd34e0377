from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from app.errors import InvalidArgumentError
from app.models.hypergraph import AttrSet, Hypergraph


@dataclass(frozen=True)
class TreeNode:
    relation: Optional[int]
    chi: AttrSet


@dataclass(frozen=True)
class Violation:
    """First violated condition found by a validator, with witnesses."""
    condition: str
    detail: str
    nodes: Tuple[int, ...] = ()
    attribute: Optional[int] = None

    def to_dict(self) -> dict:
        out = {"condition": self.condition, "detail": self.detail, "nodes": list(self.nodes)}
        if self.attribute is not None:
            out["attribute"] = self.attribute
        return out


class JoinTree:
    """
    Rooted labeled tree. Node ids are relation ids for physical nodes; a node
    with relation None only occurs in intermediate enumeration trees.
    """

    def __init__(self, nodes: Mapping[int, TreeNode], root: int, parent: Mapping[int, int]):
        if root not in nodes:
            raise InvalidArgumentError(f"root {root} is not a node")
        self.nodes: Dict[int, TreeNode] = dict(nodes)
        self.root = root
        self.parent: Dict[int, int] = dict(parent)
        children: Dict[int, List[int]] = {v: [] for v in self.nodes}
        for child, par in self.parent.items():
            if par in children:
                children[par].append(child)
        self.children: Dict[int, Tuple[int, ...]] = {v: tuple(sorted(cs)) for v, cs in children.items()}

    @classmethod
    def from_parents(cls, H: Hypergraph, root: int, parent: Mapping[int, int]) -> "JoinTree":
        nodes = {r: TreeNode(r, H.edges[r]) for r in set(parent) | {root}}
        return cls(nodes, root, parent)

    @classmethod
    def from_edges(cls, H: Hypergraph, root: int, edges: Iterable[Tuple[int, int]],
                   nodes: Optional[Mapping[int, TreeNode]] = None) -> "JoinTree":
        """Orient an undirected edge list away from root."""
        adjacency: Dict[int, List[int]] = {root: []}
        for a, b in edges:
            adjacency.setdefault(a, []).append(b)
            adjacency.setdefault(b, []).append(a)
        if nodes is None:
            nodes = {r: TreeNode(r, H.edges[r]) for r in adjacency}
        return cls(nodes, root, _orient(adjacency, root))

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, JoinTree):
            return NotImplemented
        return self.root == other.root and self.parent == other.parent and self.nodes == other.nodes

    def __hash__(self) -> int:
        return hash((self.root, self.undirected_edges()))

    def __repr__(self) -> str:
        return f"JoinTree(root={self.root}, parent={self.parent})"

    # ------------------------------
    # Structure
    # ------------------------------
    def neighbors(self, v: int) -> List[int]:
        out = list(self.children.get(v, ()))
        if v in self.parent:
            out.append(self.parent[v])
        return out

    def undirected_edges(self) -> FrozenSet[FrozenSet[int]]:
        return frozenset(frozenset((c, p)) for c, p in self.parent.items())

    def reroot(self, new_root: int) -> "JoinTree":
        if new_root not in self.nodes:
            raise InvalidArgumentError(f"unknown node {new_root}")
        if new_root == self.root:
            return self
        adjacency = {v: self.neighbors(v) for v in self.nodes}
        return JoinTree(self.nodes, new_root, _orient(adjacency, new_root))

    def subtree(self, p: int) -> List[int]:
        """Nodes of T_p in preorder."""
        if p not in self.nodes:
            raise InvalidArgumentError(f"unknown node {p}")
        out, stack = [], [p]
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(reversed(self.children[v]))
        return out

    def directed_subtree(self, p: int, q: int) -> List[int]:
        """T_{p->q}: nodes whose path from p passes through q (p excluded)."""
        if q not in self.neighbors(p):
            raise InvalidArgumentError(f"{q} is not adjacent to {p}")
        out, stack, seen = [], [q], {p, q}
        while stack:
            v = stack.pop()
            out.append(v)
            for w in self.neighbors(v):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return out

    def induced_query(self, p: int) -> FrozenSet[int]:
        return frozenset(self.nodes[v].relation for v in self.subtree(p)
                         if self.nodes[v].relation is not None)

    def fanout(self) -> int:
        return max((len(cs) for cs in self.children.values()), default=0)

    def preorder(self) -> List[int]:
        return self.subtree(self.root)

    def postorder(self) -> List[int]:
        return list(reversed(self.preorder()))

    @cached_property
    def _min_relation(self) -> Dict[int, int]:
        out = {}
        for v in self.postorder():
            own = self.nodes[v].relation
            candidates = [out[c] for c in self.children[v]]
            if own is not None:
                candidates.append(own)
            out[v] = min(candidates) if candidates else v
        return out

    def canonical(self, v: Optional[int] = None) -> tuple:
        """Nested (relation, children) tuple; children ordered by smallest relation in their subtree."""
        v = self.root if v is None else v
        kids = sorted(self.children[v], key=lambda c: self._min_relation[c])
        return (self.nodes[v].relation, tuple(self.canonical(c) for c in kids))

    def named_signature(self, H: Hypergraph) -> Tuple[str, FrozenSet[FrozenSet[str]]]:
        """Root name plus undirected edges by relation name; stable across input orderings."""
        name = lambda v: H.relation_names[self.nodes[v].relation]
        return name(self.root), frozenset(frozenset((name(c), name(p))) for c, p in self.parent.items())

    def to_dict(self, H: Hypergraph, v: Optional[int] = None) -> dict:
        v = self.root if v is None else v
        relation = self.nodes[v].relation
        return {
            "relation": H.relation_names[relation] if relation is not None else None,
            "children": [self.to_dict(H, c) for c in self.children[v]],
        }


def _orient(adjacency: Mapping[int, Sequence[int]], root: int) -> Dict[int, int]:
    parent, seen, queue = {}, {root}, deque([root])
    while queue:
        v = queue.popleft()
        for w in sorted(adjacency[v]):
            if w not in seen:
                seen.add(w)
                parent[w] = v
                queue.append(w)
    return parent


def structure_violation(nodes: Mapping, root: int, parent: Mapping[int, int]) -> Optional[Violation]:
    """Parent map must form a single tree rooted at root."""
    if root in parent:
        return Violation("tree", "root has a parent", (root,))
    for v in nodes:
        if v != root and v not in parent:
            return Violation("tree", "node has no parent and is not the root", (v,))
    for v, p in parent.items():
        if v not in nodes or p not in nodes:
            return Violation("tree", "parent map refers to an unknown node", (v, p))
    for v in nodes:
        seen, w = set(), v
        while w != root:
            if w in seen:
                return Violation("tree", "parent map has a cycle", (v,))
            seen.add(w)
            w = parent[w]
    return None


def connectedness_violation(nodes: Mapping, parent: Mapping[int, int],
                            attributes: Iterable[int]) -> Optional[Violation]:
    """
    C2: nodes holding an attribute induce a subtree exactly when the tree
    edges between them number one less than the nodes.
    """
    for a in sorted(attributes):
        holders = [v for v in nodes if a in nodes[v].chi]
        if not holders:
            continue
        inner = sum(1 for c, p in parent.items() if a in nodes[c].chi and a in nodes[p].chi)
        if inner != len(holders) - 1:
            return Violation("C2", f"attribute {a} is not connected", tuple(sorted(holders)), a)
    return None


def validate(T: JoinTree, H: Hypergraph) -> Optional[Violation]:
    """None when T satisfies C1-C3 for H, else the first violation."""
    broken = structure_violation(T.nodes, T.root, T.parent)
    if broken:
        return broken
    for v in sorted(T.nodes):
        node = T.nodes[v]
        if node.relation is None or not 0 <= node.relation < H.n_relations:
            return Violation("C3", "node is not labeled by exactly one relation", (v,))
        if node.chi != H.edges[node.relation]:
            return Violation("C3", "chi differs from the relation's attributes", (v,))
    labels = sorted(node.relation for node in T.nodes.values())
    if labels != list(H.relations):
        seen = set()
        for v in sorted(T.nodes):
            r = T.nodes[v].relation
            if r in seen:
                return Violation("C1", f"relation {r} labels more than one node", (v,))
            seen.add(r)
        missing = sorted(set(H.relations) - seen)
        return Violation("C1", f"relation {missing[0]} labels no node", ())
    return connectedness_violation(T.nodes, T.parent, range(len(H.attribute_names)))


def reroot(T: JoinTree, new_root: int) -> JoinTree:
    return T.reroot(new_root)


def induced_query(T: JoinTree, p: int) -> FrozenSet[int]:
    return T.induced_query(p)


def fanout(T: JoinTree) -> int:
    return T.fanout()
