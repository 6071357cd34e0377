import logging
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import networkx as nx

from app.errors import DisconnectedError, InvalidArgumentError

logger = logging.getLogger(__name__)

AttrSet = FrozenSet[int]
EMPTY: AttrSet = frozenset()


@dataclass(frozen=True, order=True)
class EdgeRef:
    """
    Reference to an edge of a working hypergraph. Base relations use kind "R"
    and their RelationId; special edges added during meta construction use
    kind "S" and a counter, so the two id spaces never collide.
    """
    kind: str
    index: int

    @property
    def synthetic(self) -> bool:
        return self.kind == "S"

    def __str__(self) -> str:
        return f"{self.kind}{self.index}"


@dataclass(frozen=True)
class Hypergraph:
    """
    Query hypergraph. Attributes and relations are dense integer ids; names
    are kept only for I/O. Edges are indexed by RelationId.
    """
    attribute_names: Tuple[str, ...]
    relation_names: Tuple[str, ...]
    edges: Tuple[AttrSet, ...]
    output_attrs: AttrSet = EMPTY

    def __post_init__(self):
        if not self.edges:
            raise InvalidArgumentError("a query needs at least one relation")
        if len(self.relation_names) != len(self.edges):
            raise InvalidArgumentError("relation names and edges differ in length")
        if len(set(self.relation_names)) != len(self.relation_names):
            raise InvalidArgumentError("relation names must be unique (rename self-joins)")
        if len(set(self.attribute_names)) != len(self.attribute_names):
            raise InvalidArgumentError("attribute names must be unique")
        seen = set()
        for name, edge in zip(self.relation_names, self.edges):
            if not edge:
                raise InvalidArgumentError(f"relation {name} has no attributes")
            seen |= edge
        if seen != set(range(len(self.attribute_names))):
            raise InvalidArgumentError("every attribute must appear in some relation")
        if not self.output_attrs <= seen:
            raise InvalidArgumentError("output attributes must belong to some relation")

    @classmethod
    def from_relations(cls, relations: Sequence[Tuple[str, Sequence[str]]],
                       output: Sequence[str] = (),
                       require_connected: bool = True) -> "Hypergraph":
        """
        Build from (name, attribute names) pairs. Attribute ids follow order
        of first appearance.
        """
        attr_ids: Dict[str, int] = {}
        names, edges = [], []
        for name, attrs in relations:
            if len(set(attrs)) != len(attrs):
                raise InvalidArgumentError(f"relation {name} repeats an attribute")
            for a in attrs:
                attr_ids.setdefault(a, len(attr_ids))
            names.append(name)
            edges.append(frozenset(attr_ids[a] for a in attrs))
        unknown = [a for a in output if a not in attr_ids]
        if unknown:
            raise InvalidArgumentError(f"output attributes not in any relation: {', '.join(unknown)}")
        hypergraph = cls(
            attribute_names=tuple(attr_ids),
            relation_names=tuple(names),
            edges=tuple(edges),
            output_attrs=frozenset(attr_ids[a] for a in output),
        )
        if require_connected and not hypergraph.is_connected():
            raise DisconnectedError("query hypergraph is disconnected (Cartesian products are excluded)")
        return hypergraph

    # ------------------------------
    # Lookups
    # ------------------------------
    @property
    def n_relations(self) -> int:
        return len(self.edges)

    @property
    def relations(self) -> range:
        return range(len(self.edges))

    @cached_property
    def full(self) -> FrozenSet[int]:
        return frozenset(self.relations)

    @cached_property
    def _relation_index(self) -> Dict[str, int]:
        return {name: i for i, name in enumerate(self.relation_names)}

    @cached_property
    def _attribute_index(self) -> Dict[str, int]:
        return {name: i for i, name in enumerate(self.attribute_names)}

    def relation_id(self, name: str) -> int:
        try:
            return self._relation_index[name]
        except KeyError:
            raise InvalidArgumentError(f"unknown relation {name}")

    def attribute_id(self, name: str) -> int:
        try:
            return self._attribute_index[name]
        except KeyError:
            raise InvalidArgumentError(f"unknown attribute {name}")

    def attr_labels(self, attrs: Iterable[int]) -> List[str]:
        return [self.attribute_names[a] for a in sorted(attrs)]

    def rel_labels(self, rels: Iterable[int]) -> List[str]:
        return [self.relation_names[r] for r in sorted(rels)]

    # ------------------------------
    # Set helpers
    # ------------------------------
    def attrs(self, rels: Iterable[int]) -> AttrSet:
        out = set()
        for r in rels:
            out |= self.edges[r]
        return frozenset(out)

    def interface(self, rels: Iterable[int]) -> AttrSet:
        """Attributes shared between the given relations and all the others."""
        rels = frozenset(rels)
        return self.attrs(rels) & self.attrs(self.full - rels)

    def is_width1_set(self, rels: Iterable[int]) -> bool:
        """True when the interface of rels is empty or covered by one member relation."""
        rels = frozenset(rels)
        shared = self.interface(rels)
        return not shared or any(shared <= self.edges[r] for r in rels)

    def shares_attrs(self, left: Iterable[int], right: Iterable[int]) -> bool:
        return bool(self.attrs(left) & self.attrs(right))

    def graph(self, rels: Optional[Iterable[int]] = None) -> nx.Graph:
        """Relation graph: an edge between two relations that share an attribute."""
        rels = sorted(self.full if rels is None else rels)
        g = nx.Graph()
        g.add_nodes_from(rels)
        for i, r in enumerate(rels):
            for s in rels[i + 1:]:
                if self.edges[r] & self.edges[s]:
                    g.add_edge(r, s)
        return g

    def is_connected(self, rels: Optional[Iterable[int]] = None) -> bool:
        g = self.graph(rels)
        return g.number_of_nodes() > 0 and nx.is_connected(g)

    def connected_subsets(self) -> Iterator[FrozenSet[int]]:
        """Every nonempty connected relation subset, in increasing bitmask order."""
        index = BitsetIndex(self)
        for mask in range(1, 1 << self.n_relations):
            if index.connected(mask):
                yield index.rels(mask)

    def dominating_relation(self) -> Optional[int]:
        """Smallest relation containing every output attribute, if any."""
        for r in self.relations:
            if self.output_attrs <= self.edges[r]:
                return r
        return None

    def permuted(self, order: Sequence[int]) -> "Hypergraph":
        """Same query with relations listed in the given order."""
        return Hypergraph.from_relations(
            [(self.relation_names[r], self.attr_labels(self.edges[r])) for r in order],
            self.attr_labels(self.output_attrs),
            require_connected=False,
        )

    def to_working(self) -> "WorkingHypergraph":
        return WorkingHypergraph({EdgeRef("R", r): e for r, e in enumerate(self.edges)})


class WorkingHypergraph:
    """
    Mutable copy used during GYO and meta construction. Attribute occurrence
    counts make overlap computation proportional to the edge size.
    """

    def __init__(self, edges: Dict[EdgeRef, AttrSet]):
        self._edges: Dict[EdgeRef, AttrSet] = dict(edges)
        self._counts: Counter = Counter()
        for attrs in self._edges.values():
            self._counts.update(attrs)
        self._next_special = 0

    def __len__(self) -> int:
        return len(self._edges)

    def __contains__(self, ref: EdgeRef) -> bool:
        return ref in self._edges

    def refs(self) -> List[EdgeRef]:
        return sorted(self._edges)

    def attrs(self, ref: EdgeRef) -> AttrSet:
        self._require(ref)
        return self._edges[ref]

    def _require(self, ref: EdgeRef) -> None:
        if ref not in self._edges:
            raise InvalidArgumentError(f"unknown edge {ref}")

    def overlap(self, ref: EdgeRef) -> AttrSet:
        self._require(ref)
        return frozenset(a for a in self._edges[ref] if self._counts[a] > 1)

    def is_ear(self, ref: EdgeRef) -> Tuple[bool, Optional[EdgeRef]]:
        self._require(ref)
        if len(self._edges) == 1:
            return True, None
        shared = self.overlap(ref)
        for other in self.refs():
            if other != ref and shared <= self._edges[other]:
                return True, other
        return False, None

    def remove(self, ref: EdgeRef) -> AttrSet:
        self._require(ref)
        attrs = self._edges.pop(ref)
        self._counts.subtract(attrs)
        return attrs

    def restore(self, ref: EdgeRef, attrs: AttrSet) -> None:
        """Undo a remove(); used by search that backtracks over removal orders."""
        self._edges[ref] = attrs
        self._counts.update(attrs)

    def add_special(self, attrs: AttrSet) -> EdgeRef:
        ref = EdgeRef("S", self._next_special)
        self._next_special += 1
        self._edges[ref] = frozenset(attrs)
        self._counts.update(attrs)
        return ref


EdgeLike = Union[EdgeRef, int]
GraphLike = Union[Hypergraph, WorkingHypergraph]


def _working(H: GraphLike) -> WorkingHypergraph:
    return H.to_working() if isinstance(H, Hypergraph) else H


def _ref(e: EdgeLike) -> EdgeRef:
    return EdgeRef("R", e) if isinstance(e, int) else e


def overlap(e: EdgeLike, H: GraphLike) -> AttrSet:
    """o(e, H): the attributes of e shared with any other edge."""
    return _working(H).overlap(_ref(e))


def is_ear(e: EdgeLike, H: GraphLike) -> Tuple[bool, Optional[EdgeRef]]:
    """Ear test with the smallest witness edge, or (True, None) for a lone edge."""
    return _working(H).is_ear(_ref(e))


def gyo_order(H: Hypergraph) -> Optional[List[Tuple[EdgeRef, Optional[EdgeRef]]]]:
    """
    GYO reduction removing the smallest ear each round. Returns the removal
    sequence with witnesses, or None when the reduction gets stuck.
    """
    working = H.to_working()
    order = []
    while len(working):
        for ref in working.refs():
            ear, witness = working.is_ear(ref)
            if ear:
                working.remove(ref)
                order.append((ref, witness))
                break
        else:
            return None
    return order


def gyo_is_acyclic(H: Hypergraph) -> bool:
    return gyo_order(H) is not None


class BitsetIndex:
    """
    Relation subsets as bitmasks, with per-mask attribute bitsets computed on
    demand. Shared by the subset DPs and the re-branching planner, which need
    cheap interface tests.
    """

    def __init__(self, H: Hypergraph):
        self.H = H
        self.n = H.n_relations
        self.full = (1 << self.n) - 1
        self.edge_bits = [sum(1 << a for a in e) for e in H.edges]
        self.adjacent = [
            sum(1 << s for s in range(self.n) if s != r and self.edge_bits[r] & self.edge_bits[s])
            for r in range(self.n)
        ]
        self._attrs: Dict[int, int] = {0: 0}
        self._connected: Dict[int, bool] = {}

    def rels(self, mask: int) -> FrozenSet[int]:
        return frozenset(r for r in range(self.n) if mask >> r & 1)

    def attrs(self, mask: int) -> int:
        bits = self._attrs.get(mask)
        if bits is None:
            bits, rest = 0, mask
            while rest:
                low = rest & -rest
                bits |= self.edge_bits[low.bit_length() - 1]
                rest ^= low
            self._attrs[mask] = bits
        return bits

    def cut(self, mask: int) -> int:
        """Attribute bits shared between mask and the remaining relations."""
        return self.attrs(mask) & self.attrs(self.full ^ mask)

    def connected(self, mask: int) -> bool:
        if mask not in self._connected:
            low = mask & -mask
            seen, frontier = low, low
            while frontier:
                bit = frontier & -frontier
                frontier ^= bit
                grow = self.adjacent[bit.bit_length() - 1] & mask & ~seen
                seen |= grow
                frontier |= grow
            self._connected[mask] = seen == mask
        return self._connected[mask]

    def width1(self, mask: int) -> bool:
        shared = self.cut(mask)
        return not shared or any(mask >> r & 1 and not shared & ~self.edge_bits[r] for r in range(self.n))
