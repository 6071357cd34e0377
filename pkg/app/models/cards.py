import logging
from typing import Dict, FrozenSet, Iterable, Mapping, Optional, Set

from app.errors import InvalidArgumentError, UnknownCardinalityError
from app.models.hypergraph import Hypergraph

logger = logging.getLogger(__name__)

RelSet = FrozenSet[int]


class CardinalityProvider:
    """
    Output cardinality of induced subqueries, keyed by relation set.

    Singleton entries are required. With estimate=True, missing sets fall
    back to an independence estimate built from base cardinalities and
    per-attribute domain sizes; estimated keys are collected in `estimated`.
    """

    def __init__(self, H: Hypergraph, table: Mapping[Iterable[int], float],
                 domains: Optional[Mapping[int, int]] = None, estimate: bool = False):
        self.H = H
        self.table: Dict[RelSet, float] = {}
        for rels, rows in table.items():
            rels = frozenset(rels)
            if not rels:
                raise InvalidArgumentError("cardinality of the empty relation set is undefined")
            if not rels <= H.full:
                raise InvalidArgumentError(f"cardinality entry names unknown relations {sorted(rels)}")
            if rows < 0:
                raise InvalidArgumentError(f"negative cardinality for {H.rel_labels(rels)}")
            self.table[rels] = rows
        missing = [r for r in H.relations if frozenset((r,)) not in self.table]
        if missing:
            raise InvalidArgumentError(
                f"missing base cardinality for {', '.join(H.rel_labels(missing))}")
        self.domains: Dict[int, int] = dict(domains or {})
        self.estimate = estimate
        self.estimated: Set[RelSet] = set()
        self._estimates: Dict[RelSet, float] = {}

    def __contains__(self, rels: Iterable[int]) -> bool:
        return frozenset(rels) in self.table

    def __len__(self) -> int:
        return len(self.table)

    def card(self, rels: Iterable[int]) -> float:
        rels = frozenset(rels)
        rows = self.table.get(rels)
        if rows is not None:
            return rows
        if not self.estimate:
            raise UnknownCardinalityError(f"no cardinality for {{{', '.join(self.H.rel_labels(rels))}}}")
        if rels not in self._estimates:
            self._estimates[rels] = self._independence(rels)
            self.estimated.add(rels)
            logger.debug("estimated |%s| = %.1f", ",".join(self.H.rel_labels(rels)), self._estimates[rels])
        return self._estimates[rels]

    def domain(self, attr: int) -> int:
        if attr in self.domains:
            return self.domains[attr]
        return max(self.table[frozenset((r,))] for r in self.H.relations if attr in self.H.edges[r]) or 1

    def _independence(self, rels: RelSet) -> float:
        """Join relations in connected order, dividing by the domain of each shared attribute."""
        pending = sorted(rels)
        first = pending.pop(0)
        seen = set(self.H.edges[first])
        rows = float(self.table[frozenset((first,))])
        while pending:
            nxt = next((r for r in pending if self.H.edges[r] & seen), pending[0])
            pending.remove(nxt)
            rows *= self.table[frozenset((nxt,))]
            for a in self.H.edges[nxt] & seen:
                rows /= max(self.domain(a), 1)
            seen |= self.H.edges[nxt]
        return rows

    def with_table(self, table: Mapping[RelSet, float]) -> "CardinalityProvider":
        return CardinalityProvider(self.H, table, self.domains, self.estimate)

    def to_dict(self) -> dict:
        return {
            "cards": [{"rels": self.H.rel_labels(rels), "rows": rows}
                      for rels, rows in sorted(self.table.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))],
            "domains": {self.H.attribute_names[a]: d for a, d in sorted(self.domains.items())},
        }
