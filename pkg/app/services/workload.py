import logging
from typing import Dict, List, Optional

import numpy as np

from app.errors import InvalidArgumentError
from app.models.cards import CardinalityProvider
from app.models.hypergraph import Hypergraph
from app.models.microdb import MicroDatabase

logger = logging.getLogger(__name__)


# ------------------------------
# Queries
# ------------------------------
def gen_acyclic(n: int, fanout_max: int = 3, shared_attr_bias: float = 0.5, seed: Optional[int] = None,
                extra_shared_prob: float = 0.25) -> Hypergraph:
    """
    Random connected acyclic query. A random tree with bounded fan-out is
    drawn first; every node gets a private attribute and every tree edge a
    join attribute. With probability shared_attr_bias the edge reuses a join
    attribute the parent already has, which is what produces minor nodes.
    The tree is a join tree of the result, so the query is acyclic.
    """
    if n < 1:
        raise InvalidArgumentError("n must be at least 1")
    if fanout_max < 1 and n > 1:
        raise InvalidArgumentError("fanout_max must be at least 1")
    if not 0 <= shared_attr_bias <= 1 or not 0 <= extra_shared_prob <= 1:
        raise InvalidArgumentError("probabilities must lie in [0, 1]")
    rng = np.random.default_rng(seed)

    attrs: List[List[str]] = [[f"p{i + 1}"] for i in range(n)]
    joins: List[List[str]] = [[] for _ in range(n)]
    children = [0] * n
    counter = 0
    for i in range(1, n):
        open_nodes = [p for p in range(i) if children[p] < fanout_max]
        p = int(rng.choice(open_nodes))
        children[p] += 1
        if joins[p] and rng.random() < shared_attr_bias:
            shared = joins[p][int(rng.integers(len(joins[p])))]
        else:
            counter += 1
            shared = f"x{counter}"
            attrs[p].append(shared)
            joins[p].append(shared)
        attrs[i].append(shared)
        joins[i].append(shared)
        if rng.random() < extra_shared_prob:
            counter += 1
            extra = f"x{counter}"
            attrs[p].append(extra)
            attrs[i].append(extra)
    H = Hypergraph.from_relations([(f"R{i + 1}", a) for i, a in enumerate(attrs)])
    logger.debug("generated %d relations over %d attributes (seed %s)", n, len(H.attribute_names), seed)
    return H


def gen_star(n: int, seed: Optional[int] = None) -> Hypergraph:
    """R1(p1, x1) ... Rn(pn, x1): every relation holds the one join attribute."""
    return gen_acyclic(n, fanout_max=max(n - 1, 1), shared_attr_bias=1.0, seed=seed, extra_shared_prob=0.0)


def gen_chain(n: int, seed: Optional[int] = None) -> Hypergraph:
    return gen_acyclic(n, fanout_max=1, shared_attr_bias=0.0, seed=seed, extra_shared_prob=0.0)


PRESETS = {
    "star": lambda n, seed: gen_star(n, seed),
    "chain": lambda n, seed: gen_chain(n, seed),
    "random": lambda n, seed: gen_acyclic(n, fanout_max=4, shared_attr_bias=0.5, seed=seed),
}


def generate(preset: str, n: int, seed: Optional[int] = None) -> Hypergraph:
    try:
        make = PRESETS[preset]
    except KeyError:
        raise InvalidArgumentError(f"unknown preset {preset}; choose from {', '.join(PRESETS)}")
    return make(n, seed)


# ------------------------------
# Cardinalities
# ------------------------------
def _ordered(cp_table) -> List:
    return sorted(cp_table, key=lambda rels: (len(rels), sorted(rels)))


def random_cards(H: Hypergraph, low: int = 1, high: int = 1000, seed: Optional[int] = None) -> CardinalityProvider:
    """Independent random integer cardinality for every connected relation subset."""
    if low < 0 or high < low:
        raise InvalidArgumentError("need 0 <= low <= high")
    rng = np.random.default_rng(seed)
    subsets = sorted(H.connected_subsets(), key=lambda rels: (len(rels), sorted(rels)))
    values = rng.integers(low, high + 1, size=len(subsets))
    return CardinalityProvider(H, {rels: int(v) for rels, v in zip(subsets, values)})


def perturb_cards(cp: CardinalityProvider, sigma: float, seed: Optional[int] = None) -> CardinalityProvider:
    """Multiply every entry by e^eps, eps ~ Normal(0, sigma^2), rounding up to at least 1."""
    if sigma < 0:
        raise InvalidArgumentError("sigma must be non-negative")
    if sigma == 0:
        return cp.with_table(dict(cp.table))
    rng = np.random.default_rng(seed)
    keys = _ordered(cp.table)
    exact = np.array([cp.table[k] for k in keys], dtype=float)
    noisy = np.maximum(np.ceil(exact * np.exp(rng.normal(0.0, sigma, size=len(keys)))), 1.0)
    return cp.with_table({k: float(v) for k, v in zip(keys, noisy)})


# ------------------------------
# Databases
# ------------------------------
def gen_database(H: Hypergraph, rows: int = 100, max_domain: int = 10, seed: Optional[int] = None,
                 max_rows: int = 10_000) -> MicroDatabase:
    """
    Uniform random integer tables. Each attribute draws its own domain size
    from [2, max_domain], so joins on different attributes get different
    selectivities.
    """
    if rows < 0 or max_domain < 1:
        raise InvalidArgumentError("need rows >= 0 and max_domain >= 1")
    rng = np.random.default_rng(seed)
    domains = rng.integers(min(2, max_domain), max_domain + 1, size=len(H.attribute_names))
    tables: Dict[int, np.ndarray] = {}
    for r in H.relations:
        columns = sorted(H.edges[r])
        tables[r] = np.stack([rng.integers(0, domains[a], size=rows) for a in columns], axis=1) \
            if rows else np.zeros((0, len(columns)), dtype=np.int64)
    return MicroDatabase(H, tables, max_rows)
