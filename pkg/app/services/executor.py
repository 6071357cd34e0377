import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Set, Tuple

from sqlalchemy import Column, Integer, MetaData, Table, insert

from app.database.session import make_engine
from app.errors import CapExceededError, SchemaError
from app.models.cards import CardinalityProvider
from app.models.hypergraph import BitsetIndex, Hypergraph
from app.models.microdb import MicroDatabase
from app.models.plan import PlanNode, QueryPlan, Scan, postorder
from app.services.render import sql_views, view_statement

logger = logging.getLogger(__name__)

Row = Tuple[int, ...]


@dataclass
class Relation:
    """Set-semantics intermediate result; columns are attribute ids in increasing order."""
    columns: Tuple[int, ...]
    rows: Set[Row]

    def __len__(self) -> int:
        return len(self.rows)


def project(rel: Relation, attrs: Iterable[int]) -> Relation:
    keep = tuple(sorted(set(attrs) & set(rel.columns)))
    positions = [rel.columns.index(a) for a in keep]
    return Relation(keep, {tuple(row[i] for i in positions) for row in rel.rows})


def hash_join(left: Relation, right: Relation) -> Relation:
    """Build a hash table on the left input keyed by the shared columns, then look up each right row in it."""
    shared = [a for a in left.columns if a in right.columns]
    lkey = [left.columns.index(a) for a in shared]
    rkey = [right.columns.index(a) for a in shared]
    extra = [i for i, a in enumerate(right.columns) if a not in left.columns]
    columns = left.columns + tuple(right.columns[i] for i in extra)

    table: Dict[Row, List[Row]] = defaultdict(list)
    for row in left.rows:
        table[tuple(row[i] for i in lkey)].append(row)

    out = set()
    for row in right.rows:
        for match in table.get(tuple(row[i] for i in rkey), ()):
            out.add(match + tuple(row[i] for i in extra))

    order = sorted(range(len(columns)), key=lambda i: columns[i])
    return Relation(tuple(columns[i] for i in order), {tuple(row[i] for i in order) for row in out})


def base_relation(db: MicroDatabase, r: int) -> Relation:
    return Relation(db.columns(r), set(db.rows(r)))


@dataclass
class ExecutionResult:
    columns: Tuple[int, ...]
    rows: Set[Row]
    node_sizes: Dict[PlanNode, int] = field(default_factory=dict)
    interface_sizes: Dict[PlanNode, int] = field(default_factory=dict)

    @property
    def max_interface(self) -> int:
        """Largest |pi_I(p) Q(p)| over plan nodes."""
        return max(self.interface_sizes.values(), default=0)

    @property
    def max_intermediate(self) -> int:
        return max(self.node_sizes.values(), default=0)


def _check_schema(H: Hypergraph, db: MicroDatabase) -> None:
    if db.H.relation_names != H.relation_names:
        raise SchemaError("database relations do not match the query")
    for r in H.relations:
        if db.H.attr_labels(db.H.edges[r]) != H.attr_labels(H.edges[r]):
            raise SchemaError(f"table {H.relation_names[r]} has other attributes than the query")


def execute(P: QueryPlan, db: MicroDatabase) -> ExecutionResult:
    """Evaluate P bottom-up, projecting every node to its kept attributes."""
    _check_schema(P.H, db)
    results: Dict[PlanNode, Relation] = {}
    report = ExecutionResult((), set())
    for node in postorder(P.root):
        if isinstance(node, Scan):
            rel = base_relation(db, node.relation)
        else:
            rel = hash_join(results[node.left], results[node.right])
        rel = project(rel, P.kept_attrs(node))
        results[node] = rel
        report.node_sizes[node] = len(rel)
        report.interface_sizes[node] = len(project(rel, P.interface(node)))
        logger.debug("%s: %d rows", P.label(node), len(rel))
    final = results[P.root]
    report.columns = final.columns
    report.rows = final.rows
    return report


def true_cardinalities(H: Hypergraph, db: MicroDatabase, cap: int = 10, estimate: bool = False) -> CardinalityProvider:
    """
    Cardinality of every connected relation subset, by execution: the
    distinct rows of the induced query projected to its interface and output
    attributes. Single relations are projected the same way, so the full set
    matches execute()'s result size.
    """
    if H.n_relations > cap:
        raise CapExceededError(f"{H.n_relations} relations exceed true_cards={cap}")
    _check_schema(H, db)
    index = BitsetIndex(H)
    results: Dict[int, Relation] = {}
    table = {}
    for mask in range(1, index.full + 1):
        if not index.connected(mask):
            continue
        rels = index.rels(mask)
        keep = H.interface(rels) | (H.output_attrs & H.attrs(rels))
        if len(rels) == 1:
            (r,) = rels
            results[mask] = project(base_relation(db, r), keep)
            table[rels] = len(results[mask])
            continue
        r = next(r for r in sorted(rels, reverse=True) if index.connected(mask ^ (1 << r)))
        joined = hash_join(results[mask ^ (1 << r)], results[1 << r])
        results[mask] = project(joined, keep)
        table[rels] = len(results[mask])
    logger.info("true cardinalities: %d connected subsets", len(table))
    return CardinalityProvider(H, table, estimate=estimate)


# ------------------------------
# SQL cross-check
# ------------------------------
def load_sqlite(db: MicroDatabase):
    """Fresh in-memory SQLite engine holding db's tables."""
    engine = make_engine("sqlite://")
    metadata = MetaData()
    H = db.H
    tables = {}
    for r in H.relations:
        tables[r] = Table(H.relation_names[r], metadata,
                          *[Column(a, Integer) for a in H.attr_labels(H.edges[r])])
    metadata.create_all(engine)
    with engine.begin() as conn:
        for r, table in tables.items():
            names = H.attr_labels(H.edges[r])
            rows = [dict(zip(names, row)) for row in db.rows(r)]
            if rows:
                conn.execute(insert(table), rows)
    return engine


def verify_sql(P: QueryPlan, db: MicroDatabase) -> Dict[str, object]:
    """
    Run the chained-view script in SQLite and compare every view's row count
    with the executor's node size.
    """
    _check_schema(P.H, db)
    expected = execute(P, db)
    engine = load_sqlite(db)
    views = []
    try:
        with engine.connect() as conn:
            for view in sql_views(P):
                conn.exec_driver_sql(view_statement(view))
                rows = conn.exec_driver_sql(f"SELECT COUNT(*) FROM {view['name']}").scalar()
                views.append({
                    "view": view["name"],
                    "node": P.label(view["node"]),
                    "sql_rows": rows,
                    "executor_rows": expected.node_sizes[view["node"]],
                })
    finally:
        engine.dispose()
    ok = all(v["sql_rows"] == v["executor_rows"] for v in views)
    if not ok:
        logger.warning("SQL view sizes differ from the executor for %s", P.label())
    return {"ok": ok, "views": views}
