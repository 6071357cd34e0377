from pathlib import Path
from typing import Dict, List, Optional

from jinja2 import Environment, FileSystemLoader

from app.models.cards import CardinalityProvider
from app.models.hypergraph import Hypergraph
from app.models.jointree import JoinTree
from app.models.metadecomp import MetaDecomposition
from app.models.plan import PlanNode, QueryPlan, Scan, postorder

# ------------------------------
# Templates
# ------------------------------
TEMPLATES_DIR = Path(__file__).resolve().parent.parent / "templates"

templates = Environment(
    loader=FileSystemLoader(str(TEMPLATES_DIR)),
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)


def _quote(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


# ------------------------------
# DOT
# ------------------------------
def meta_to_dot(M: MetaDecomposition) -> str:
    H = M.H
    nodes = []
    for v in M.subtree(M.root):
        node = M.nodes[v]
        nodes.append({
            "id": v,
            "label": "∅" if node.minor else H.relation_names[node.relation],
            "chi": H.attr_labels(node.chi),
            "kappa": H.attr_labels(node.kappa),
            "minor": node.minor,
        })
    edges = [(M.parent[v], v) for v in M.subtree(M.root) if v in M.parent]
    return templates.get_template("meta.dot.j2").render(nodes=nodes, edges=edges)


def tree_to_dot(T: JoinTree, H: Hypergraph) -> str:
    nodes = [{"id": v, "label": H.relation_names[T.nodes[v].relation], "root": v == T.root}
             for v in T.preorder()]
    edges = [(T.parent[v], v) for v in T.preorder() if v in T.parent]
    return templates.get_template("tree.dot.j2").render(nodes=nodes, edges=edges)


def plan_to_dot(P: QueryPlan, cp: Optional[CardinalityProvider] = None, cap: int = 4) -> str:
    H = P.H
    ids: Dict[PlanNode, int] = {}
    nodes, edges = [], []
    for node in postorder(P.root):
        ids[node] = len(ids)
        label = H.relation_names[node.relation] if isinstance(node, Scan) else "⋈"
        nodes.append({
            "id": ids[node],
            "label": label,
            "interface": H.attr_labels(P.interface(node)),
            "width": P.node_width(node, cap),
            "rows": cp.card(node.relations) if cp is not None else None,
        })
        if not isinstance(node, Scan):
            edges.extend([(ids[node], ids[node.left]), (ids[node], ids[node.right])])
    return templates.get_template("plan.dot.j2").render(nodes=nodes, edges=edges)


# ------------------------------
# SQL
# ------------------------------
def sql_views(P: QueryPlan) -> List[dict]:
    """One view per plan node in post-order, each projected to the node's kept attributes."""
    H = P.H
    names: Dict[PlanNode, str] = {}
    views = []
    for node in postorder(P.root):
        names[node] = f"v{len(names) + 1}"
        kept = H.attr_labels(P.kept_attrs(node))
        if isinstance(node, Scan):
            source = _quote(H.relation_names[node.relation])
        else:
            source = f"{names[node.left]} NATURAL JOIN {names[node.right]}"
        views.append({
            "name": names[node],
            "select": ", ".join(_quote(a) for a in kept) if kept else "1 AS one",
            "source": source,
            "node": node,
        })
    return views


def emit_sql(P: QueryPlan) -> str:
    """Chained CREATE TEMP VIEW script for P; the last statement reads the root view."""
    return templates.get_template("plan.sql.j2").render(label=P.label(), views=sql_views(P))


def view_statement(view: dict) -> str:
    return f"CREATE TEMP VIEW {view['name']} AS SELECT DISTINCT {view['select']} FROM {view['source']}"
