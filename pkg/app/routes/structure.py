import argparse
import itertools
import logging

from app.cli import CommandResult, CommandRouter, arg, load_query, read_text
from app.config import Settings
from app.errors import InternalInvariantError
from app.models.hypergraph import gyo_order
from app.models.jointree import validate
from app.models.metadecomp import build_meta, validate_meta
from app.schemas.plan import parse_plan, parse_tree
from app.services.enumerate import enumerate_join_trees, enumerate_join_trees_gyo
from app.services.render import meta_to_dot, tree_to_dot

logger = logging.getLogger(__name__)

router = CommandRouter()


# ------------------------------
# check
# ------------------------------
@router.command("check", help="Report connectivity and acyclicity of a query", batch=True,
                arguments=[arg("query")])
def check(args: argparse.Namespace, settings: Settings):
    H = load_query(args.query, require_connected=False)
    connected = H.is_connected()
    order = gyo_order(H)
    report = {
        "relations": H.n_relations,
        "attributes": len(H.attribute_names),
        "connected": connected,
        "acyclic": order is not None,
    }
    if order is not None:
        report["gyo_order"] = [H.relation_names[ref.index] for ref, _ in order]
        dominating = H.dominating_relation()
        report["dominating_relation"] = H.relation_names[dominating] if dominating is not None else None
    return CommandResult(report, 0 if connected and order is not None else 2)


# ------------------------------
# meta
# ------------------------------
@router.command("meta", help="Build and validate the meta-decomposition", batch=True,
                arguments=[arg("query"), arg("--format", choices=["json", "dot"], default="json")])
def meta(args: argparse.Namespace, settings: Settings):
    H = load_query(args.query)
    M = build_meta(H)
    violation = validate_meta(M, H)
    if violation is not None:
        raise InternalInvariantError(f"built meta-decomposition violates {violation.condition}: {violation.detail}")
    report = {
        "nodes": len(M),
        "minor_nodes": len(M.minor_nodes),
        "fanout": M.fanout(),
        "meta": M.to_dict(),
    }
    if args.format == "dot":
        return CommandResult(report, text=meta_to_dot(M))
    return report


# ------------------------------
# enumerate
# ------------------------------
@router.command("enumerate", help="Enumerate every join tree of an acyclic query", batch=True,
                arguments=[
                    arg("query"),
                    arg("--limit", type=int, default=None, help="stop after this many trees"),
                    arg("--format", choices=["json", "dot", "count"], default="json"),
                    arg("--method", choices=["meta", "gyo"], default="meta",
                        help="meta-decomposition enumerator or the naive GYO baseline"),
                ])
def enumerate_trees(args: argparse.Namespace, settings: Settings):
    H = load_query(args.query)
    caps = settings.caps
    limit = args.limit if args.limit is not None else caps.enumerate_limit
    stats: dict = {}
    M = build_meta(H)
    if args.method == "gyo":
        caps.require("gyo_baseline", H.n_relations, "GYO baseline")
        stream = enumerate_join_trees_gyo(H, None, stats)
    else:
        stream = enumerate_join_trees(M, stats)

    if args.format == "count":
        count = sum(1 for _ in itertools.islice(stream, limit + 1))
        if count > limit:
            return CommandResult({"count": None, "limit": limit, "counters": stats}, 3)
        return {"count": count, "counters": stats}

    trees = list(itertools.islice(stream, limit + 1))
    truncated = len(trees) > limit
    trees = trees[:limit]
    for T in trees:
        violation = validate(T, H)
        if violation is not None:
            raise InternalInvariantError(f"enumerated tree violates {violation.condition}: {violation.detail}")
    report = {"count": len(trees), "truncated": truncated, "counters": stats,
              "trees": [T.to_dict(H) for T in trees]}
    if args.format == "dot":
        return CommandResult(report, text="".join(tree_to_dot(T, H) for T in trees))
    return report


# ------------------------------
# width
# ------------------------------
@router.command("width", help="Width of a plan, and whether a join tree induces it",
                arguments=[
                    arg("query"),
                    arg("plan", help="plan JSON ({\"scan\": ...} / {\"join\": [...]})"),
                    arg("--tree", default=None, help="join tree JSON to test is_induced_by against"),
                ])
def width(args: argparse.Namespace, settings: Settings):
    H = load_query(args.query)
    P = parse_plan(read_text(args.plan), H, source=args.plan)
    cap = settings.caps.width_cover
    report = {"width": P.width(cap).total, "complete": P.complete, "plan": P.to_dict(cap=cap)}
    if args.tree:
        T = parse_tree(read_text(args.tree), H, source=args.tree)
        violation = validate(T, H)
        if violation is not None:
            report["tree_violation"] = violation.to_dict()
            return CommandResult(report, 2)
        induced, witness = P.is_induced_by(T)
        report["induced_by"] = induced
        if induced:
            report["witness"] = {
                P.label(node): [H.relation_names[s], H.relation_names[t]]
                for node, (s, t) in witness["joins"].items()
            }
        else:
            report["witness"] = {k: (H.rel_labels(v) if k == "missing" else v) for k, v in witness.items()}
    return report
