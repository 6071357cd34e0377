import argparse
import json
import logging

from app.cli import CommandResult, CommandRouter, arg, load_cards, load_query, read_text
from app.config import Settings
from app.errors import InternalInvariantError, InvalidArgumentError
from app.models.hypergraph import Hypergraph
from app.models.microdb import MicroDatabase
from app.models.metadecomp import build_meta
from app.schemas.plan import parse_plan
from app.services.executor import execute, true_cardinalities, verify_sql
from app.services.optimizer import OptimizedPlan, optimize_meta, optimize_meta_rebranch, optimize_rooted
from app.services.oracle import oracle_global_dp, oracle_join_trees, oracle_width1_dp
from app.services.render import emit_sql, plan_to_dot, tree_to_dot
from app.services.workload import perturb_cards

logger = logging.getLogger(__name__)

router = CommandRouter()

OPTIMIZE_ARGUMENTS = [
    arg("query"),
    arg("--cards", default=None, help="cardinality table JSON"),
    arg("--local", choices=["exact", "greedy"], default="exact"),
    arg("--rebranch", choices=["on", "off"], default="on"),
    arg("--root", default=None, help="restrict to join trees rooted at this relation"),
    arg("--dominated", action="store_true", help="root at the relation holding every output attribute"),
    arg("--estimate", action="store_true", help="estimate missing cardinalities by independence"),
    arg("--sigma", type=float, default=None, help="perturb cardinalities by e^eps, eps ~ N(0, sigma^2)"),
    arg("--seed", type=int, default=0),
    arg("--format", "--emit", dest="format", choices=["json", "sql", "dot"], default="json"),
]


def _root_relation(args: argparse.Namespace, H: Hypergraph):
    if args.root is not None:
        return H.relation_id(args.root)
    if args.dominated:
        r = H.dominating_relation()
        if r is None:
            raise InvalidArgumentError("no relation holds every output attribute")
        return r
    return None


def _optimize(args: argparse.Namespace, settings: Settings, H: Hypergraph, cp) -> OptimizedPlan:
    caps = settings.caps
    M = build_meta(H)
    root = _root_relation(args, H)
    if root is not None:
        result = optimize_rooted(M, cp, root, caps.rebranch)
    elif args.rebranch == "on":
        result = optimize_meta_rebranch(M, cp, args.local, caps.exact_fanout, caps.rebranch)
    else:
        result = optimize_meta(M, cp, args.local, caps.exact_fanout)
    recomputed = result.plan.width(caps.width_cover).total
    if H.n_relations > 1 and recomputed != 1:
        raise InternalInvariantError(f"optimizer returned a width-{recomputed} plan")
    return result


def _render(result: OptimizedPlan, cp, fmt: str, settings: Settings, extra: dict) -> CommandResult:
    report = {**result.to_dict(cp, settings.caps.width_cover), **extra}
    if fmt == "sql":
        return CommandResult(report, text=emit_sql(result.plan))
    if fmt == "dot":
        return CommandResult(report, text=plan_to_dot(result.plan, cp, settings.caps.width_cover))
    return CommandResult(report)


# ------------------------------
# optimize
# ------------------------------
@router.command("optimize", help="Cheapest width-1 plan from the meta-decomposition", batch=True,
                arguments=OPTIMIZE_ARGUMENTS)
def optimize(args: argparse.Namespace, settings: Settings):
    H = load_query(args.query)
    if args.cards is None:
        raise InvalidArgumentError("optimize needs --cards")
    cp = load_cards(args.cards, H, args.estimate)
    extra = {}
    if args.sigma is not None:
        cp = perturb_cards(cp, args.sigma, args.seed)
        extra = {"sigma": args.sigma, "seed": args.seed}
    result = _optimize(args, settings, H, cp)
    return _render(result, cp, args.format, settings, extra)


# ------------------------------
# oracle
# ------------------------------
@router.command("oracle", help="Brute-force references: all join trees, global or width-1 subset DP", batch=True,
                arguments=[
                    arg("query"),
                    arg("--cards", default=None),
                    arg("--mode", choices=["global", "width1", "trees"], default="global"),
                    arg("--estimate", action="store_true"),
                    arg("--format", "--emit", dest="format", choices=["json", "sql", "dot", "count"], default="json"),
                ])
def oracle(args: argparse.Namespace, settings: Settings):
    H = load_query(args.query)
    caps = settings.caps
    if args.mode == "trees":
        trees = sorted(oracle_join_trees(H, caps.oracle_trees), key=lambda T: repr(T.canonical()))
        report = {"count": len(trees)}
        if args.format == "count":
            return report
        report["trees"] = [T.to_dict(H) for T in trees]
        if args.format == "dot":
            return CommandResult(report, text="".join(tree_to_dot(T, H) for T in trees))
        return report
    if args.cards is None:
        raise InvalidArgumentError(f"oracle --mode {args.mode} needs --cards")
    cp = load_cards(args.cards, H, args.estimate)
    if args.mode == "global":
        result = oracle_global_dp(H, cp, caps.global_dp)
    else:
        result = oracle_width1_dp(H, cp, caps.global_dp)
    fmt = "json" if args.format == "count" else args.format
    return _render(result, cp, fmt, settings, {"mode": args.mode})


# ------------------------------
# exec
# ------------------------------
@router.command("exec", help="Execute a plan on CSV tables and report intermediate sizes",
                arguments=[
                    arg("query"),
                    arg("--data", required=True, help="directory of <relation>.csv files"),
                    arg("--plan", default=None, help="plan JSON; default: optimize on true cardinalities"),
                    arg("--sql-check", action="store_true", help="cross-check view sizes in SQLite"),
                    arg("--emit-cards", default=None, help="write the true cardinality table here"),
                    arg("--show-rows", type=int, default=20, help="result rows to include"),
                ])
def exec_plan(args: argparse.Namespace, settings: Settings):
    H = load_query(args.query)
    caps = settings.caps
    db = MicroDatabase.from_csv_dir(H, args.data, caps.db_rows)
    tc = None
    if args.plan is not None:
        P = parse_plan(read_text(args.plan), H, source=args.plan)
        if not P.complete:
            raise InvalidArgumentError("plan does not cover every relation")
    else:
        tc = true_cardinalities(H, db, caps.true_cards)
        defaults = argparse.Namespace(root=None, dominated=False, rebranch="on", local="exact")
        P = _optimize(defaults, settings, H, tc).plan
    if args.emit_cards:
        if tc is None:
            tc = true_cardinalities(H, db, caps.true_cards)
        with open(args.emit_cards, "w") as fh:
            json.dump(tc.to_dict(), fh, indent=2)
    result = execute(P, db)
    N = db.max_rows
    width = P.width(caps.width_cover).total
    report = {
        "plan": P.label(),
        "width": width,
        "N": N,
        "result_rows": len(result.rows),
        "columns": H.attr_labels(result.columns),
        "rows": sorted(list(row) for row in result.rows)[:args.show_rows],
        "max_interface": result.max_interface,
        "max_intermediate": result.max_intermediate,
        "within_bound": result.max_interface <= N if width <= 1 else None,
        "nodes": [{"node": P.label(node), "rows": size} for node, size in result.node_sizes.items()],
    }
    if args.sql_check:
        report["sql_check"] = verify_sql(P, db)
        if not report["sql_check"]["ok"]:
            return CommandResult(report, 2)
    return report
