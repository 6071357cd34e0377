import argparse
import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np

from app.cli import CommandResult, CommandRouter, arg
from app.config import VERSION, Caps, Settings
from app.database.session import Base, get_db, session_factory
from app.errors import InternalInvariantError, InvalidArgumentError
from app.models.bench import BenchRun
from app.models.metadecomp import build_meta
from app.schemas.bench import BenchRow
from app.schemas.query import QueryIn
from app.services.enumerate import count_join_trees, enumerate_join_trees_gyo
from app.services.executor import true_cardinalities
from app.services.optimizer import optimize_meta, optimize_meta_rebranch
from app.services.oracle import oracle_global_dp
from app.services.workload import PRESETS, gen_database, generate, perturb_cards, random_cards

logger = logging.getLogger(__name__)

router = CommandRouter()


# ------------------------------
# gen
# ------------------------------
@router.command("gen", help="Generate a random acyclic query, cardinalities and tables",
                arguments=[
                    arg("--preset", choices=sorted(PRESETS), default="random"),
                    arg("--n", type=int, default=6),
                    arg("--seed", type=int, default=0),
                    arg("--rows", type=int, default=100, help="rows per generated table"),
                    arg("--max-domain", type=int, default=10),
                    arg("--emit", nargs="+", default=None, metavar="PATH",
                        help="query.json [cards.json [data_dir]]"),
                ])
def gen(args: argparse.Namespace, settings: Settings):
    H = generate(args.preset, args.n, args.seed)
    query = QueryIn.from_hypergraph(H).model_dump()
    report = {"preset": args.preset, "n": args.n, "seed": args.seed}
    if not args.emit:
        return {**report, "query": query}
    if len(args.emit) > 3:
        raise InvalidArgumentError("--emit takes at most query, cards and data paths")
    Path(args.emit[0]).write_text(json.dumps(query, indent=2))
    report["query"] = args.emit[0]
    if len(args.emit) >= 2:
        cards = random_cards(H, seed=args.seed)
        Path(args.emit[1]).write_text(json.dumps(cards.to_dict(), indent=2))
        report["cards"] = args.emit[1]
    if len(args.emit) == 3:
        db = gen_database(H, args.rows, args.max_domain, args.seed, settings.caps.db_rows)
        db.to_csv_dir(args.emit[2])
        report["data"] = args.emit[2]
    return report


# ------------------------------
# bench
# ------------------------------
def run_instance(preset: str, n: int, seed: int, sigma: float, rows: int, caps: Caps) -> dict:
    """One bench row. Module level so worker processes can pickle it."""
    H = generate(preset, n, seed)
    M = build_meta(H)
    cp = random_cards(H, seed=seed)

    best = optimize_meta_rebranch(M, cp, "exact", caps.exact_fanout, caps.rebranch)
    base = optimize_meta(M, cp, "exact", caps.exact_fanout)
    row = BenchRow(instance=f"{preset}-{n}-{seed}", seed=seed, n=n,
                   meta_opt_cost=best.cost, meta_base_cost=base.cost,
                   dp_cells=best.stats.get("dp_cells", 0))

    if n <= caps.global_dp:
        row.global_opt_cost = oracle_global_dp(H, cp, caps.global_dp).cost
        row.ratio = row.global_opt_cost / best.cost if best.cost else 1.0

    stats: dict = {}
    row.width1_count = count_join_trees(M, caps.enumerate_limit, stats)
    row.enum_ops = stats["ops"]
    if n <= caps.gyo_baseline:
        gyo_stats: dict = {}
        for _ in enumerate_join_trees_gyo(H, caps.enumerate_limit, gyo_stats):
            pass
        row.gyo_ops = gyo_stats["ops"]

    if n <= caps.true_cards:
        db = gen_database(H, rows, seed=seed, max_rows=caps.db_rows)
        truth = true_cardinalities(H, db, caps.true_cards)
        exact = optimize_meta_rebranch(M, truth, "exact", caps.exact_fanout, caps.rebranch)
        noisy = optimize_meta_rebranch(M, perturb_cards(truth, sigma, seed), "exact",
                                       caps.exact_fanout, caps.rebranch)
        if n > 1 and noisy.plan.width(caps.width_cover).total != 1:
            raise InternalInvariantError(f"{row.instance}: perturbed optimization lost width 1")
        row.true_cost = noisy.plan.cost(truth)
        row.true_cost_sigma0 = exact.cost
        row.regression = row.true_cost / row.true_cost_sigma0 if row.true_cost_sigma0 else 1.0
    return row.model_dump(by_alias=True)


def store_rows(url: str, rows: List[BenchRow]) -> None:
    for session in get_db(session_factory(url)):
        Base.metadata.create_all(bind=session.get_bind())
        session.add_all([BenchRun.from_row(row, VERSION) for row in rows])
        session.commit()


def median_ratio(rows: List[BenchRow]) -> Optional[float]:
    ratios = [row.ratio for row in rows if row.ratio is not None]
    return float(np.median(ratios)) if ratios else None


@router.command("bench", help="Desk-scale study: width-1 optimum against the global optimum",
                arguments=[
                    arg("--preset", choices=sorted(PRESETS), default="random"),
                    arg("--n-min", type=int, default=2),
                    arg("--n-max", type=int, default=6),
                    arg("--instances", type=int, default=5, help="instances per n"),
                    arg("--seed", type=int, default=0),
                    arg("--sigma", type=float, default=None, help="default: METADECOMP_SIGMA"),
                    arg("--rows", type=int, default=50),
                    arg("--workers", type=int, default=1),
                    arg("--store", default=None, help="SQLAlchemy URL to store rows in"),
                    arg("--format", choices=["csv", "json"], default="csv"),
                ])
def bench(args: argparse.Namespace, settings: Settings):
    if args.n_min < 1 or args.n_max < args.n_min or args.instances < 1 or args.workers < 1:
        raise InvalidArgumentError("need 1 <= n-min <= n-max, instances >= 1 and workers >= 1")
    sigma = settings.sigma if args.sigma is None else args.sigma
    jobs = [(args.preset, n, args.seed + k, sigma, args.rows, settings.caps)
            for n in range(args.n_min, args.n_max + 1) for k in range(args.instances)]
    logger.info("bench: %d instances on %d worker(s)", len(jobs), args.workers)
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            raw = list(pool.map(run_instance, *zip(*jobs)))
    else:
        raw = [run_instance(*job) for job in jobs]
    rows = [BenchRow.model_validate(r) for r in raw]

    for row in rows:
        if row.ratio is not None and row.ratio > 1 + 1e-9:
            raise InternalInvariantError(f"{row.instance}: global optimum above the width-1 optimum")
    median = median_ratio(rows)
    logger.info("bench: median ratio %s", median)
    if args.store:
        store_rows(args.store, rows)

    report = {"seed": args.seed, "sigma": sigma, "median_ratio": median,
              "rows": [row.model_dump(by_alias=True) for row in rows]}
    if args.format == "json":
        return report
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=BenchRow.columns(), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.model_dump(by_alias=True))
    return CommandResult(report, text=buffer.getvalue())
