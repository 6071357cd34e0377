import json

import pytest
from sqlalchemy import create_engine, func, select
from sqlalchemy.orm import Session

from app.models.bench import BenchRun
from main import run
from tests.queries import hierarchical_cards, triangle


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("METADECOMP_CAPS", "METADECOMP_LOG_LEVEL", "METADECOMP_SIGMA", "METADECOMP_DATABASE_URL"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def cli(capsys):
    def call(*argv, raw=False):
        code = run([str(a) for a in argv])
        out = capsys.readouterr().out
        return code, (out if raw else json.loads(out))
    return call


@pytest.fixture
def hier_files(hier_query, write_query, write_cards):
    return write_query(hier_query), write_cards(hierarchical_cards(hier_query))


# ------------------------------
# Structure
# ------------------------------
def test_check(cli, hier_query, write_query):
    code, report = cli("check", write_query(hier_query))
    assert code == 0
    assert report["acyclic"] and report["connected"]
    assert report["gyo_order"][-1] in hier_query.relation_names
    code, report = cli("check", write_query(triangle(), "triangle.json"))
    assert code == 2
    assert report["acyclic"] is False
    assert "gyo_order" not in report


def test_meta(cli, dummy_query, write_query):
    code, report = cli("meta", write_query(dummy_query))
    assert code == 0
    assert report["minor_nodes"] == 1
    assert report["meta"]["relation"] == "B"
    code, text = cli("meta", write_query(dummy_query), "--format", "dot", raw=True)
    assert text.startswith("digraph")


def test_enumerate_count_on_a_star(cli, star_query, write_query):
    code, report = cli("enumerate", write_query(star_query(4)), "--format", "count")
    assert code == 0
    assert report["count"] == 64
    assert report["counters"]["yields"] == 64


def test_enumerate_limits(cli, star_query, write_query):
    path = write_query(star_query(4))
    code, report = cli("enumerate", path, "--limit", 5)
    assert code == 0
    assert report["count"] == 5 and report["truncated"]
    assert len(report["trees"]) == 5
    code, report = cli("enumerate", path, "--limit", 5, "--format", "count")
    assert code == 3
    assert report["count"] is None


def test_enumerate_gyo_baseline(cli, two_level_query, write_query):
    code, report = cli("enumerate", write_query(two_level_query), "--method", "gyo", "--format", "count")
    assert code == 0
    assert report["count"] == 20


def test_width_with_tree(cli, hier_query, hier_wide_plan, hier_tree, tmp_path, write_query):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps(hier_wide_plan.to_dict()))
    tree = tmp_path / "tree.json"
    tree.write_text(json.dumps(hier_tree.to_dict(hier_query)))
    code, report = cli("width", write_query(hier_query), plan, "--tree", tree)
    assert code == 0
    assert report["width"] == 2
    assert report["induced_by"] is False
    assert report["witness"] == {"missing": ["R2", "R3"]}


# ------------------------------
# Planning
# ------------------------------
def test_optimize(cli, hier_files):
    query, cards = hier_files
    code, report = cli("optimize", query, "--cards", cards)
    assert code == 0
    assert report["cost"] == 480
    assert report["width"] == 1
    assert report["version"]
    code, report = cli("optimize", query, "--cards", cards, "--root", "R3", "--local", "greedy")
    assert report["join_tree"]["relation"] == "R3"
    assert report["cost"] >= 480


def test_optimize_emits_sql(cli, hier_files):
    query, cards = hier_files
    code, text = cli("optimize", query, "--cards", cards, "--emit", "sql", raw=True)
    assert code == 0
    assert text.count("CREATE TEMP VIEW") == 7
    assert text.rstrip().endswith(";")


def test_optimize_needs_cards(cli, hier_files):
    code, report = cli("optimize", hier_files[0])
    assert code == 2
    assert report["error"] == "invalid-argument"


def test_oracle_modes(cli, hier_files, monkeypatch):
    query, cards = hier_files
    code, report = cli("oracle", query, "--mode", "trees", "--format", "count")
    assert (code, report["count"]) == (0, 4)
    code, report = cli("oracle", query, "--cards", cards)
    assert report["cost"] == 480 and report["mode"] == "global"
    code, report = cli("oracle", query, "--cards", cards, "--mode", "width1")
    assert report["cost"] == 480
    monkeypatch.setenv("METADECOMP_CAPS", "oracle_trees=3")
    code, report = cli("oracle", query, "--mode", "trees")
    assert code == 3
    assert report["error"] == "cap-exceeded"


# ------------------------------
# Workload
# ------------------------------
def test_gen_then_exec(cli, tmp_path):
    query, cards, data = tmp_path / "q.json", tmp_path / "cards.json", tmp_path / "data"
    code, report = cli("gen", "--n", 4, "--seed", 1, "--rows", 20, "--emit", query, cards, data)
    assert code == 0
    assert report["data"] == str(data)
    assert len(list(data.glob("*.csv"))) == 4

    truth = tmp_path / "truth.json"
    code, report = cli("exec", query, "--data", data, "--sql-check", "--emit-cards", truth)
    assert code == 0
    assert report["width"] == 1
    assert report["within_bound"] is True
    assert report["max_interface"] <= report["N"] == 20
    assert report["sql_check"]["ok"]
    assert len(json.loads(truth.read_text())["cards"]) >= 4

    code, report = cli("optimize", query, "--cards", cards, "--sigma", 1.0, "--seed", 3)
    assert code == 0
    assert report["sigma"] == 1.0


def test_bench_stores_rows(cli, tmp_path):
    url = f"sqlite:///{tmp_path / 'bench.db'}"
    code, report = cli("bench", "--n-min", 2, "--n-max", 3, "--instances", 2, "--rows", 10,
                       "--format", "json", "--store", url)
    assert code == 0
    assert len(report["rows"]) == 4
    assert all(row["ratio"] <= 1 for row in report["rows"])
    assert report["median_ratio"] <= 1
    engine = create_engine(url)
    with Session(engine) as session:
        assert session.scalar(select(func.count()).select_from(BenchRun)) == 4
    engine.dispose()


def test_bench_csv(cli):
    code, text = cli("bench", "--n-min", 3, "--n-max", 3, "--instances", 1, "--sigma", 0, raw=True)
    header, row = text.splitlines()
    assert header.split(",")[:4] == ["instance", "seed", "n", "metaOptCost"]
    assert row.startswith("random-3-0,0,3,")


# ------------------------------
# Batch mode and errors
# ------------------------------
def test_batch_directory(cli, tmp_path):
    folder = tmp_path / "queries"
    folder.mkdir()
    (folder / "a_hier.txt").write_text("R1(x1,x2,x3)\nR2(x1,x4,x5)\nR3(x5,x6)\nR4(x3,x7)\n")
    (folder / "b_triangle.txt").write_text("R(a,b)\nS(b,c)\nT(a,c)\n")
    (folder / "notes.md").write_text("ignored")
    code, report = cli("meta", folder)
    assert code == 2
    first, second = report["results"]
    assert first["file"] == "a_hier.txt" and first["nodes"] == 4
    assert second["file"] == "b_triangle.txt" and second["error"] == "not-acyclic"


def test_error_reports(cli, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("R1(a,b)\nnot a relation\n")
    code, report = cli("meta", bad)
    assert code == 2
    assert report["error"] == "parse-error" and report["line"] == 2
    code, report = cli("meta", tmp_path / "missing.json")
    assert code == 2
    assert report["error"] == "invalid-argument"
    split = tmp_path / "split.txt"
    split.write_text("A(x)\nB(y)\n")
    code, report = cli("meta", split)
    assert (code, report["error"]) == (2, "disconnected")


def test_usage_errors(capsys):
    assert run(["frobnicate"]) == 2
    assert run(["enumerate"]) == 2
    capsys.readouterr()
