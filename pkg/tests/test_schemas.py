import json

import pytest

from app.errors import DisconnectedError, ParseError
from app.schemas.cards import dump_cards, parse_cards
from app.schemas.plan import parse_plan, parse_tree
from app.schemas.query import dump_query, parse_query
from tests.queries import hierarchical_cards


# ------------------------------
# Queries
# ------------------------------
def test_text_and_json_agree(movies_query):
    text = """
    # movie keywords
    ci(mid, pid)
    cn(cid, cc)
    k(kid, kw)
    mc(mid, cid);
    mk(mid, kid)
    n(pid, name)
    t(mid, title)
    OUTPUT name;
    """
    assert parse_query(text) == movies_query
    assert parse_query(dump_query(movies_query)) == movies_query


@pytest.mark.parametrize("text, line", [
    ("R1(a,b)\nR2 b c\n", 2),
    ("R1(a,b)\nR2()\n", 2),
    ("R1(a,b)\nOUTPUT a;\nR2(b,c)\n", 3),
])
def test_text_errors_carry_the_line(text, line):
    with pytest.raises(ParseError) as info:
        parse_query(text, source="q.txt")
    assert info.value.line == line
    assert info.value.to_report()["line"] == line
    assert info.value.detail.startswith(f"q.txt: line {line}: ")


def test_json_errors():
    with pytest.raises(ParseError) as info:
        parse_query('{\n  "relations": [\n}')
    assert info.value.line == 3
    with pytest.raises(ParseError) as info:
        parse_query(json.dumps({"relations": [{"name": "R", "attrs": "a"}]}))
    assert info.value.field == "relations.0.attrs"
    with pytest.raises(ParseError) as info:
        parse_query(json.dumps({"relations": [{"name": "R", "attrs": ["a"]}], "extra": 1}))
    assert info.value.field == "extra"


def test_invalid_queries():
    with pytest.raises(ParseError):
        parse_query("R(a,b)\nR(b,c)\n")
    with pytest.raises(ParseError):
        parse_query("R(a,a)\n")
    with pytest.raises(ParseError):
        parse_query("R(a,b)\nOUTPUT z;\n")
    with pytest.raises(ParseError):
        parse_query("# nothing here\n")


def test_disconnected_query():
    with pytest.raises(DisconnectedError):
        parse_query("A(x)\nB(y)\n")
    H = parse_query("A(x)\nB(y)\n", require_connected=False)
    assert not H.is_connected()


# ------------------------------
# Cardinalities
# ------------------------------
def test_cards_round_trip(hier_query, hier_cards):
    cp = parse_cards(dump_cards(hier_cards), hier_query)
    assert cp.table == hier_cards.table


@pytest.mark.parametrize("cards, field", [
    ({"cards": [{"rels": ["R9"], "rows": 1}]}, "cards.0.rels"),
    ({"cards": [{"rels": ["R1"], "rows": 1}, {"rels": ["R1"], "rows": 2}]}, "cards.1"),
    ({"cards": [{"rels": ["R1"], "rows": -1}]}, "cards.0.rows"),
    ({"cards": [{"rels": [], "rows": 1}]}, "cards.0.rels"),
    ({"cards": [{"rels": ["R1"], "rows": 1}], "domains": {"zz": 3}}, "domains.zz"),
])
def test_card_errors_name_the_field(hier_query, cards, field):
    with pytest.raises(ParseError) as info:
        parse_cards(json.dumps(cards), hier_query)
    assert info.value.field == field


def test_cards_need_every_base_relation(hier_query):
    with pytest.raises(ParseError):
        parse_cards(json.dumps({"cards": [{"rels": ["R1"], "rows": 5}]}), hier_query)


def test_cards_with_domains_estimate(hier_query):
    text = json.dumps({
        "cards": [{"rels": [f"R{i}"], "rows": 100} for i in range(1, 5)],
        "domains": {"x1": 50},
    })
    cp = parse_cards(text, hier_query, estimate=True)
    assert cp.domains == {hier_query.attribute_id("x1"): 50}
    assert cp.card([0, 1]) == pytest.approx(100 * 100 / 50)
    assert frozenset({0, 1}) in cp.estimated


# ------------------------------
# Plans and trees
# ------------------------------
def test_plan_round_trip(hier_query, hier_bushy_plan):
    assert parse_plan(json.dumps(hier_bushy_plan.to_dict()), hier_query) == hier_bushy_plan
    report = {"cost": 480, "plan": hier_bushy_plan.to_dict(cp=hierarchical_cards(hier_query))}
    assert parse_plan(json.dumps(report), hier_query) == hier_bushy_plan


def test_plan_errors(hier_query):
    with pytest.raises(ParseError):
        parse_plan(json.dumps({"join": [{"scan": "R1"}, {"scan": "R3"}]}), hier_query)
    with pytest.raises(ParseError):
        parse_plan(json.dumps({"scan": "R1", "join": [{"scan": "R1"}, {"scan": "R2"}]}), hier_query)
    with pytest.raises(ParseError):
        parse_plan(json.dumps({"join": [{"scan": "R1"}]}), hier_query)
    with pytest.raises(ParseError):
        parse_plan(json.dumps({"scan": "R7"}), hier_query)


def test_tree_round_trip(hier_query, hier_tree):
    assert parse_tree(json.dumps(hier_tree.to_dict(hier_query)), hier_query) == hier_tree


def test_tree_errors(hier_query):
    twice = {"relation": "R1", "children": [{"relation": "R2"}, {"relation": "R1"}]}
    with pytest.raises(ParseError):
        parse_tree(json.dumps(twice), hier_query)
    with pytest.raises(ParseError):
        parse_tree(json.dumps({"children": []}), hier_query)
