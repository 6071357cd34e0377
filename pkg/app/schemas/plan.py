from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.errors import InvalidArgumentError, ParseError
from app.models.hypergraph import Hypergraph
from app.models.jointree import JoinTree, TreeNode
from app.models.plan import Join, PlanNode, QueryPlan, Scan
from app.schemas.query import field_path, load_json


class PlanIn(BaseModel):
    """{"scan": "R1"} or {"join": [left, right]}; report keys such as width are ignored."""
    model_config = ConfigDict(extra="ignore")

    scan: Optional[str] = None
    join: Optional[List["PlanIn"]] = Field(default=None, min_length=2, max_length=2)

    @model_validator(mode="after")
    def one_kind(self):
        if (self.scan is None) == (self.join is None):
            raise ValueError("a plan node needs exactly one of scan or join")
        return self

    def to_node(self, H: Hypergraph) -> PlanNode:
        if self.scan is not None:
            return Scan(H.relation_id(self.scan))
        left, right = self.join
        return Join(left.to_node(H), right.to_node(H))


class TreeIn(BaseModel):
    model_config = ConfigDict(extra="ignore")

    relation: str
    children: List["TreeIn"] = []

    def collect(self, H: Hypergraph, parent: dict, seen: set, up: Optional[int] = None) -> int:
        r = H.relation_id(self.relation)
        if r in seen:
            raise InvalidArgumentError(f"relation {self.relation} appears twice")
        seen.add(r)
        if up is not None:
            parent[r] = up
        for child in self.children:
            child.collect(H, parent, seen, r)
        return r


def _unwrap(data, key: str):
    """Accept either the bare object or a report that nests it under key."""
    if isinstance(data, dict) and key in data and isinstance(data[key], dict):
        return data[key]
    return data


def parse_plan(text: str, H: Hypergraph, source: Optional[str] = None) -> QueryPlan:
    try:
        plan = PlanIn.model_validate(_unwrap(load_json(text, source), "plan"))
    except ValidationError as e:
        raise ParseError(e.errors()[0]["msg"], source=source, field=field_path(e))
    try:
        return QueryPlan(plan.to_node(H), H)
    except InvalidArgumentError as e:
        raise ParseError(e.detail, source=source)


def parse_tree(text: str, H: Hypergraph, source: Optional[str] = None) -> JoinTree:
    try:
        tree = TreeIn.model_validate(_unwrap(load_json(text, source), "join_tree"))
    except ValidationError as e:
        raise ParseError(e.errors()[0]["msg"], source=source, field=field_path(e))
    parent: dict = {}
    try:
        root = tree.collect(H, parent, set())
    except InvalidArgumentError as e:
        raise ParseError(e.detail, source=source)
    nodes = {r: TreeNode(r, H.edges[r]) for r in set(parent) | {root}}
    return JoinTree(nodes, root, parent)
