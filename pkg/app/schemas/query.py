import json
import re
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, ValidationError

from app.errors import InvalidArgumentError, ParseError
from app.models.hypergraph import Hypergraph


class RelationIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    attrs: List[str]


class QueryIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    relations: List[RelationIn]
    output: List[str] = []

    def to_hypergraph(self, require_connected: bool = True) -> Hypergraph:
        return Hypergraph.from_relations([(r.name, r.attrs) for r in self.relations], self.output,
                                         require_connected=require_connected)

    @classmethod
    def from_hypergraph(cls, H: Hypergraph) -> "QueryIn":
        return cls(
            relations=[RelationIn(name=H.relation_names[r], attrs=H.attr_labels(H.edges[r])) for r in H.relations],
            output=H.attr_labels(H.output_attrs),
        )


def field_path(error: ValidationError) -> str:
    """Dotted location of the first pydantic error, e.g. relations.2.attrs."""
    return ".".join(str(part) for part in error.errors()[0]["loc"])


def load_json(text: str, source: Optional[str] = None):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, source=source, line=e.lineno)


# ------------------------------
# Text form: R1(x1,x2) per line, optional "OUTPUT x1,x2;" footer
# ------------------------------
RELATION_LINE = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*\(\s*([^()]*)\)\s*;?\s*$")
OUTPUT_LINE = re.compile(r"^\s*OUTPUT\b\s*([^;]*);?\s*$", re.IGNORECASE)


def _names(text: str) -> List[str]:
    return [name.strip() for name in text.split(",") if name.strip()]


def parse_query_text(text: str, source: Optional[str] = None) -> QueryIn:
    relations, output, footer = [], [], None
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        if not line.strip():
            continue
        if footer is not None:
            raise ParseError("nothing may follow the OUTPUT line", source=source, line=number)
        match = OUTPUT_LINE.match(line)
        if match:
            output = _names(match.group(1))
            footer = number
            continue
        match = RELATION_LINE.match(line)
        if not match:
            raise ParseError(f"expected R(a,b,...), got '{line.strip()}'", source=source, line=number)
        attrs = _names(match.group(2))
        if not attrs:
            raise ParseError(f"relation {match.group(1)} has no attributes", source=source, line=number)
        relations.append(RelationIn(name=match.group(1), attrs=attrs))
    if not relations:
        raise ParseError("no relations", source=source)
    return QueryIn(relations=relations, output=output)


def parse_query(text: str, source: Optional[str] = None, require_connected: bool = True) -> Hypergraph:
    """JSON or text query form; the first non-blank character decides. Disconnected queries are rejected."""
    if text.lstrip().startswith("{"):
        try:
            query = QueryIn.model_validate(load_json(text, source))
        except ValidationError as e:
            raise ParseError(e.errors()[0]["msg"], source=source, field=field_path(e))
    else:
        query = parse_query_text(text, source)
    try:
        return query.to_hypergraph(require_connected)
    except InvalidArgumentError as e:
        raise ParseError(e.detail, source=source)


def dump_query(H: Hypergraph) -> str:
    return json.dumps(QueryIn.from_hypergraph(H).model_dump(), indent=2)
