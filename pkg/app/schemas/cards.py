import json
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from app.errors import InvalidArgumentError, MetaDecompError, ParseError
from app.models.cards import CardinalityProvider
from app.models.hypergraph import Hypergraph
from app.schemas.query import field_path, load_json


class CardEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rels: List[str] = Field(min_length=1)
    rows: float = Field(ge=0)


class CardsIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cards: List[CardEntry]
    domains: Dict[str, int] = {}


def parse_cards(text: str, H: Hypergraph, source: Optional[str] = None, estimate: bool = False) -> CardinalityProvider:
    try:
        data = CardsIn.model_validate(load_json(text, source))
    except ValidationError as e:
        raise ParseError(e.errors()[0]["msg"], source=source, field=field_path(e))
    table = {}
    for i, entry in enumerate(data.cards):
        try:
            rels = frozenset(H.relation_id(name) for name in entry.rels)
        except InvalidArgumentError as e:
            raise ParseError(e.detail, source=source, field=f"cards.{i}.rels")
        if rels in table:
            raise ParseError(f"duplicate entry for {sorted(entry.rels)}", source=source, field=f"cards.{i}")
        table[rels] = entry.rows
    domains = {}
    for name, size in data.domains.items():
        try:
            domains[H.attribute_id(name)] = size
        except InvalidArgumentError as e:
            raise ParseError(e.detail, source=source, field=f"domains.{name}")
    try:
        return CardinalityProvider(H, table, domains, estimate=estimate)
    except MetaDecompError as e:
        raise ParseError(e.detail, source=source)


def dump_cards(cp: CardinalityProvider) -> str:
    return json.dumps(cp.to_dict(), indent=2)
