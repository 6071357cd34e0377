import logging
from pathlib import Path
from typing import Dict, List, Mapping, Tuple

import numpy as np

from app.errors import CapExceededError, ParseError, SchemaError
from app.models.hypergraph import Hypergraph

logger = logging.getLogger(__name__)


class MicroDatabase:
    """
    Tiny integer tables, one per relation. Columns follow the relation's
    attribute ids in increasing order.
    """

    def __init__(self, H: Hypergraph, tables: Mapping[int, np.ndarray], max_rows: int = 10_000):
        self.H = H
        self.tables: Dict[int, np.ndarray] = {}
        for r in H.relations:
            if r not in tables:
                raise SchemaError(f"no table for relation {H.relation_names[r]}")
            data = np.asarray(tables[r], dtype=np.int64)
            if data.ndim != 2 or data.shape[1] != len(H.edges[r]):
                raise SchemaError(f"table {H.relation_names[r]} does not match arity {len(H.edges[r])}")
            if data.shape[0] > max_rows:
                raise CapExceededError(f"table {H.relation_names[r]} has {data.shape[0]} rows, cap db_rows={max_rows}")
            self.tables[r] = data

    def columns(self, r: int) -> Tuple[int, ...]:
        return tuple(sorted(self.H.edges[r]))

    def rows(self, r: int) -> List[Tuple[int, ...]]:
        return [tuple(int(v) for v in row) for row in self.tables[r]]

    @property
    def max_rows(self) -> int:
        """N: the largest base table."""
        return max(len(t) for t in self.tables.values())

    def sizes(self) -> Dict[str, int]:
        return {self.H.relation_names[r]: len(t) for r, t in self.tables.items()}

    # ------------------------------
    # CSV
    # ------------------------------
    @classmethod
    def from_csv_dir(cls, H: Hypergraph, path, max_rows: int = 10_000) -> "MicroDatabase":
        """Load <relation>.csv files whose header row names the attributes."""
        path = Path(path)
        tables = {}
        for r in H.relations:
            name = H.relation_names[r]
            file = path / f"{name}.csv"
            if not file.exists():
                raise SchemaError(f"missing table file {file}")
            with file.open() as fh:
                header = [h.strip() for h in fh.readline().strip().split(",")]
            expected = set(H.attr_labels(H.edges[r]))
            if set(header) != expected or len(header) != len(expected):
                raise SchemaError(f"{file}: header {header} does not match attributes {sorted(expected)}")
            try:
                data = np.loadtxt(file, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
            except ValueError as e:
                raise ParseError(str(e), source=str(file))
            if data.size == 0:
                data = np.zeros((0, len(header)), dtype=np.int64)
            order = [header.index(a) for a in H.attr_labels(H.edges[r])]
            tables[r] = data[:, order]
        logger.info("loaded %d tables from %s", len(tables), path)
        return cls(H, tables, max_rows)

    def to_csv_dir(self, path) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        for r, data in self.tables.items():
            header = ",".join(self.H.attr_labels(self.H.edges[r]))
            np.savetxt(path / f"{self.H.relation_names[r]}.csv", data, fmt="%d",
                       delimiter=",", header=header, comments="")
