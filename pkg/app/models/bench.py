from sqlalchemy import Column, Integer, Float, String, DateTime, func

from app.database.session import Base
from app.schemas.bench import BenchRow


class BenchRun(Base):
    __tablename__ = "bench_runs"

    id = Column(Integer, primary_key=True, index=True)
    instance = Column(String(100), index=True)
    seed = Column(Integer)
    n = Column(Integer)
    meta_opt_cost = Column(Float)
    meta_base_cost = Column(Float)
    global_opt_cost = Column(Float, nullable=True)
    ratio = Column(Float, nullable=True)
    width1_count = Column(Integer, nullable=True)
    true_cost = Column(Float, nullable=True)
    true_cost_sigma0 = Column(Float, nullable=True)
    regression = Column(Float, nullable=True)
    enum_ops = Column(Integer, nullable=True)
    gyo_ops = Column(Integer, nullable=True)
    dp_cells = Column(Integer)
    version = Column(String(20))
    created_at = Column(DateTime, server_default=func.now())

    @classmethod
    def from_row(cls, row: BenchRow, version: str) -> "BenchRun":
        return cls(version=version, **row.model_dump())
