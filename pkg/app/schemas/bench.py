from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class BenchRow(BaseModel):
    """One bench CSV row; field aliases are the CSV column names."""
    model_config = ConfigDict(populate_by_name=True)

    instance: str
    seed: int
    n: int
    meta_opt_cost: float = Field(alias="metaOptCost")
    meta_base_cost: float = Field(alias="metaBaseCost")
    global_opt_cost: Optional[float] = Field(default=None, alias="globalOptCost")
    ratio: Optional[float] = None
    width1_count: Optional[int] = Field(default=None, alias="width1Count")
    true_cost: Optional[float] = Field(default=None, alias="trueCost")
    true_cost_sigma0: Optional[float] = Field(default=None, alias="trueCostSigma0")
    regression: Optional[float] = None
    enum_ops: Optional[int] = Field(default=None, alias="enumOps")
    gyo_ops: Optional[int] = Field(default=None, alias="gyoOps")
    dp_cells: int = Field(default=0, alias="dpCells")

    @classmethod
    def columns(cls):
        return [field.alias or name for name, field in cls.model_fields.items()]
