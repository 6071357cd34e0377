import os
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError

from app.errors import CapExceededError, InvalidArgumentError

# Load environment variables
load_dotenv()

VERSION = "0.1.0"


class Caps(BaseModel):
    """Size caps. Every brute-force path checks its cap before starting."""
    oracle_trees: int = 8
    global_dp: int = 14
    true_cards: int = 10
    db_rows: int = 10_000
    width_cover: int = 4
    exact_fanout: int = 12
    rebranch: int = 12
    enumerate_limit: int = 1_000_000
    gyo_baseline: int = 7

    def require(self, name: str, value: int, what: str) -> None:
        limit = getattr(self, name)
        if value > limit:
            raise CapExceededError(f"{what}: {value} exceeds cap {name}={limit}")


class Settings(BaseModel):
    caps: Caps = Caps()
    log_level: str = "WARNING"
    database_url: str = "sqlite://"
    sigma: float = 10.0


def parse_caps(text: Optional[str]) -> Caps:
    """
    Parse METADECOMP_CAPS, e.g. "oracle_trees=6,global_dp=12".
    """
    if not text or not text.strip():
        return Caps()
    values = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or key not in Caps.model_fields:
            raise InvalidArgumentError(f"unknown cap entry '{item}'")
        values[key] = raw.strip()
    try:
        return Caps(**values)
    except ValidationError as e:
        raise InvalidArgumentError(f"bad METADECOMP_CAPS value: {e.errors()[0]['msg']}")


def get_settings() -> Settings:
    try:
        sigma = float(os.getenv("METADECOMP_SIGMA", "10"))
    except ValueError:
        raise InvalidArgumentError("METADECOMP_SIGMA must be a number")
    return Settings(
        caps=parse_caps(os.getenv("METADECOMP_CAPS")),
        log_level=os.getenv("METADECOMP_LOG_LEVEL", "WARNING").upper(),
        database_url=os.getenv("METADECOMP_DATABASE_URL", "sqlite://"),
        sigma=sigma,
    )
