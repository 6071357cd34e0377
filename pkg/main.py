import logging
import sys
from typing import Optional, Sequence

from app.cli import MetaDecompCLI
from app.config import get_settings
from app.errors import MetaDecompError

# ------------------------------
# Route Imports
# ------------------------------
from app.routes import planning, structure, workload

# Initialize CLI app
app = MetaDecompCLI()

# ------------------------------
# Register all routers
# ------------------------------
app.include_router(structure.router)
app.include_router(planning.router)
app.include_router(workload.router)


# ------------------------------
# Logging
# ------------------------------
def configure_logging() -> None:
    """Diagnostics go to stderr; stdout carries the report only."""
    try:
        level_name = get_settings().log_level
    except MetaDecompError:
        # run() reports the bad setting
        level_name = "WARNING"
    level = getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def run(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    return app.run(argv)


if __name__ == "__main__":
    sys.exit(run())
