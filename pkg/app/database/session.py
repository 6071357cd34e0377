import os

from dotenv import load_dotenv
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker, DeclarativeBase
from sqlalchemy.pool import StaticPool

# Load environment variables
load_dotenv()


# ✅ Modern Declarative Base (SQLAlchemy 2.0+)
class Base(DeclarativeBase):
    pass


# ✅ Database URL (bench rows and SQL cross-checks; in-memory SQLite by default)
DATABASE_URL = os.getenv("METADECOMP_DATABASE_URL", "sqlite://")


def make_engine(url: str = DATABASE_URL):
    """In-memory SQLite needs a single shared connection to keep its tables."""
    if url in ("sqlite://", "sqlite:///:memory:"):
        return create_engine(url, connect_args={"check_same_thread": False}, poolclass=StaticPool)
    return create_engine(url, pool_pre_ping=True)


# ✅ Create Engine
engine = make_engine()

# ✅ Create SessionLocal
SessionLocal = sessionmaker(bind=engine, autocommit=False, autoflush=False)


def session_factory(url: str):
    """Sessions bound to another database, e.g. `bench --store URL`."""
    if url == DATABASE_URL:
        return SessionLocal
    return sessionmaker(bind=make_engine(url), autocommit=False, autoflush=False)


# ✅ Dependency for general use
def get_db(factory=SessionLocal):
    db = factory()
    try:
        yield db
    finally:
        db.close()
