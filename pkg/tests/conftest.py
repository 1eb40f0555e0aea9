import pytest

from src.main import db


@pytest.fixture(autouse=True)
def cache_db(tmp_path, monkeypatch):
    """Every test gets its own fit cache and no data directory from the environment."""
    monkeypatch.delenv("SHOTQUEST_DATA_DIR", raising=False)
    path = tmp_path / "fits.db"
    db.configure(path)
    yield path
    db.configure(path)
