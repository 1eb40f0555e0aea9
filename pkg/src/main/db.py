"""SQLite plumbing for the ShotQuest fit cache.

Connections come from a small pool; the tables are created from
``db_schema.sql`` the first time a connection is handed out.  ``registry.py``
holds the cache logic.  Tests and the ``--cache-db`` flag repoint the cache with
``configure``.
"""

from __future__ import annotations

import logging
import sqlite3
from contextlib import contextmanager
from pathlib import Path
from queue import Queue
from threading import Lock
from typing import Iterator

from src.main.settings import CACHE_DB

logger = logging.getLogger(__name__)

SCHEMA_FILE = Path(__file__).with_name("db_schema.sql")
POOL_SIZE = 4

DB_PATH = CACHE_DB
_pool: Queue | None = None
_lock = Lock()


def _connect() -> sqlite3.Connection:
    return sqlite3.connect(DB_PATH, timeout=5, check_same_thread=False)


def _drain() -> None:
    global _pool
    if _pool is not None:
        while not _pool.empty():
            _pool.get_nowait().close()
    _pool = None


def configure(path: str | Path) -> None:
    """Use *path* for the cache from now on; pooled connections are closed."""
    global DB_PATH
    with _lock:
        _drain()
        DB_PATH = str(path)


def init_schema() -> None:
    """Create the cache tables if they do not exist."""
    if not SCHEMA_FILE.exists():
        raise FileNotFoundError(f"Schema file not found: {SCHEMA_FILE}")
    Path(DB_PATH).parent.mkdir(parents=True, exist_ok=True)
    conn = _connect()
    try:
        conn.executescript(SCHEMA_FILE.read_text(encoding="utf-8"))
        conn.commit()
    finally:
        conn.close()
    logger.debug("Fit cache ready at %s", DB_PATH)


def _open_pool() -> Queue:
    init_schema()
    pool: Queue = Queue(maxsize=POOL_SIZE)
    for _ in range(POOL_SIZE):
        pool.put(_connect())
    return pool


@contextmanager
def get_connection() -> Iterator[sqlite3.Connection]:
    """Borrow a pooled connection::

        with get_connection() as conn:
            conn.execute(...)
    """
    global _pool
    if _pool is None:
        with _lock:
            if _pool is None:
                _pool = _open_pool()
    pool = _pool
    conn = pool.get()
    try:
        yield conn
    finally:
        pool.put(conn)
