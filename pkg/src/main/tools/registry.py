"""High-level fit cache API.

The low-level SQLite connection and schema creation lives in ``src/main/db``.
This module offers the helpers the backtest needs:

* ``get_shot_fits`` / ``put_shot_fits`` – per-date shot-model fits keyed by
  ``(league, as-of date, half life, data hash)``.
* ``save_gap_state`` / ``load_gap_state`` – GAP parameters and ratings after
  a league's fitting seasons.
* ``list_fits`` – what the cache holds, for the ``report`` command and the
  servers.

A payload that no longer decodes is treated as absent: it is logged, deleted
and the caller refits.
"""

from __future__ import annotations

import hashlib
import logging
import sqlite3
from datetime import date, datetime, timezone
from typing import Dict, Iterable, List, Optional, Sequence

from src.main.db import get_connection
from src.main.models import MatchRecord
from src.main.tools.gap_ratings import GapState
from src.main.tools.shot_model import ShotModelParams

logger = logging.getLogger(__name__)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds").replace("+00:00", "Z")


def league_data_hash(matches: Iterable[MatchRecord]) -> str:
    """Fingerprint of the match data a league's fits depend on."""
    digest = hashlib.sha256()
    for m in matches:
        digest.update(
            f"{m.league_id}|{m.season_id}|{m.date.isoformat()}|{m.home_team}|{m.away_team}|"
            f"{m.home_goals}|{m.away_goals}|{m.home_shots}|{m.away_shots}\n".encode("utf-8")
        )
    return digest.hexdigest()[:16]


def get_shot_fit(
    league_id: str, as_of: date, half_life: float, data_hash: str
) -> Optional[ShotModelParams]:
    with get_connection() as conn:
        row = conn.execute(
            "SELECT payload FROM shot_fits WHERE league_id = ? AND as_of = ? "
            "AND half_life = ? AND data_hash = ?",
            (league_id, as_of.isoformat(), half_life, data_hash),
        ).fetchone()
    if row is None:
        return None
    try:
        return ShotModelParams.from_json(row[0])
    except (ValueError, KeyError, TypeError) as exc:
        logger.warning("Corrupt cached fit %s @ %s (H=%s): %s", league_id, as_of, half_life, exc)
        _drop_shot_fits(league_id, half_life, data_hash, [as_of])
        return None


def get_shot_fits(league_id: str, half_life: float, data_hash: str) -> Dict[date, ShotModelParams]:
    """All cached fits of one league and half life, keyed by as-of date."""
    with get_connection() as conn:
        rows = conn.execute(
            "SELECT as_of, payload FROM shot_fits WHERE league_id = ? AND half_life = ? AND data_hash = ?",
            (league_id, half_life, data_hash),
        ).fetchall()
    fits: Dict[date, ShotModelParams] = {}
    corrupt: List[date] = []
    for as_of, payload in rows:
        try:
            fits[date.fromisoformat(as_of)] = ShotModelParams.from_json(payload)
        except (ValueError, KeyError, TypeError) as exc:
            logger.warning("Corrupt cached fit %s @ %s (H=%s): %s", league_id, as_of, half_life, exc)
            corrupt.append(date.fromisoformat(as_of))
    if corrupt:
        _drop_shot_fits(league_id, half_life, data_hash, corrupt)
    return fits


def _drop_shot_fits(league_id: str, half_life: float, data_hash: str, dates: Sequence[date]) -> None:
    with get_connection() as conn:
        conn.executemany(
            "DELETE FROM shot_fits WHERE league_id = ? AND as_of = ? AND half_life = ? AND data_hash = ?",
            [(league_id, d.isoformat(), half_life, data_hash) for d in dates],
        )
        conn.commit()


def put_shot_fits(fits: Sequence[ShotModelParams], data_hash: str) -> int:
    """Store *fits*; returns how many rows were written."""
    if not fits:
        return 0
    added = _now()
    rows = [
        (p.league_id, p.as_of_date.isoformat(), p.half_life, data_hash, p.to_json(), added)
        for p in fits
    ]
    try:
        with get_connection() as conn:
            conn.executemany(
                "INSERT OR REPLACE INTO shot_fits (league_id, as_of, half_life, data_hash, payload, added) "
                "VALUES (?, ?, ?, ?, ?, ?)",
                rows,
            )
            conn.commit()
    except sqlite3.Error as exc:
        logger.warning("Could not cache %d shot fits: %s", len(rows), exc)
        return 0
    return len(rows)


def put_shot_fit(params: ShotModelParams, data_hash: str) -> bool:
    return put_shot_fits([params], data_hash) == 1


def save_gap_state(state: GapState, data_hash: str) -> bool:
    try:
        with get_connection() as conn:
            conn.execute(
                "INSERT OR REPLACE INTO gap_states (league_id, data_hash, payload, added) VALUES (?, ?, ?, ?)",
                (state.league_id, data_hash, state.to_json(), _now()),
            )
            conn.commit()
            return True
    except sqlite3.Error as exc:
        logger.warning("Could not save GAP state for %s: %s", state.league_id, exc)
        return False


def load_gap_state(league_id: str, data_hash: str) -> Optional[GapState]:
    with get_connection() as conn:
        row = conn.execute(
            "SELECT payload FROM gap_states WHERE league_id = ? AND data_hash = ?",
            (league_id, data_hash),
        ).fetchone()
    if row is None:
        return None
    try:
        return GapState.from_json(row[0])
    except (ValueError, KeyError, TypeError) as exc:
        logger.warning("Corrupt GAP state for %s: %s", league_id, exc)
        with get_connection() as conn:
            conn.execute(
                "DELETE FROM gap_states WHERE league_id = ? AND data_hash = ?", (league_id, data_hash)
            )
            conn.commit()
        return None


def list_fits() -> List[Dict[str, object]]:
    """One row per cached ``(league, half life)`` with fit counts and date range."""
    with get_connection() as conn:
        rows = conn.execute(
            "SELECT league_id, half_life, COUNT(*), MIN(as_of), MAX(as_of) FROM shot_fits "
            "GROUP BY league_id, half_life ORDER BY league_id, half_life"
        ).fetchall()
        gap_leagues = {r[0] for r in conn.execute("SELECT league_id FROM gap_states").fetchall()}
    return [
        {
            "league_id": league_id,
            "half_life": half_life,
            "fits": count,
            "first_as_of": first,
            "last_as_of": last,
            "gap_state": league_id in gap_leagues,
        }
        for league_id, half_life, count, first, last in rows
    ]
