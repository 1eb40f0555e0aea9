"""Read football-data.co.uk league files into validated match records.

One file holds one league-season.  Two directory layouts are recognised:

* ``<data_dir>/<season_id>/<league_id>.csv`` (the site's own ``mmz4281`` tree)
* ``<data_dir>/<league_id>_<season_id>.csv``

Rows that cannot be turned into a ``MatchRecord`` are skipped and counted in
an ``IngestTally`` under a reason key; nothing is dropped silently.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import pandas as pd
from pydantic import ValidationError

from src.main.errors import DataFormatError
from src.main.models import IngestTally, Market, MatchRecord, Outcome

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("Date", "HomeTeam", "AwayTeam", "FTHG", "FTAG")
DATE_FORMATS = ("%d/%m/%y", "%d/%m/%Y")
DEFAULT_BURN_IN = 6

# Maximum-across-bookmakers odds; later seasons renamed the BetBrain columns.
ODDS_COLUMNS: Dict[Market, Tuple[Tuple[str, ...], ...]] = {
    Market.MATCH_1X2: (("BbMxH", "BbMxD", "BbMxA"), ("MaxH", "MaxD", "MaxA")),
    Market.OVER_UNDER_25: (("BbMx>2.5", "BbMx<2.5"), ("Max>2.5", "Max<2.5")),
}


@dataclass
class SeasonIndex:
    """Per-team chronological match lists and prior-match counts.

    ``team_matches`` is keyed by ``(league_id, season_id, team)``;
    ``prior_counts`` maps a match id to the number of earlier same-season
    matches of its home and away team.
    """

    team_matches: Dict[Tuple[str, str, str], List[str]] = field(default_factory=dict)
    prior_counts: Dict[str, Tuple[int, int]] = field(default_factory=dict)


def _parse_date(value: str) -> Optional[date]:
    value = value.strip()
    for fmt in DATE_FORMATS:
        try:
            return datetime.strptime(value, fmt).date()
        except ValueError:
            continue
    return None


def _parse_count(value: str) -> Optional[int]:
    try:
        number = float(value)
    except (TypeError, ValueError):
        return None
    if number < 0 or not number.is_integer():
        return None
    return int(number)


def _parse_odds(row: Dict[str, str], market: Market, tally: IngestTally):
    """Return the first complete odds group for *market*, or ``None``."""
    for columns in ODDS_COLUMNS[market]:
        raw = [row.get(column, "").strip() for column in columns]
        if not all(raw):
            continue
        try:
            odds = tuple(float(value) for value in raw)
        except ValueError:
            tally.invalid_odds += 1
            return None
        if any(not o > 1.0 for o in odds):
            tally.invalid_odds += 1
            return None
        return odds
    return None


def _read_header(raw_bytes: bytes) -> List[str]:
    first_line = raw_bytes.decode("latin-1").splitlines()[0] if raw_bytes.strip() else ""
    return [_clean_column(c) for c in first_line.split(",")]


def _clean_column(name: str) -> str:
    # A UTF-8 byte-order mark decoded as latin-1 becomes three characters.
    return name.strip().replace("\ufeff", "").replace("\u00ef\u00bb\u00bf", "")


def parse_league_csv(
    raw_bytes: bytes,
    league_id: str,
    season_id: str = "",
    tally: Optional[IngestTally] = None,
) -> List[MatchRecord]:
    """Parse one league-season file into ``MatchRecord`` objects in file order.

    Raises ``DataFormatError`` when the header lacks any of
    ``REQUIRED_COLUMNS``.  Row problems are counted in *tally*.
    """
    tally = tally if tally is not None else IngestTally()
    header = _read_header(raw_bytes)
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise DataFormatError(f"{league_id} {season_id}: header lacks {', '.join(missing)}")

    width = len(header)
    malformed: List[List[str]] = []

    def _on_bad_line(fields: List[str]) -> Optional[List[str]]:
        # Trailing empty cells are common in older files; anything else is malformed.
        if all(not f.strip() for f in fields[width:]):
            return fields[:width]
        malformed.append(fields)
        return None

    try:
        frame = pd.read_csv(
            io.BytesIO(raw_bytes),
            dtype=str,
            encoding="latin-1",
            engine="python",
            keep_default_na=False,
            on_bad_lines=_on_bad_line,
        )
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise DataFormatError(f"{league_id} {season_id}: {exc}") from exc
    frame.columns = [_clean_column(str(c)) for c in frame.columns]

    tally.files += 1
    tally.rows_read += len(frame) + len(malformed)
    for _ in malformed:
        tally.skip("malformed_row")

    records: List[MatchRecord] = []
    for sequence, row in enumerate(frame.to_dict("records")):
        record = _row_to_record(row, league_id, season_id, sequence, tally)
        if record is not None:
            records.append(record)
    tally.records += len(records)
    return records


def _row_to_record(
    row: Dict[str, str], league_id: str, season_id: str, sequence: int, tally: IngestTally
) -> Optional[MatchRecord]:
    # Short rows come back padded with NaN.
    row = {k: v.strip() if isinstance(v, str) else "" for k, v in row.items()}
    if not any(row.values()):
        tally.skip("blank_row")
        return None
    match_date = _parse_date(row.get("Date", ""))
    if match_date is None:
        tally.skip("bad_date")
        return None
    home_team, away_team = row.get("HomeTeam", ""), row.get("AwayTeam", "")
    if not home_team or not away_team:
        tally.skip("missing_team")
        return None
    home_goals, away_goals = _parse_count(row.get("FTHG", "")), _parse_count(row.get("FTAG", ""))
    if home_goals is None or away_goals is None:
        tally.skip("missing_goals")
        return None
    outcome = Outcome.from_goals(home_goals, away_goals)
    ftr = row.get("FTR", "")
    if ftr and ftr != outcome.value:
        tally.skip("inconsistent_result")
        return None

    home_shots, away_shots = _parse_count(row.get("HS", "")), _parse_count(row.get("AS", ""))
    if home_shots is None or away_shots is None:
        home_shots = away_shots = None

    try:
        return MatchRecord(
            league_id=league_id,
            season_id=season_id,
            date=match_date,
            home_team=home_team,
            away_team=away_team,
            home_goals=home_goals,
            away_goals=away_goals,
            home_shots=home_shots,
            away_shots=away_shots,
            outcome=outcome,
            odds_1x2=_parse_odds(row, Market.MATCH_1X2, tally),
            odds_ou25=_parse_odds(row, Market.OVER_UNDER_25, tally),
            sequence=sequence,
        )
    except ValidationError as exc:
        logger.debug("Invalid row %d in %s %s: %s", sequence, league_id, season_id, exc)
        tally.skip("invalid_record")
        return None


def _file_identity(path: Path, data_dir: Path) -> Tuple[str, str]:
    if path.parent != data_dir:
        return path.stem, path.parent.name
    if "_" in path.stem:
        league_id, season_id = path.stem.rsplit("_", 1)
        return league_id, season_id
    return path.stem, ""


def load_data_dir(
    data_dir: Union[str, Path], leagues: Union[Sequence[str], str] = "all"
) -> Tuple[List[MatchRecord], IngestTally]:
    """Parse every league-season file under *data_dir*.

    Returns the records of all selected leagues and the merged tally.
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataFormatError(f"data directory not found: {data_dir}")

    tally = IngestTally()
    records: List[MatchRecord] = []
    for path in sorted(data_dir.rglob("*.csv")):
        league_id, season_id = _file_identity(path, data_dir)
        if leagues != "all" and league_id not in leagues:
            continue
        file_tally = IngestTally()
        records.extend(parse_league_csv(path.read_bytes(), league_id, season_id, file_tally))
        if file_tally.skipped_total:
            logger.info("%s: skipped %d rows %s", path, file_tally.skipped_total, file_tally.skipped)
        tally.merge(file_tally)
    logger.info("Loaded %d matches from %d files", len(records), tally.files)
    return records, tally


def chronological(matches: Iterable[MatchRecord]) -> List[MatchRecord]:
    """Order matches by league, date and file position.

    Season ids are not compared before dates: two-digit ids such as ``9900``
    and ``0001`` do not sort chronologically.
    """
    return sorted(matches, key=lambda m: (m.league_id, m.date, m.season_id, m.sequence))


def build_season_index(matches: Iterable[MatchRecord]) -> SeasonIndex:
    """Count, for every match, how many same-season matches each team had before it."""
    index = SeasonIndex()
    for match in chronological(matches):
        home_key = (match.league_id, match.season_id, match.home_team)
        away_key = (match.league_id, match.season_id, match.away_team)
        home_list = index.team_matches.setdefault(home_key, [])
        away_list = index.team_matches.setdefault(away_key, [])
        index.prior_counts[match.match_id] = (len(home_list), len(away_list))
        home_list.append(match.match_id)
        away_list.append(match.match_id)
    return index


def is_burn_in(match: MatchRecord, index: SeasonIndex, threshold: int = DEFAULT_BURN_IN) -> bool:
    """True while either team has played fewer than *threshold* matches this season."""
    try:
        home_prior, away_prior = index.prior_counts[match.match_id]
    except KeyError:
        raise ValueError(f"match {match.match_id} is not in the season index") from None
    return home_prior < threshold or away_prior < threshold


def extract_odds(record: MatchRecord, market: Market):
    """Maximum decimal odds for *market*, or ``None`` when any leg is missing."""
    if market is Market.MATCH_1X2:
        return record.odds_1x2
    return record.odds_ou25


def summarize_ingest(
    matches: Sequence[MatchRecord], index: SeasonIndex, threshold: int = DEFAULT_BURN_IN
) -> Dict[str, Dict[str, int]]:
    """Per-league match counts: all, with shot data, and with shot data past burn-in."""
    summary: Dict[str, Dict[str, int]] = {}
    for match in matches:
        row = summary.setdefault(
            match.league_id, {"matches": 0, "shot_matches": 0, "shot_matches_excl_burn_in": 0}
        )
        row["matches"] += 1
        if match.has_shots:
            row["shot_matches"] += 1
            if not is_burn_in(match, index, threshold):
                row["shot_matches_excl_burn_in"] += 1
    totals = {"matches": 0, "shot_matches": 0, "shot_matches_excl_burn_in": 0}
    for row in summary.values():
        for key in totals:
            totals[key] += row[key]
    summary = dict(sorted(summary.items()))
    summary["total"] = totals
    return summary
