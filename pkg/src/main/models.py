"""Domain records shared across the backtest.

``MatchRecord`` is the validated form of one football-data row; everything
downstream (GAP ratings, the shot model, the outcome models, the betting
simulation) reads matches through it.
"""

from __future__ import annotations

from collections import Counter
from datetime import date
from enum import Enum
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, model_validator


class Outcome(str, Enum):
    """Full-time result, in the column order used by forecast vectors."""

    HOME_WIN = "H"
    DRAW = "D"
    AWAY_WIN = "A"

    @classmethod
    def from_goals(cls, home_goals: int, away_goals: int) -> "Outcome":
        if home_goals > away_goals:
            return cls.HOME_WIN
        if home_goals < away_goals:
            return cls.AWAY_WIN
        return cls.DRAW

    @property
    def index(self) -> int:
        """Position in a ``(p_home, p_draw, p_away)`` vector."""
        return _OUTCOME_INDEX[self]


_OUTCOME_INDEX = {Outcome.HOME_WIN: 0, Outcome.DRAW: 1, Outcome.AWAY_WIN: 2}


class Market(str, Enum):
    MATCH_1X2 = "1x2"
    OVER_UNDER_25 = "ou25"


class MatchRecord(BaseModel):
    """One parsed match.

    ``sequence`` is the row position inside the source file and breaks ties
    between matches played on the same date.
    """

    model_config = ConfigDict(frozen=True)

    league_id: str
    season_id: str
    date: date
    home_team: str
    away_team: str
    home_goals: NonNegativeInt
    away_goals: NonNegativeInt
    home_shots: Optional[NonNegativeInt] = None
    away_shots: Optional[NonNegativeInt] = None
    outcome: Outcome
    odds_1x2: Optional[Tuple[float, float, float]] = None
    odds_ou25: Optional[Tuple[float, float]] = None
    sequence: int = 0

    @model_validator(mode="after")
    def _check_invariants(self) -> "MatchRecord":
        if Outcome.from_goals(self.home_goals, self.away_goals) is not self.outcome:
            raise ValueError("outcome does not match goals")
        for odds in (self.odds_1x2, self.odds_ou25):
            if odds is not None and any(o <= 1.0 for o in odds):
                raise ValueError("decimal odds must exceed 1.0")
        return self

    @property
    def match_id(self) -> str:
        return f"{self.league_id}:{self.season_id}:{self.sequence}"

    @property
    def has_shots(self) -> bool:
        return self.home_shots is not None and self.away_shots is not None

    @property
    def shot_data_valid(self) -> bool:
        """Shots present and no side scored more goals than it had shots."""
        return (
            self.has_shots
            and self.home_goals <= self.home_shots
            and self.away_goals <= self.away_shots
        )

    @property
    def total_goals(self) -> int:
        return self.home_goals + self.away_goals


class IngestTally(BaseModel):
    """Diagnostics collected while parsing source files."""

    files: int = 0
    rows_read: int = 0
    records: int = 0
    skipped: Dict[str, int] = Field(default_factory=dict)
    invalid_odds: int = 0

    def skip(self, reason: str) -> None:
        self.skipped[reason] = self.skipped.get(reason, 0) + 1

    @property
    def skipped_total(self) -> int:
        return sum(self.skipped.values())

    def merge(self, other: "IngestTally") -> None:
        self.files += other.files
        self.rows_read += other.rows_read
        self.records += other.records
        self.invalid_odds += other.invalid_odds
        self.skipped = dict(Counter(self.skipped) + Counter(other.skipped))
