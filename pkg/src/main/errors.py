"""Exception hierarchy for ShotQuest.

The CLI maps the two branches onto exit codes: ``ConfigError`` → 1 and
``DataError`` → 2.  Contract violations on the pure numerical helpers raise
plain ``ValueError``.
"""

from __future__ import annotations


class ShotQuestError(Exception):
    """Base exception for backtest failures."""
    pass


class ConfigError(ShotQuestError):
    """Invalid or unreadable run configuration."""
    pass


class DataError(ShotQuestError):
    """Problems with the input data (exit code 2)."""
    pass


class DataFormatError(DataError):
    """A source file cannot be read as a football-data table."""
    pass


class InsufficientDataError(DataError):
    """Too little data for a fit or an average to be defined."""
    pass


class EmptyReportError(DataError):
    """A backtest produced no forecasts at all."""
    pass


class UnratedTeamError(ShotQuestError):
    """The shot model has no rating for a team."""

    def __init__(self, team: str, league_id: str):
        super().__init__(f"unrated team {team!r} in league {league_id!r}")
        self.team = team
        self.league_id = league_id
