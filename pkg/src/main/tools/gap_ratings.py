"""Generalised Attacking Performance (GAP) ratings for shot counts.

Every team carries four ratings: home attack, home defence, away attack and
away defence.  A side's predicted shots are the mean of its attacking rating
and the opponent's defensive rating; after the match the ratings move towards
the observed counts by ``lambda * phi`` (same venue) or ``lambda * (1 - phi)``
(other venue), clamped at zero.

New teams start with every rating equal to the league's running mean of shots
per team per match, or ``init`` before any match has been seen.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from itertools import groupby
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from src.main.errors import InsufficientDataError
from src.main.models import MatchRecord

logger = logging.getLogger(__name__)

DEFAULT_INIT = 12.0
MIN_FIT_MATCHES = 100
SIMPLEX_START = (0.1, 0.5, 0.5)
SIMPLEX_XATOL = 1e-4
SIMPLEX_MAXITER = 500


@dataclass(frozen=True)
class GapTeamRatings:
    home_attack: float
    home_defence: float
    away_attack: float
    away_defence: float

    @classmethod
    def uniform(cls, value: float) -> "GapTeamRatings":
        return cls(value, value, value, value)

    def as_list(self) -> List[float]:
        return [self.home_attack, self.home_defence, self.away_attack, self.away_defence]


@dataclass(frozen=True)
class GapParams:
    """``lam`` is the overall step size; ``phi1``/``phi2`` split it between venues."""

    lam: float
    phi1: float
    phi2: float
    converged: bool = True

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not (0 < self.phi1 < 1 and 0 < self.phi2 < 1):
            raise ValueError("phi1 and phi2 must lie in (0, 1)")


DEFAULT_PARAMS = GapParams(0.1, 0.7, 0.7)


@dataclass
class GapState:
    league_id: str
    params: GapParams
    ratings: Dict[str, GapTeamRatings] = field(default_factory=dict)
    init: float = DEFAULT_INIT
    shot_total: float = 0.0
    team_matches: int = 0

    def initial_rating(self) -> float:
        if self.team_matches == 0:
            return self.init
        return self.shot_total / self.team_matches

    def ratings_for(self, team: str) -> GapTeamRatings:
        rating = self.ratings.get(team)
        if rating is None:
            return GapTeamRatings.uniform(self.initial_rating())
        return rating

    def copy(self) -> "GapState":
        return replace(self, ratings=dict(self.ratings))

    def to_json(self) -> str:
        return json.dumps(
            {
                "league_id": self.league_id,
                "params": asdict(self.params),
                "init": self.init,
                "shot_total": self.shot_total,
                "team_matches": self.team_matches,
                "ratings": {team: r.as_list() for team, r in sorted(self.ratings.items())},
            }
        )

    @classmethod
    def from_json(cls, payload: str) -> "GapState":
        data = json.loads(payload)
        return cls(
            league_id=data["league_id"],
            params=GapParams(**data["params"]),
            ratings={team: GapTeamRatings(*values) for team, values in data["ratings"].items()},
            init=float(data["init"]),
            shot_total=float(data["shot_total"]),
            team_matches=int(data["team_matches"]),
        )


def predict_shots(state: GapState, home_team: str, away_team: str) -> Tuple[float, float]:
    """Predicted shots ``(home, away)`` from the current ratings."""
    home = state.ratings_for(home_team)
    away = state.ratings_for(away_team)
    return (home.home_attack + away.away_defence) / 2, (away.away_attack + home.home_defence) / 2


def _updated(
    home: GapTeamRatings,
    away: GapTeamRatings,
    home_shots: float,
    away_shots: float,
    params: GapParams,
) -> Tuple[GapTeamRatings, GapTeamRatings]:
    # Both innovations use pre-match ratings only.
    home_error = home_shots - (home.home_attack + away.away_defence) / 2
    away_error = away_shots - (away.away_attack + home.home_defence) / 2
    lam, phi1, phi2 = params.lam, params.phi1, params.phi2
    new_home = GapTeamRatings(
        home_attack=max(home.home_attack + lam * phi1 * home_error, 0.0),
        home_defence=max(home.home_defence + lam * phi1 * away_error, 0.0),
        away_attack=max(home.away_attack + lam * (1 - phi1) * home_error, 0.0),
        away_defence=max(home.away_defence + lam * (1 - phi1) * away_error, 0.0),
    )
    new_away = GapTeamRatings(
        home_attack=max(away.home_attack + lam * (1 - phi2) * away_error, 0.0),
        home_defence=max(away.home_defence + lam * (1 - phi2) * home_error, 0.0),
        away_attack=max(away.away_attack + lam * phi2 * away_error, 0.0),
        away_defence=max(away.away_defence + lam * phi2 * home_error, 0.0),
    )
    return new_home, new_away


def _advance(state: GapState, match: MatchRecord) -> None:
    """Apply *match* to *state* in place."""
    if not match.has_shots:
        return
    home, away = _updated(
        state.ratings_for(match.home_team),
        state.ratings_for(match.away_team),
        match.home_shots,
        match.away_shots,
        state.params,
    )
    state.ratings[match.home_team] = home
    state.ratings[match.away_team] = away
    state.shot_total += match.home_shots + match.away_shots
    state.team_matches += 2


def update_ratings(state: GapState, match: MatchRecord) -> GapState:
    """Return a new state with *match* applied; unchanged when shots are missing."""
    if not match.has_shots:
        return state
    new_state = state.copy()
    _advance(new_state, match)
    return new_state


def replay(
    matches: Iterable[MatchRecord],
    params: GapParams,
    init: float = DEFAULT_INIT,
    league_id: str = "",
    state: GapState | None = None,
) -> Tuple[GapState, List[Tuple[MatchRecord, float, float]]]:
    """Run the predict-then-update pass over chronologically ordered *matches*.

    All matches sharing a date are predicted from the state at the start of
    that date and then applied in order.  Returns the final state and one
    ``(match, home_prediction, away_prediction)`` per match.
    """
    state = state.copy() if state is not None else GapState(league_id, params, init=init)
    predictions: List[Tuple[MatchRecord, float, float]] = []
    for _, same_day in groupby(matches, key=lambda m: m.date):
        same_day = list(same_day)
        for match in same_day:
            predictions.append((match, *predict_shots(state, match.home_team, match.away_team)))
        for match in same_day:
            _advance(state, match)
    return state, predictions


def mae_objective(
    params: GapParams, matches: Sequence[MatchRecord], init: float = DEFAULT_INIT
) -> float:
    """Mean over matches with shots of ``|S_h - Ŝ_h| + |S_a - Ŝ_a|`` from a fresh state."""
    _, predictions = replay(matches, params, init)
    errors = [
        abs(m.home_shots - home) + abs(m.away_shots - away)
        for m, home, away in predictions
        if m.has_shots
    ]
    if not errors:
        raise InsufficientDataError("empty objective")
    return float(np.mean(errors))


def _to_params(x: np.ndarray, converged: bool = True) -> GapParams:
    lam = math.exp(float(np.clip(x[0], -20.0, 5.0)))
    phi1, phi2 = (float(np.clip(expit(v), 1e-9, 1 - 1e-9)) for v in x[1:])
    return GapParams(lam, phi1, phi2, converged)


def fit_gap_params(matches: Sequence[MatchRecord], init: float = DEFAULT_INIT) -> GapParams:
    """Minimise ``mae_objective`` with the Nelder-Mead simplex.

    The search runs on ``(log lambda, logit phi1, logit phi2)`` so every
    evaluated point is inside the parameter box; it restarts once from the
    converged point.  Fewer than ``MIN_FIT_MATCHES`` matches with shots give
    ``DEFAULT_PARAMS``.
    """
    matches = list(matches)
    usable = sum(1 for m in matches if m.has_shots)
    if usable < MIN_FIT_MATCHES:
        logger.info("Only %d matches with shots; using default GAP parameters", usable)
        return DEFAULT_PARAMS

    def objective(x: np.ndarray) -> float:
        return mae_objective(_to_params(x), matches, init)

    lam, phi1, phi2 = SIMPLEX_START
    x0 = np.array([math.log(lam), logit(phi1), logit(phi2)])
    options = {"xatol": SIMPLEX_XATOL, "fatol": 1e-10, "maxiter": SIMPLEX_MAXITER}
    result = minimize(objective, x0, method="Nelder-Mead", options=options)
    result = minimize(objective, result.x, method="Nelder-Mead", options=options)
    if not result.success:
        logger.warning("GAP simplex did not converge: %s", result.message)
    params = _to_params(result.x, converged=bool(result.success))
    logger.info(
        "GAP fit on %d matches: lambda=%.4f phi1=%.4f phi2=%.4f mae=%.4f",
        usable, params.lam, params.phi1, params.phi2, result.fun,
    )
    return params
