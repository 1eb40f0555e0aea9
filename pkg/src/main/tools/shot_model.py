"""Pre-match probability that a shot becomes a goal.

Each team has an attacking rating ``a`` and a defensive rating ``d`` in
log-odds units; with a constant ``c`` and a home advantage ``h`` the home
side's conversion probability against team ``j`` is
``expit(c + h + (a_i + d_j) / 2)`` and the away side's is
``expit(c - h + (a_j + d_i) / 2)``.

Ratings are fitted per league by maximum likelihood over every earlier
team-match, each weighted by ``0.5 ** (days_ago / half_life)``.  The
likelihood is written binomially per team-match (``goals`` successes out of
``shots``), which is the per-shot likelihood with identical shots.  The
ratings are only defined up to a shift (moving every ``a`` by ``x`` and ``c``
by ``-x/2`` changes nothing), so the optimiser works on sum-to-zero
coordinates and the result is centred.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from src.main.errors import InsufficientDataError, UnratedTeamError
from src.main.models import MatchRecord

logger = logging.getLogger(__name__)

PROB_CLAMP = 1e-9
GTOL = 1e-6
MAX_ITER = 200


def time_weight(days_ago: float, half_life: float) -> float:
    """``0.5 ** (days_ago / half_life)``; ``half_life`` may be ``inf``."""
    if not half_life > 0:
        raise ValueError("half_life must be positive")
    if days_ago < 0:
        raise ValueError(f"negative days_ago ({days_ago}): training data after the as-of date")
    return 0.5 ** (days_ago / half_life)


@dataclass(frozen=True, eq=False)
class ShotModelParams:
    league_id: str
    team_order: Tuple[str, ...]
    attack: np.ndarray
    defence: np.ndarray
    c: float
    h: float
    half_life: float
    as_of_date: date
    converged: bool = True

    def team_index(self, team: str) -> int:
        try:
            return self.team_order.index(team)
        except ValueError:
            raise UnratedTeamError(team, self.league_id) from None

    def vector(self) -> np.ndarray:
        """Parameters in the order ``a_1..a_T, d_1..d_T, c, h``."""
        return np.concatenate([self.attack, self.defence, [self.c, self.h]])

    def with_vector(self, theta: np.ndarray) -> "ShotModelParams":
        n = len(self.team_order)
        return ShotModelParams(
            self.league_id, self.team_order, np.array(theta[:n]), np.array(theta[n:2 * n]),
            float(theta[2 * n]), float(theta[2 * n + 1]), self.half_life, self.as_of_date,
            self.converged,
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "league_id": self.league_id,
                "team_order": list(self.team_order),
                "attack": self.attack.tolist(),
                "defence": self.defence.tolist(),
                "c": self.c,
                "h": self.h,
                "half_life": self.half_life,
                "as_of_date": self.as_of_date.isoformat(),
                "converged": self.converged,
            }
        )

    @classmethod
    def from_json(cls, payload: str) -> "ShotModelParams":
        data = json.loads(payload)
        params = cls(
            league_id=data["league_id"],
            team_order=tuple(data["team_order"]),
            attack=np.asarray(data["attack"], dtype=float),
            defence=np.asarray(data["defence"], dtype=float),
            c=float(data["c"]),
            h=float(data["h"]),
            half_life=float(data["half_life"]),
            as_of_date=date.fromisoformat(data["as_of_date"]),
            converged=bool(data.get("converged", True)),
        )
        n = len(params.team_order)
        if params.attack.shape != (n,) or params.defence.shape != (n,):
            raise ValueError("rating vectors do not match team_order")
        return params


class Side(str, Enum):
    HOME = "home"
    AWAY = "away"


@dataclass(frozen=True)
class ShotOutcomeSample:
    """One team's shots and goals in one match, seen from the as-of date."""

    match_id: str
    side: Side
    attacking_team: str
    defending_team: str
    shots: int
    goals: int
    days_before_as_of: int

    def __post_init__(self):
        if self.shots < 0 or self.goals < 0 or self.goals > self.shots:
            raise ValueError("need 0 <= goals <= shots")


@dataclass(frozen=True)
class _Samples:
    attack_idx: np.ndarray
    defence_idx: np.ndarray
    side: np.ndarray
    shots: np.ndarray
    goals: np.ndarray
    weight: np.ndarray


def shot_probabilities(params: ShotModelParams, home_team: str, away_team: str) -> Tuple[float, float]:
    i, j = params.team_index(home_team), params.team_index(away_team)
    a, d = params.attack, params.defence
    p_home = expit(params.c + params.h + (a[i] + d[j]) / 2)
    p_away = expit(params.c - params.h + (a[j] + d[i]) / 2)
    return float(p_home), float(p_away)


def _nll_and_grad(theta: np.ndarray, samples: _Samples, n_teams: int) -> Tuple[float, np.ndarray]:
    a, d = theta[:n_teams], theta[n_teams:2 * n_teams]
    c, h = theta[2 * n_teams], theta[2 * n_teams + 1]
    m = c + samples.side * h + (a[samples.attack_idx] + d[samples.defence_idx]) / 2
    p = expit(m)
    clamped = np.clip(p, PROB_CLAMP, 1 - PROB_CLAMP)
    w, shots, goals = samples.weight, samples.shots, samples.goals
    nll = -np.sum(w * (goals * np.log(clamped) + (shots - goals) * np.log1p(-clamped)))
    residual = w * (shots * p - goals)
    grad = np.concatenate(
        [
            np.bincount(samples.attack_idx, residual, n_teams) / 2,
            np.bincount(samples.defence_idx, residual, n_teams) / 2,
            [residual.sum(), (residual * samples.side).sum()],
        ]
    )
    return float(nll), grad


def _as_arrays(params: ShotModelParams, samples: Sequence[ShotOutcomeSample]) -> _Samples:
    for s in samples:
        if s.days_before_as_of < 1:
            raise ValueError(f"sample {s.match_id} is not strictly before the as-of date")
    return _Samples(
        attack_idx=np.array([params.team_index(s.attacking_team) for s in samples], dtype=int),
        defence_idx=np.array([params.team_index(s.defending_team) for s in samples], dtype=int),
        side=np.array([1.0 if s.side is Side.HOME else -1.0 for s in samples]),
        shots=np.array([s.shots for s in samples], dtype=float),
        goals=np.array([s.goals for s in samples], dtype=float),
        weight=np.array([time_weight(s.days_before_as_of, params.half_life) for s in samples]),
    )


def weighted_nll(params: ShotModelParams, samples: Sequence[ShotOutcomeSample]) -> float:
    """Time-weighted binomial negative log-likelihood of *samples*."""
    nll, _ = _nll_and_grad(params.vector(), _as_arrays(params, samples), len(params.team_order))
    return nll


def nll_gradient(params: ShotModelParams, samples: Sequence[ShotOutcomeSample]) -> np.ndarray:
    """Analytic gradient of ``weighted_nll`` in the order of ``params.vector()``."""
    _, grad = _nll_and_grad(params.vector(), _as_arrays(params, samples), len(params.team_order))
    return grad


@dataclass(frozen=True)
class LeagueShotData:
    """Array form of one league's matches, for repeated per-date fits."""

    league_id: str
    teams: Tuple[str, ...]
    day: np.ndarray
    home_idx: np.ndarray
    away_idx: np.ndarray
    home_shots: np.ndarray
    away_shots: np.ndarray
    home_goals: np.ndarray
    away_goals: np.ndarray
    valid: np.ndarray

    @classmethod
    def from_matches(cls, matches: Iterable[MatchRecord], league_id: str) -> "LeagueShotData":
        matches = [m for m in matches if m.league_id == league_id]
        teams = tuple(sorted({m.home_team for m in matches} | {m.away_team for m in matches}))
        position = {team: k for k, team in enumerate(teams)}
        valid = np.array([m.shot_data_valid for m in matches], dtype=bool)
        return cls(
            league_id=league_id,
            teams=teams,
            day=np.array([m.date.toordinal() for m in matches], dtype=int),
            home_idx=np.array([position[m.home_team] for m in matches], dtype=int),
            away_idx=np.array([position[m.away_team] for m in matches], dtype=int),
            home_shots=np.array([m.home_shots if m.shot_data_valid else 0 for m in matches], dtype=float),
            away_shots=np.array([m.away_shots if m.shot_data_valid else 0 for m in matches], dtype=float),
            home_goals=np.array([m.home_goals for m in matches], dtype=float),
            away_goals=np.array([m.away_goals for m in matches], dtype=float),
            valid=valid,
        )

    def prior_mask(self, as_of_date: date) -> np.ndarray:
        return self.day < as_of_date.toordinal()


def samples_from_matches(
    matches: Iterable[MatchRecord], league_id: str, as_of_date: date
) -> List[ShotOutcomeSample]:
    """Two samples per earlier league match with usable shot data."""
    samples = []
    for m in matches:
        if m.league_id != league_id or m.date >= as_of_date or not m.shot_data_valid:
            continue
        days = (as_of_date - m.date).days
        samples.append(
            ShotOutcomeSample(m.match_id, Side.HOME, m.home_team, m.away_team, m.home_shots, m.home_goals, days)
        )
        samples.append(
            ShotOutcomeSample(m.match_id, Side.AWAY, m.away_team, m.home_team, m.away_shots, m.away_goals, days)
        )
    return samples


def _sum_to_zero(free: np.ndarray, active: np.ndarray, n_teams: int) -> np.ndarray:
    ratings = np.zeros(n_teams)
    if len(active):
        ratings[active[:-1]] = free
        ratings[active[-1]] = -free.sum()
    return ratings


def _free_gradient(grad: np.ndarray, active: np.ndarray) -> np.ndarray:
    if not len(active):
        return np.zeros(0)
    return grad[active[:-1]] - grad[active[-1]]


def fit_league(data: LeagueShotData, as_of_date: date, half_life: float) -> ShotModelParams:
    """Fit the league's ratings on all matches strictly before *as_of_date*."""
    prior = data.prior_mask(as_of_date)
    team_ids = np.unique(np.concatenate([data.home_idx[prior], data.away_idx[prior]]))
    team_order = tuple(data.teams[k] for k in team_ids)
    usable = prior & data.valid
    local = lambda idx: np.searchsorted(team_ids, idx)  # noqa: E731
    home_idx, away_idx = local(data.home_idx[usable]), local(data.away_idx[usable])
    days = as_of_date.toordinal() - data.day[usable]
    weight = np.power(0.5, days / half_life)
    samples = _Samples(
        attack_idx=np.concatenate([home_idx, away_idx]),
        defence_idx=np.concatenate([away_idx, home_idx]),
        side=np.concatenate([np.ones(len(home_idx)), -np.ones(len(away_idx))]),
        shots=np.concatenate([data.home_shots[usable], data.away_shots[usable]]),
        goals=np.concatenate([data.home_goals[usable], data.away_goals[usable]]),
        weight=np.concatenate([weight, weight]),
    )
    return _fit(samples, data.league_id, team_order, as_of_date, half_life)


def fit_shot_model(
    matches: Iterable[MatchRecord], league_id: str, as_of_date: date, half_life: float
) -> ShotModelParams:
    """Fit the shot model for *league_id* using matches dated before *as_of_date*."""
    if not half_life > 0:
        raise ValueError("half_life must be positive")
    return fit_league(LeagueShotData.from_matches(matches, league_id), as_of_date, half_life)


def _fit(
    samples: _Samples,
    league_id: str,
    team_order: Tuple[str, ...],
    as_of_date: date,
    half_life: float,
) -> ShotModelParams:
    n_teams = len(team_order)
    scale = float(np.sum(samples.weight * samples.shots))
    if scale <= 0:
        raise InsufficientDataError(f"insufficient data for {league_id} before {as_of_date}")

    # Teams without shots for (or against) them keep a zero rating.
    has_attack = samples.shots > 0
    active_a = np.unique(samples.attack_idx[has_attack])
    active_d = np.unique(samples.defence_idx[has_attack])
    n_a, n_d = max(len(active_a) - 1, 0), max(len(active_d) - 1, 0)

    def unpack(z: np.ndarray) -> np.ndarray:
        return np.concatenate(
            [
                _sum_to_zero(z[:n_a], active_a, n_teams),
                _sum_to_zero(z[n_a:n_a + n_d], active_d, n_teams),
                z[n_a + n_d:],
            ]
        )

    def objective(z: np.ndarray) -> Tuple[float, np.ndarray]:
        nll, grad = _nll_and_grad(unpack(z), samples, n_teams)
        free_grad = np.concatenate(
            [
                _free_gradient(grad[:n_teams], active_a),
                _free_gradient(grad[n_teams:2 * n_teams], active_d),
                grad[2 * n_teams:],
            ]
        )
        # Per-shot scale keeps the gradient tolerance independent of sample size.
        return nll / scale, free_grad / scale

    result = minimize(
        objective,
        np.zeros(n_a + n_d + 2),
        jac=True,
        method="BFGS",
        options={"gtol": GTOL, "maxiter": MAX_ITER},
    )
    converged = bool(result.success)
    if not converged:
        grad_norm = float(np.max(np.abs(result.jac))) if result.jac is not None else math.inf
        level = logging.WARNING if grad_norm > 1e-3 else logging.DEBUG
        logger.log(level, "Shot model %s @ %s (H=%s): %s (|grad|=%.2e)",
                   league_id, as_of_date, half_life, result.message, grad_norm)
        converged = grad_norm <= 1e-3

    theta = unpack(result.x)
    attack, defence = theta[:n_teams], theta[n_teams:2 * n_teams]
    shift_a, shift_d = attack.mean(), defence.mean()
    return ShotModelParams(
        league_id=league_id,
        team_order=team_order,
        attack=attack - shift_a,
        defence=defence - shift_d,
        c=float(theta[2 * n_teams] + (shift_a + shift_d) / 2),
        h=float(theta[2 * n_teams + 1]),
        half_life=half_life,
        as_of_date=as_of_date,
        converged=converged,
    )


def climatology(matches: Iterable[MatchRecord], as_of_date: date) -> float:
    """Pooled goals per shot over matches dated before *as_of_date*."""
    goals = shots = 0
    for m in matches:
        if m.date < as_of_date and m.shot_data_valid:
            goals += m.home_goals + m.away_goals
            shots += m.home_shots + m.away_shots
    if shots == 0:
        raise InsufficientDataError("empty climatology")
    return goals / shots
