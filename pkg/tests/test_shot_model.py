import math
from datetime import date, timedelta

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from src.main.errors import InsufficientDataError, UnratedTeamError
from src.main.models import MatchRecord, Outcome
from src.main.tools.shot_model import (
    ShotModelParams,
    ShotOutcomeSample,
    Side,
    climatology,
    fit_shot_model,
    nll_gradient,
    samples_from_matches,
    shot_probabilities,
    time_weight,
    weighted_nll,
)
from tests.synthetic import random_truth, simulate_league, team_name

AS_OF = date(2021, 1, 1)


def _match(home, away, home_goals, away_goals, home_shots, away_shots, day, sequence=0):
    return MatchRecord(
        league_id="L", season_id="2021", date=day, home_team=home, away_team=away,
        home_goals=home_goals, away_goals=away_goals, home_shots=home_shots, away_shots=away_shots,
        outcome=Outcome.from_goals(home_goals, away_goals), sequence=sequence,
    )


def _params(teams=("A", "B"), attack=None, defence=None, c=0.0, h=0.0, half_life=math.inf):
    n = len(teams)
    return ShotModelParams(
        "L", tuple(teams),
        np.zeros(n) if attack is None else np.asarray(attack, dtype=float),
        np.zeros(n) if defence is None else np.asarray(defence, dtype=float),
        c, h, half_life, AS_OF,
    )


def _sample(shots, goals, days=1, attacker="A", defender="B", side=Side.HOME):
    return ShotOutcomeSample("m", side, attacker, defender, shots, goals, days)


def test_time_weight():
    assert time_weight(0, 30) == 1.0
    assert time_weight(30, 30) == pytest.approx(0.5)
    assert time_weight(60, 30) == pytest.approx(0.25)
    assert time_weight(1000, math.inf) == 1.0
    with pytest.raises(ValueError):
        time_weight(-1, 30)
    with pytest.raises(ValueError):
        time_weight(1, 0)


def test_shot_probabilities():
    assert shot_probabilities(_params(), "A", "B") == (0.5, 0.5)
    home, away = shot_probabilities(_params(c=-2.0, h=0.1), "A", "B")
    assert home == pytest.approx(0.13011, abs=1e-5)
    assert away == pytest.approx(1 / (1 + math.exp(2.1)))


def test_swapping_venue_swaps_probabilities_without_home_advantage():
    params = _params(attack=[0.4, -0.4], defence=[-0.1, 0.1], c=-2.0)
    home, away = shot_probabilities(params, "A", "B")
    assert shot_probabilities(params, "B", "A") == pytest.approx((away, home))


def test_unrated_team():
    with pytest.raises(UnratedTeamError):
        shot_probabilities(_params(), "A", "Z")


def test_gauge_shift_leaves_probabilities_unchanged():
    params = _params(teams=("A", "B", "C"), attack=[0.3, -0.1, -0.2], defence=[0.0, 0.2, -0.2], c=-2.1, h=0.15)
    shifted = _params(
        teams=("A", "B", "C"), attack=params.attack + 0.7, defence=params.defence - 0.4,
        c=params.c - 0.35 + 0.2, h=0.15,
    )
    for home in "ABC":
        for away in "ABC":
            if home != away:
                assert shot_probabilities(shifted, home, away) == pytest.approx(
                    shot_probabilities(params, home, away), abs=1e-12
                )


def test_attack_rating_is_monotone():
    base = _params(teams=("A", "B", "C"), c=-2.0)
    stronger = _params(teams=("A", "B", "C"), attack=[0.5, 0.0, 0.0], c=-2.0)
    for opponent in "BC":
        assert shot_probabilities(stronger, "A", opponent)[0] > shot_probabilities(base, "A", opponent)[0]
        assert shot_probabilities(stronger, opponent, "A")[1] > shot_probabilities(base, opponent, "A")[1]


def test_weighted_nll_values():
    assert weighted_nll(_params(), [_sample(10, 2)]) == pytest.approx(10 * math.log(2))
    assert weighted_nll(_params(), [_sample(0, 0), _sample(0, 0, side=Side.AWAY)]) == 0.0
    samples = [_sample(10, 2), _sample(8, 1, attacker="B", defender="A", side=Side.AWAY)]
    assert weighted_nll(_params(), samples + samples) == pytest.approx(2 * weighted_nll(_params(), samples))


def test_older_samples_weigh_less():
    params = _params(half_life=30.0)
    recent = weighted_nll(params, [_sample(10, 2, days=1)])
    old = weighted_nll(params, [_sample(10, 2, days=60)])
    assert old < recent
    assert old == pytest.approx(recent * 0.5 ** (59 / 30))


def test_samples_on_or_after_the_as_of_date_are_rejected():
    with pytest.raises(ValueError):
        weighted_nll(_params(), [_sample(10, 2, days=0)])


def test_sample_validation():
    with pytest.raises(ValueError):
        _sample(3, 4)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(21)
    truth = random_truth(rng, 6)
    matches = simulate_league(rng, truth, seasons=1, round_robins=2)
    as_of = matches[-1].date + timedelta(days=1)
    samples = samples_from_matches(matches, "SYN", as_of)
    teams = tuple(team_name(k) for k in range(6))
    base = ShotModelParams("SYN", teams, np.zeros(6), np.zeros(6), -2.0, 0.0, 60.0, as_of)
    step = 1e-6
    for _ in range(20):
        theta = rng.normal(0.0, 0.5, 14)
        theta[12] -= 2.0
        params = base.with_vector(theta)
        analytic = nll_gradient(params, samples)
        numeric = np.empty_like(theta)
        for k in range(len(theta)):
            up, down = theta.copy(), theta.copy()
            up[k] += step
            down[k] -= step
            numeric[k] = (weighted_nll(base.with_vector(up), samples) - weighted_nll(base.with_vector(down), samples)) / (2 * step)
        assert np.linalg.norm(numeric - analytic) / np.linalg.norm(analytic) < 1e-4


def _symmetric_league(n=10, k=2):
    day = date(2020, 9, 1)
    matches = []
    for r in range(4):
        home, away = ("A", "B") if r % 2 == 0 else ("B", "A")
        matches.append(_match(home, away, k, k, n, n, day + timedelta(days=7 * r), r))
    return matches


def test_symmetric_two_team_league():
    params = fit_shot_model(_symmetric_league(), "L", AS_OF, math.inf)
    assert params.team_order == ("A", "B")
    np.testing.assert_allclose(params.attack, 0.0, atol=1e-4)
    np.testing.assert_allclose(params.defence, 0.0, atol=1e-4)
    assert params.h == pytest.approx(0.0, abs=1e-4)
    assert params.c == pytest.approx(math.log(2 / 8), abs=1e-4)
    assert params.converged


def _coordinate_descent(params, samples, sweeps=40):
    theta = np.zeros(len(params.vector()))
    for _ in range(sweeps):
        for k in range(len(theta)):
            def along(v, k=k):
                trial = theta.copy()
                trial[k] = v
                return weighted_nll(params.with_vector(trial), samples)
            theta[k] = minimize_scalar(along, bounds=(-8.0, 8.0), method="bounded").x
    return weighted_nll(params.with_vector(theta), samples)


def test_three_team_fit_beats_coordinate_descent():
    rng = np.random.default_rng(4)
    truth = random_truth(rng, 4, spread=0.6)
    matches = [m for m in simulate_league(rng, truth, seasons=1, round_robins=3) if team_name(3) not in (m.home_team, m.away_team)]
    as_of = matches[-1].date + timedelta(days=1)
    fitted = fit_shot_model(matches, "SYN", as_of, math.inf)
    assert len(fitted.team_order) == 3
    assert abs(fitted.attack.sum()) < 1e-8
    assert abs(fitted.defence.sum()) < 1e-8
    samples = samples_from_matches(matches, "SYN", as_of)
    oracle = _coordinate_descent(fitted, samples)
    assert weighted_nll(fitted, samples) <= oracle + 1e-3


def test_zero_goals_everywhere():
    day = date(2020, 9, 1)
    teams = "ABC"
    matches = [
        _match(h, a, 0, 0, 12, 9, day + timedelta(days=n), n)
        for n, (h, a) in enumerate((h, a) for h in teams for a in teams if h != a)
    ]
    params = fit_shot_model(matches, "L", AS_OF, math.inf)
    for h in teams:
        for a in teams:
            if h != a:
                assert max(shot_probabilities(params, h, a)) < 1e-3
    np.testing.assert_allclose(params.attack, 0.0, atol=1e-3)
    np.testing.assert_allclose(params.defence, 0.0, atol=1e-3)


def test_fit_only_uses_earlier_matches():
    matches = _symmetric_league()
    late = _match("A", "C", 5, 0, 10, 10, AS_OF, 9)
    params = fit_shot_model(matches + [late], "L", AS_OF, math.inf)
    assert "C" not in params.team_order
    assert params.c == pytest.approx(math.log(2 / 8), abs=1e-4)


def test_fit_without_shots_raises():
    matches = [
        MatchRecord(league_id="L", season_id="2021", date=date(2020, 9, 1), home_team="A", away_team="B",
                    home_goals=1, away_goals=0, outcome=Outcome.HOME_WIN)
    ]
    with pytest.raises(InsufficientDataError):
        fit_shot_model(matches, "L", AS_OF, 60.0)


def test_fit_recovers_generating_ratings():
    rng = np.random.default_rng(2024)
    truth = random_truth(rng, 6, spread=0.5, c=-0.85, h=0.1)
    matches = simulate_league(rng, truth, seasons=10, round_robins=20, shots_mean=30.0, days_between=1)
    as_of = matches[-1].date + timedelta(days=1)
    params = fit_shot_model(matches, "SYN", as_of, math.inf)
    order = [params.team_index(team_name(k)) for k in range(6)]
    np.testing.assert_allclose(params.attack[order], truth.attack, atol=0.1)
    np.testing.assert_allclose(params.defence[order], truth.defence, atol=0.1)
    assert params.c == pytest.approx(truth.c, abs=0.05)
    assert params.h == pytest.approx(truth.h, abs=0.05)


def test_climatology():
    day = date(2020, 9, 1)
    one = [_match("A", "B", 2, 1, 10, 8, day)]
    assert climatology(one, AS_OF) == pytest.approx(3 / 18)
    assert climatology(one + [_match("A", "B", 0, 0, 0, 0, day, 1)], AS_OF) == pytest.approx(3 / 18)
    assert climatology([_match("A", "B", 3, 2, 3, 2, day)], AS_OF) == 1.0
    with pytest.raises(InsufficientDataError, match="empty climatology"):
        climatology(one, day)


def test_params_json_rejects_mismatched_vectors():
    payload = _params().to_json().replace('"attack": [0.0, 0.0]', '"attack": [0.0]')
    with pytest.raises(ValueError):
        ShotModelParams.from_json(payload)
