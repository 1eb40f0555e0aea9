import math
from datetime import date

import numpy as np
import pytest

from src.main.models import Market
from src.main.tools.betting import (
    BetCandidate,
    BetDraft,
    BetResult,
    KellyNumerator,
    Strategy,
    has_value,
    kelly_fraction,
    level_stakes_decide,
    normalize_stakes,
    odds_implied,
    run_strategy,
    settle,
)

DAY = date(2020, 1, 1)


def test_odds_implied():
    assert odds_implied(2.0) == 0.5
    assert odds_implied(4.0) == 0.25
    assert odds_implied(1.01) == pytest.approx(0.990099, abs=1e-6)
    with pytest.raises(ValueError):
        odds_implied(1.0)


def test_level_stakes_decide():
    assert level_stakes_decide(0.5, odds_implied(2.1))
    assert not level_stakes_decide(0.5, 0.5)
    assert not level_stakes_decide(0.3, 0.5)


def test_kelly_fraction():
    assert kelly_fraction(0.5, 2.0) == 0.0
    assert kelly_fraction(0.6, 2.0) == pytest.approx(0.2)
    assert kelly_fraction(1.0, 3.0) == pytest.approx(1.0)
    assert kelly_fraction(0.2, 2.0) == 0.0
    assert kelly_fraction(0.6, 2.0, KellyNumerator.AS_PRINTED) == pytest.approx(1.6)
    with pytest.raises(ValueError):
        kelly_fraction(0.5, 0.9)


def test_normalize_stakes():
    assert normalize_stakes([0.1, 0.3]) == pytest.approx([0.5, 1.5])
    assert normalize_stakes([0.07]) == pytest.approx([1.0])
    assert normalize_stakes([0.2, 0.2, 0.2]) == pytest.approx([1.0, 1.0, 1.0])
    with pytest.raises(ValueError, match="no bets placed"):
        normalize_stakes([0.0, 0.0])


def _draft(match_id, outcome, odds, stake=1.0):
    return BetDraft(match_id, Market.MATCH_1X2, outcome, odds, stake, stake)


def test_settle():
    outcomes = {("m1", Market.MATCH_1X2): "H", ("m2", Market.MATCH_1X2): "A"}
    settled = settle([_draft("m1", "H", 3.0), _draft("m2", "H", 2.0)], outcomes)
    assert settled.profit_series == pytest.approx([2.0, 1.0])
    assert settled.total_profit == pytest.approx(1.0)
    assert settled.bets_placed == 2
    assert [b.result for b in settled.ledger] == [BetResult.WON, BetResult.LOST]


def test_settle_skips_zero_stakes_and_needs_outcomes():
    settled = settle([_draft("m1", "H", 3.0, stake=0.0)], {})
    assert (settled.total_profit, settled.bets_placed, settled.profit_series) == (0.0, 0, [])
    with pytest.raises(ValueError):
        settle([_draft("m1", "H", 3.0)], {})


def _book(rng, n=300):
    candidates, outcomes = [], {}
    for k in range(n):
        match_id = f"L:2021:{k}"
        q = rng.dirichlet([4, 3, 3])
        odds = 0.95 / rng.dirichlet([4, 3, 3])
        forecast = 0.7 * q + 0.3 / 3
        for label, p, o in zip("HDA", forecast, np.maximum(odds, 1.01)):
            candidates.append(BetCandidate(match_id, DAY, Market.MATCH_1X2, label, float(p), float(o)))
        outcomes[(match_id, Market.MATCH_1X2)] = "HDA"[rng.choice(3, p=q)]
    return candidates, outcomes


def test_strategies_bet_on_the_same_outcomes():
    candidates, outcomes = _book(np.random.default_rng(0))
    level = run_strategy(candidates, outcomes, Strategy.LEVEL_STAKES)
    kelly = run_strategy(candidates, outcomes, Strategy.KELLY)
    assert level.bets_placed == kelly.bets_placed > 0
    assert [(b.match_id, b.outcome) for b in level.ledger] == [(b.match_id, b.outcome) for b in kelly.ledger]
    assert kelly.mean_stake == pytest.approx(1.0, abs=1e-12)
    assert all(b.stake == 1.0 for b in level.ledger)
    expected = sum(b.stake * (b.odds - 1) if b.result is BetResult.WON else -b.stake for b in kelly.ledger)
    assert kelly.total_profit == pytest.approx(expected)
    assert kelly.profit_series[-1] == pytest.approx(kelly.total_profit)


def test_fair_forecasts_place_no_bets():
    candidates = [BetCandidate("m", DAY, Market.OVER_UNDER_25, "over", 0.5, 2.0)]
    result = run_strategy(candidates, {}, Strategy.KELLY)
    assert result.bets_placed == 0
    assert result.total_profit == 0.0
    assert result.summary()["strategy"] == "kelly"


def test_multiple_bets_on_one_match_are_counted():
    candidates = [
        BetCandidate("m", DAY, Market.MATCH_1X2, "H", 0.5, 2.5),
        BetCandidate("m", DAY, Market.MATCH_1X2, "A", 0.4, 3.0),
        BetCandidate("n", DAY, Market.MATCH_1X2, "H", 0.6, 2.0),
    ]
    outcomes = {("m", Market.MATCH_1X2): "A", ("n", Market.MATCH_1X2): "D"}
    result = run_strategy(candidates, outcomes, Strategy.LEVEL_STAKES)
    assert result.multi_bet_matches == 1
    assert result.total_profit == pytest.approx(-1.0 + 2.0 - 1.0)


def test_as_printed_numerator_changes_stakes_not_bets():
    candidates, outcomes = _book(np.random.default_rng(1))
    standard = run_strategy(candidates, outcomes, Strategy.KELLY)
    printed = run_strategy(candidates, outcomes, Strategy.KELLY, KellyNumerator.AS_PRINTED)
    assert printed.bets_placed == standard.bets_placed
    assert printed.mean_stake == pytest.approx(1.0)
    assert [b.stake for b in printed.ledger] != pytest.approx([b.stake for b in standard.ledger])


def test_has_value():
    assert has_value(0.6, 2.0)
    assert not has_value(0.5, 2.0)
    assert not has_value(0.3, 2.0)


def test_bets_at_the_edge_of_value_get_the_same_treatment():
    odds = 1.1
    candidates = [
        BetCandidate("m", DAY, Market.MATCH_1X2, "H", math.nextafter(1 / odds, 1.0), odds),
        BetCandidate("n", DAY, Market.MATCH_1X2, "H", 0.6, 2.0),
    ]
    outcomes = {("m", Market.MATCH_1X2): "H", ("n", Market.MATCH_1X2): "A"}
    level = run_strategy(candidates, outcomes, Strategy.LEVEL_STAKES)
    kelly = run_strategy(candidates, outcomes, Strategy.KELLY)
    assert level.bets_placed == kelly.bets_placed
    assert [b.match_id for b in level.ledger] == [b.match_id for b in kelly.ledger]
    assert all(b.fraction > 0 for b in kelly.ledger)


def test_odds_must_exceed_one():
    with pytest.raises(ValueError):
        run_strategy([BetCandidate("m", DAY, Market.MATCH_1X2, "H", 0.2, 1.0)], {}, Strategy.KELLY)
