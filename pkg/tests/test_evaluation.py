import math

import numpy as np
import pytest

from src.main.tools.evaluation import (
    ScoredForecast,
    binomial_scores,
    brier,
    ignorance,
    is_clamped,
    relative_skill,
    reliability_diagram,
    rps,
)


def test_brier():
    assert brier([1.0, 0.0], 0) == 0.0
    assert brier([0.5, 0.3, 0.2], 0) == pytest.approx(0.38)
    for r in (2, 3, 5):
        for y in range(r):
            assert brier(np.full(r, 1 / r), y) == pytest.approx((r - 1) / r)


def test_rps():
    assert rps([1.0, 0.0, 0.0], 0) == 0.0
    assert rps([0.5, 0.3, 0.2], 0) == pytest.approx(0.29)
    # Mass next to the outcome scores better than mass two categories away.
    assert rps([0.0, 1.0, 0.0], 0) < rps([0.0, 0.0, 1.0], 0)
    assert brier([0.0, 1.0, 0.0], 0) == brier([0.0, 0.0, 1.0], 0)


def test_ignorance():
    assert ignorance([0.5, 0.5], 0) == pytest.approx(1.0)
    assert ignorance([1.0, 0.0], 0) == 0.0
    assert ignorance([0.25, 0.75], 0) == pytest.approx(2.0)
    assert ignorance([1.0, 0.0], 1) == pytest.approx(-math.log2(1e-9))
    assert is_clamped([1.0, 0.0], 1)
    assert not is_clamped([0.6, 0.4], 1)


def test_invalid_vectors_are_rejected():
    with pytest.raises(ValueError):
        brier([0.6, 0.6], 0)
    with pytest.raises(ValueError):
        rps([1.0], 0)
    with pytest.raises(ValueError):
        ignorance([0.5, 0.5], 2)
    with pytest.raises(ValueError):
        ScoredForecast("m", (0.2, 0.2, 0.2), 0)


def test_scores_are_consistent_for_two_outcomes():
    for p in (0.0, 0.1, 0.37, 0.9):
        for y in (0, 1):
            o = 1.0 if y == 0 else 0.0
            assert brier([p, 1 - p], y) == pytest.approx(2 * (p - o) ** 2)
            assert rps([p, 1 - p], y) == pytest.approx((p - o) ** 2)


def test_ignorance_ignores_category_order_but_rps_does_not():
    p = [0.6, 0.3, 0.1]
    relabel = [2, 0, 1]
    permuted = [p[k] for k in relabel]
    for y in range(3):
        assert ignorance(permuted, relabel.index(y)) == pytest.approx(ignorance(p, y))
    assert rps(permuted, relabel.index(0)) != pytest.approx(rps(p, 0))


def test_scored_forecast():
    scores = ScoredForecast("m", (0.5, 0.3, 0.2), 0).scores()
    assert scores == pytest.approx({"brier": 0.38, "ignorance": 1.0, "rps": 0.29})
    assert "rps" not in ScoredForecast("m", (0.4, 0.6), 1).scores(ordered=False)


@pytest.mark.parametrize("score", [brier, rps, ignorance])
def test_scores_are_proper(score):
    rng = np.random.default_rng(0)
    q = np.array([0.5, 0.3, 0.2])
    outcomes = rng.choice(3, size=100000, p=q)
    candidates = [q, np.array([0.6, 0.2, 0.2]), np.array([0.4, 0.3, 0.3]), np.array([0.5, 0.4, 0.1]),
                  np.array([1 / 3, 1 / 3, 1 / 3])]
    counts = np.bincount(outcomes, minlength=3)

    def expected(p):
        return sum(counts[y] * score(p, y) for y in range(3)) / len(outcomes)

    values = [expected(p) for p in candidates]
    assert int(np.argmin(values)) == 0


def test_relative_skill():
    assert relative_skill([0.3, 0.5], [0.3, 0.5]) == 0.0
    perfect = [ignorance([1.0, 0.0], 0)] * 4
    uniform = [ignorance([0.5, 0.5], 0)] * 4
    assert relative_skill(perfect, uniform) == pytest.approx(-1.0)
    assert relative_skill([1.0, 0.0], [0.0, 0.0], weights=[3.0, 1.0]) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        relative_skill([0.1, 0.2], [0.1])
    with pytest.raises(ValueError):
        relative_skill([], [])


def test_binomial_scores():
    ign, bri = binomial_scores([0.5, 0.25], [4, 2], [1, 0])
    assert ign.tolist() == pytest.approx([4.0, -2 * math.log2(0.75)])
    assert bri.tolist() == pytest.approx([2 * (0.25 + 3 * 0.25), 2 * 2 * 0.0625])


def test_reliable_forecasts_fall_inside_the_bars():
    rng = np.random.default_rng(1)
    p = rng.uniform(0.0, 1.0, 100000)
    outcomes = rng.binomial(1, p)
    bins = reliability_diagram(p, outcomes, n_bins=10, seed=2)
    assert len(bins) == 10
    assert sum(b.count for b in bins) == len(p)
    inside = sum(b.bar_low <= b.observed_frequency <= b.bar_high for b in bins)
    assert inside >= 8
    means = [b.mean_forecast for b in bins]
    assert means == sorted(means)


def test_miscalibrated_forecasts_sit_above_the_bars(caplog):
    rng = np.random.default_rng(3)
    p = np.full(5000, 0.1)
    outcomes = rng.binomial(1, 0.3, len(p))
    with caplog.at_level("WARNING"):
        bins = reliability_diagram(p, outcomes, n_bins=10)
    assert len(bins) == 1
    assert "reduced" in caplog.text
    assert all(b.observed_frequency > b.bar_high for b in bins)


def test_reliability_with_trials():
    rng = np.random.default_rng(4)
    p = rng.uniform(0.05, 0.25, 4000)
    shots = rng.integers(0, 25, len(p))
    goals = rng.binomial(shots, p)
    bins = reliability_diagram(p, goals, n_bins=5, trials=shots, replicates=200)
    assert sum(b.count for b in bins) == shots.sum()
    assert set(bins[0].as_row()) == {"bin_mean_forecast", "observed_freq", "count", "bar_low", "bar_high"}
    with pytest.raises(ValueError):
        reliability_diagram(p, goals, n_bins=1)
