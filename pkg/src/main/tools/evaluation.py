"""Proper scoring rules, relative skill and reliability diagrams.

Outcome indices are 0-based positions in the probability vector.  Ignorance
is in bits.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-9
SIMPLEX_TOL = 1e-9


def _simplex(p: ArrayLike, y: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValueError("probability vector needs at least two outcomes")
    if np.any(p < -SIMPLEX_TOL) or np.any(p > 1 + SIMPLEX_TOL) or abs(p.sum() - 1) > SIMPLEX_TOL:
        raise ValueError(f"not a probability vector: {p.tolist()}")
    if not 0 <= y < p.size:
        raise ValueError(f"outcome index {y} out of range")
    return p


def brier(p: ArrayLike, y: int) -> float:
    p = _simplex(p, y)
    o = np.zeros_like(p)
    o[y] = 1.0
    return float(np.sum((p - o) ** 2))


def rps(p: ArrayLike, y: int) -> float:
    """Ranked probability score over ordered categories."""
    p = _simplex(p, y)
    o = np.zeros_like(p)
    o[y] = 1.0
    return float(np.sum((np.cumsum(p)[:-1] - np.cumsum(o)[:-1]) ** 2))


def ignorance(p: ArrayLike, y: int) -> float:
    p = _simplex(p, y)
    return -math.log2(max(float(p[y]), PROB_FLOOR))


def is_clamped(p: ArrayLike, y: int) -> bool:
    """True when ``ignorance`` had to floor the outcome probability."""
    return float(np.asarray(p, dtype=float)[y]) < PROB_FLOOR


@dataclass(frozen=True)
class ScoredForecast:
    ref: str
    probabilities: Tuple[float, ...]
    outcome: int
    weight: float = 1.0

    def __post_init__(self):
        _simplex(self.probabilities, self.outcome)

    def scores(self, ordered: bool = True) -> Dict[str, float]:
        result = {
            "brier": brier(self.probabilities, self.outcome),
            "ignorance": ignorance(self.probabilities, self.outcome),
        }
        if ordered:
            result["rps"] = rps(self.probabilities, self.outcome)
        return result


def relative_skill(
    scores_model: Sequence[float],
    scores_baseline: Sequence[float],
    weights: Optional[Sequence[float]] = None,
) -> float:
    """Paired mean score difference; negative means the model is better."""
    model = np.asarray(scores_model, dtype=float)
    baseline = np.asarray(scores_baseline, dtype=float)
    if model.shape != baseline.shape:
        raise ValueError(f"unpaired scores: {model.size} vs {baseline.size}")
    if model.size == 0:
        raise ValueError("no scores to compare")
    if weights is None:
        return float(np.mean(model - baseline))
    weights = np.asarray(weights, dtype=float)
    if weights.shape != model.shape:
        raise ValueError("weights must pair with scores")
    return float(np.sum(weights * (model - baseline)) / np.sum(weights))


def binomial_scores(p: ArrayLike, shots: ArrayLike, goals: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Ignorance and Brier summed over each sample's shots.

    Each shot is a two-outcome forecast, so its Brier score is ``2*(p - o)**2``.
    """
    p = np.asarray(p, dtype=float)
    shots = np.asarray(shots, dtype=float)
    goals = np.asarray(goals, dtype=float)
    q = np.clip(p, PROB_FLOOR, 1 - PROB_FLOOR)
    ign = -(goals * np.log2(q) + (shots - goals) * np.log2(1 - q))
    bri = 2 * (goals * (1 - p) ** 2 + (shots - goals) * p ** 2)
    return ign, bri


@dataclass(frozen=True)
class ReliabilityBin:
    mean_forecast: float
    observed_frequency: float
    count: int
    bar_low: float
    bar_high: float

    def as_row(self) -> Dict[str, float]:
        return {
            "bin_mean_forecast": self.mean_forecast,
            "observed_freq": self.observed_frequency,
            "count": self.count,
            "bar_low": self.bar_low,
            "bar_high": self.bar_high,
        }


def reliability_diagram(
    p: ArrayLike,
    outcomes: ArrayLike,
    n_bins: int = 10,
    trials: Optional[ArrayLike] = None,
    replicates: int = 1000,
    seed: int = 0,
) -> List[ReliabilityBin]:
    """Equal-count reliability bins with Monte Carlo 95% consistency bars.

    ``outcomes`` are successes per forecast; with ``trials`` a forecast
    stands for that many independent binary events (a team-match with
    ``shots`` trials and ``goals`` successes).  Bars are the 2.5 and 97.5
    percentiles of bin frequencies simulated under perfect reliability.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    p = np.asarray(p, dtype=float)
    successes = np.asarray(outcomes, dtype=float)
    trials = np.ones_like(p) if trials is None else np.asarray(trials, dtype=float)
    if not (p.shape == successes.shape == trials.shape):
        raise ValueError("forecasts, outcomes and trials must have equal length")
    if p.size < n_bins:
        raise ValueError(f"need at least {n_bins} forecasts, got {p.size}")

    edges = np.unique(np.quantile(p, np.linspace(0.0, 1.0, n_bins + 1)))
    bin_of = np.searchsorted(edges[1:-1], p, side="right")
    counts = np.bincount(bin_of, weights=trials, minlength=len(edges) - 1)
    populated = np.flatnonzero(counts > 0)
    if len(populated) < n_bins:
        logger.warning("Reliability diagram reduced from %d to %d bins", n_bins, len(populated))

    rng = np.random.default_rng(seed)
    n_slots = len(counts)
    simulated = np.empty((replicates, n_slots))
    whole_trials = trials.astype(np.int64)
    for r in range(replicates):
        draws = rng.binomial(whole_trials, p)
        simulated[r] = np.bincount(bin_of, weights=draws, minlength=n_slots)

    forecast_mass = np.bincount(bin_of, weights=trials * p, minlength=n_slots)
    observed = np.bincount(bin_of, weights=successes, minlength=n_slots)
    bins = []
    for b in populated:
        low, high = np.percentile(simulated[:, b] / counts[b], [2.5, 97.5])
        bins.append(
            ReliabilityBin(
                mean_forecast=float(forecast_mass[b] / counts[b]),
                observed_frequency=float(observed[b] / counts[b]),
                count=int(round(counts[b])),
                bar_low=float(low),
                bar_high=float(high),
            )
        )
    return bins
