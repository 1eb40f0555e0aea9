"""End-to-end backtest: per-date fitting, forecasting, scoring and betting.

The run has two passes.  The first works league by league: GAP shot
predictions and the climatology come from one chronological replay, then the
shot model is fitted once per match date (cached in SQLite).  The second
pass walks every league together in date order, because the calibrators and
the outcome regressions are pooled across leagues: for each date they are
fitted on rows from strictly earlier dates, the date's forecasts are made,
and only then are its rows added to the training sets.

Matches in burn-in, or in the seasons used to fit the GAP parameters, are
forecast like any other but left out of skill and profit.
"""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from itertools import groupby
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from src.main.errors import EmptyReportError, InsufficientDataError, UnratedTeamError
from src.main.models import IngestTally, Market, MatchRecord
from src.main.settings import RunConfig
from src.main.tools import registry
from src.main.tools.betting import BetCandidate, Strategy, StrategyResult, run_strategy
from src.main.tools.calibration import Calibrator, CalibrationFit, fit_calibrators
from src.main.tools.data_ingest import (
    SeasonIndex,
    build_season_index,
    chronological,
    extract_odds,
    is_burn_in,
    load_data_dir,
)
from src.main.tools.evaluation import (
    ReliabilityBin,
    binomial_scores,
    brier,
    ignorance,
    is_clamped,
    relative_skill,
    reliability_diagram,
    rps,
)
from src.main.tools.gap_ratings import (
    DEFAULT_PARAMS,
    GapParams,
    GapState,
    fit_gap_params,
    predict_shots,
    replay,
)
from src.main.tools.outcome_models import (
    GoalExpectation,
    MarketModel,
    Variant,
    expected_goals,
    fit_market_model,
    outcome_predictor,
    totals_predictor,
)
from src.main.tools.shot_model import (
    LeagueShotData,
    ShotModelParams,
    climatology,
    fit_league,
    fit_shot_model,
    shot_probabilities,
)

logger = logging.getLogger(__name__)

AUDIT_EVERY = 1000
AUDIT_TOL = 1e-6

MARKET_LABELS: Dict[Market, Tuple[str, ...]] = {
    Market.MATCH_1X2: ("H", "D", "A"),
    Market.OVER_UNDER_25: ("over", "under"),
}

T = TypeVar("T")
R = TypeVar("R")


class FeatureSet(str, Enum):
    BASE = "base"
    ODDS = "odds"


def _map(fn: Callable[[T], R], items: Sequence[T], workers: int) -> List[R]:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def market_outcome(match: MatchRecord, market: Market) -> int:
    """Index of the realised outcome in the market's forecast vector."""
    if market is Market.MATCH_1X2:
        return match.outcome.index
    return 0 if match.total_goals > 2 else 1


# ---------------------------------------------------------------------------
# Pass one: per-league preparation
# ---------------------------------------------------------------------------


@dataclass
class LeagueContext:
    """Everything about one league that does not depend on the half life."""

    league_id: str
    matches: List[MatchRecord]
    data_hash: str
    gap_params: GapParams
    gap_state: GapState
    fit_seasons: FrozenSet[str]
    shot_predictions: Dict[str, Tuple[float, float]]
    climatology: Dict[str, Optional[float]]
    shot_data: LeagueShotData


@dataclass(frozen=True)
class MatchInputs:
    match: MatchRecord
    burn_in: bool
    evaluated: bool
    shots_pred: Tuple[float, float]
    p_c: float
    p_raw: Tuple[float, float]
    fallback: bool


def load_matches(config: RunConfig) -> Tuple[List[MatchRecord], IngestTally]:
    records, tally = load_data_dir(config.data_dir, config.leagues)
    return chronological(records), tally


def _leading_seasons(matches: Sequence[MatchRecord], n: int) -> FrozenSet[str]:
    seasons = list(dict.fromkeys(m.season_id for m in matches))
    return frozenset(seasons[:n])


def fit_league_gap(
    config: RunConfig, league_id: str, matches: Sequence[MatchRecord]
) -> Tuple[GapParams, FrozenSet[str]]:
    """GAP parameters from the league's leading seasons.

    The cache key hashes the fitting window only, so a different
    ``gap_fit_seasons`` never reuses parameters fitted on another window.
    """
    fit_seasons = _leading_seasons(matches, config.gap_fit_seasons)
    fit_matches = [m for m in matches if m.season_id in fit_seasons]
    window_hash = registry.league_data_hash(fit_matches)
    if config.use_cache:
        cached = registry.load_gap_state(league_id, window_hash)
        if cached is not None:
            return cached.params, fit_seasons
    params = fit_gap_params(fit_matches) if fit_matches else DEFAULT_PARAMS
    if config.use_cache:
        state, _ = replay(fit_matches, params, league_id=league_id)
        registry.save_gap_state(state, window_hash)
    return params, fit_seasons


def _running_climatology(matches: Sequence[MatchRecord]) -> Dict[str, Optional[float]]:
    """Climatology before each match's date, from one pass over the league."""
    result: Dict[str, Optional[float]] = {}
    goals = shots = 0
    for _, same_day in groupby(matches, key=lambda m: m.date):
        same_day = list(same_day)
        for m in same_day:
            result[m.match_id] = goals / shots if shots else None
        for m in same_day:
            if m.shot_data_valid:
                goals += m.total_goals
                shots += m.home_shots + m.away_shots
    return result


def prepare_league(config: RunConfig, league_id: str, matches: Sequence[MatchRecord]) -> LeagueContext:
    matches = chronological(m for m in matches if m.league_id == league_id)
    data_hash = registry.league_data_hash(matches)
    params, fit_seasons = fit_league_gap(config, league_id, matches)
    state, predictions = replay(matches, params, league_id=league_id)
    logger.info(
        "%s: %d matches, GAP lambda=%.4f phi1=%.4f phi2=%.4f",
        league_id, len(matches), params.lam, params.phi1, params.phi2,
    )
    return LeagueContext(
        league_id=league_id,
        matches=matches,
        data_hash=data_hash,
        gap_params=params,
        gap_state=state,
        fit_seasons=fit_seasons,
        shot_predictions={m.match_id: (home, away) for m, home, away in predictions},
        climatology=_running_climatology(matches),
        shot_data=LeagueShotData.from_matches(matches, league_id),
    )


def prepare_leagues(
    config: RunConfig, matches: Sequence[MatchRecord], workers: int = 1
) -> Dict[str, LeagueContext]:
    leagues = sorted({m.league_id for m in matches if config.league_selected(m.league_id)})
    contexts = _map(lambda league: prepare_league(config, league, matches), leagues, workers)
    return {ctx.league_id: ctx for ctx in contexts}


def _shot_fits(config: RunConfig, ctx: LeagueContext, dates: Iterable[date], half_life: float):
    cached = registry.get_shot_fits(ctx.league_id, half_life, ctx.data_hash) if config.use_cache else {}
    fits: Dict[date, Optional[ShotModelParams]] = {}
    fresh: List[ShotModelParams] = []
    for as_of in sorted(set(dates)):
        if as_of in cached:
            fits[as_of] = cached[as_of]
            continue
        try:
            fits[as_of] = fit_league(ctx.shot_data, as_of, half_life)
            fresh.append(fits[as_of])
        except InsufficientDataError:
            fits[as_of] = None
    if config.use_cache and fresh:
        registry.put_shot_fits(fresh, ctx.data_hash)
    logger.info("%s H=%s: %d shot fits (%d cached)", ctx.league_id, half_life, len(fits), len(fits) - len(fresh))
    return fits


def _probabilities(params: Optional[ShotModelParams], match: MatchRecord, p_c: float):
    if params is None:
        return (p_c, p_c), True
    try:
        return shot_probabilities(params, match.home_team, match.away_team), False
    except UnratedTeamError as exc:
        logger.debug("%s; using climatology", exc)
        return (p_c, p_c), True


def league_inputs(
    config: RunConfig, ctx: LeagueContext, index: SeasonIndex, half_life: float, skipped: Counter
) -> List[MatchInputs]:
    """Shot-level inputs for every league match with shot data and a prior climatology."""
    eligible = []
    for m in ctx.matches:
        if not m.has_shots:
            continue
        if ctx.climatology[m.match_id] is None:
            skipped["no_climatology"] += 1
            continue
        eligible.append(m)
    fits = _shot_fits(config, ctx, (m.date for m in eligible), half_life)

    inputs = []
    for m in eligible:
        p_c = ctx.climatology[m.match_id]
        p_raw, fallback = _probabilities(fits[m.date], m, p_c)
        if fallback:
            skipped["climatology_fallback"] += 1
        burn_in = is_burn_in(m, index, config.burn_in_threshold)
        inputs.append(
            MatchInputs(
                match=m,
                burn_in=burn_in,
                evaluated=not burn_in and m.season_id not in ctx.fit_seasons,
                shots_pred=ctx.shot_predictions[m.match_id],
                p_c=p_c,
                p_raw=p_raw,
                fallback=fallback,
            )
        )
    return inputs


# ---------------------------------------------------------------------------
# Pass two: pooled calibration, regression and forecasting in date order
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShotForecast:
    inputs: MatchInputs
    p_used: Tuple[float, float]
    p_blend: Tuple[float, float]
    p_platt: Tuple[float, float]
    calibrated: bool


@dataclass(frozen=True)
class ForecastRow:
    match_id: str
    league_id: str
    season_id: str
    date: date
    market: Market
    variant: Variant
    features: FeatureSet
    predictor: float
    probabilities: Tuple[float, ...]
    outcome: int
    odds: Tuple[float, ...]
    burn_in: bool
    evaluated: bool

    @property
    def implied(self) -> float:
        """Odds-implied probability of the first outcome (home win or over)."""
        return 1.0 / self.odds[0]


@dataclass
class CalibrationPool:
    """Team-match calibration samples, grown one forecast date at a time."""

    p: List[float] = field(default_factory=list)
    p_c: List[float] = field(default_factory=list)
    shots: List[int] = field(default_factory=list)
    goals: List[int] = field(default_factory=list)

    def add(self, inputs: Iterable[MatchInputs]) -> None:
        for item in inputs:
            m = item.match
            if item.fallback or not m.shot_data_valid:
                continue
            self.p.extend(item.p_raw)
            self.p_c.extend((item.p_c, item.p_c))
            self.shots.extend((m.home_shots, m.away_shots))
            self.goals.extend((m.home_goals, m.away_goals))

    def fit(self) -> CalibrationFit:
        return fit_calibrators(self.p, self.p_c, self.shots, self.goals)


def _calibration_arrays(inputs: Iterable[MatchInputs]):
    pool = CalibrationPool()
    pool.add(inputs)
    return pool.p, pool.p_c, pool.shots, pool.goals


def _calibrated(fit: CalibrationFit, item: MatchInputs):
    def both(calibrator: Calibrator) -> Tuple[float, float]:
        return tuple(fit.apply(calibrator, p, item.p_c) for p in item.p_raw)

    return both


def _predictors(item: MatchInputs, p_used: Tuple[float, float]) -> Dict[Variant, GoalExpectation]:
    s_home, s_away = item.shots_pred
    return {
        Variant.MODEL: GoalExpectation(
            expected_goals(s_home, p_used[0]), expected_goals(s_away, p_used[1]), Variant.MODEL
        ),
        Variant.CLIMATOLOGY: GoalExpectation(
            expected_goals(s_home, item.p_c), expected_goals(s_away, item.p_c), Variant.CLIMATOLOGY
        ),
    }


def _predictor_value(market: Market, expectation: GoalExpectation) -> float:
    if market is Market.MATCH_1X2:
        return outcome_predictor(expectation)
    return totals_predictor(expectation)


def _design(values: Sequence[float], implied: Sequence[float], features: FeatureSet) -> np.ndarray:
    if features is FeatureSet.ODDS:
        return np.column_stack([values, implied])
    return np.asarray(values, dtype=float)[:, None]


def _feature_sets(config: RunConfig) -> List[FeatureSet]:
    return [FeatureSet.BASE, FeatureSet.ODDS] if config.include_odds_predictor else [FeatureSet.BASE]


class RegressionTraining:
    """Base-feature training rows per market and variant, in forecast order."""

    def __init__(self, config: RunConfig):
        self.config = config
        self._columns: Dict[Tuple[Market, Variant], Tuple[List[float], List[float], List[int]]] = {
            (market, variant): ([], [], []) for market in config.markets for variant in Variant
        }

    def add(self, rows: Iterable[ForecastRow]) -> None:
        for r in rows:
            columns = self._columns.get((r.market, r.variant))
            if columns is None or r.features is not FeatureSet.BASE:
                continue
            columns[0].append(r.predictor)
            columns[1].append(r.implied)
            columns[2].append(r.outcome)

    def fit(self) -> Dict[Tuple[Market, Variant, FeatureSet], MarketModel]:
        """One model per market, variant and feature set."""
        models = {}
        for (market, variant), (values, implied, y) in self._columns.items():
            for features in _feature_sets(self.config):
                X = _design(values, implied, features) if y else np.empty((0, 1))
                models[(market, variant, features)] = fit_market_model(market, X, y)
        return models


def fit_regressions(
    config: RunConfig, training: Sequence[ForecastRow]
) -> Dict[Tuple[Market, Variant, FeatureSet], MarketModel]:
    """Fit one model per market, variant and feature set on base-feature rows."""
    collected = RegressionTraining(config)
    collected.add(training)
    return collected.fit()


@dataclass
class ForecastPass:
    shot_forecasts: List[ShotForecast] = field(default_factory=list)
    rows: List[ForecastRow] = field(default_factory=list)
    calibration: Optional[CalibrationFit] = None
    audit_checked: int = 0
    audit_mismatches: int = 0


def _match_rows(
    config: RunConfig,
    item: MatchInputs,
    p_used: Tuple[float, float],
    models: Dict[Tuple[Market, Variant, FeatureSet], MarketModel],
    skipped: Counter,
) -> List[ForecastRow]:
    m = item.match
    expectations = _predictors(item, p_used)
    rows = []
    for market in config.markets:
        odds = extract_odds(m, market)
        if odds is None:
            skipped[f"missing_odds_{market.value}"] += 1
            continue
        for variant, expectation in expectations.items():
            value = _predictor_value(market, expectation)
            for features in _feature_sets(config):
                x = [value, 1.0 / odds[0]] if features is FeatureSet.ODDS else [value]
                probabilities = models[(market, variant, features)].predict(x)
                rows.append(
                    ForecastRow(
                        match_id=m.match_id,
                        league_id=m.league_id,
                        season_id=m.season_id,
                        date=m.date,
                        market=market,
                        variant=variant,
                        features=features,
                        predictor=float(value),
                        probabilities=tuple(float(p) for p in probabilities),
                        outcome=market_outcome(m, market),
                        odds=tuple(odds),
                        burn_in=item.burn_in,
                        evaluated=item.evaluated,
                    )
                )
    return rows


def forecast_pass(
    config: RunConfig,
    inputs: Sequence[MatchInputs],
    skipped: Counter,
    auditor: Optional["Auditor"] = None,
) -> ForecastPass:
    ordered = sorted(inputs, key=lambda i: (i.match.date, i.match.league_id, i.match.sequence))
    result = ForecastPass()
    seen: List[MatchInputs] = []
    pool = CalibrationPool()
    training = RegressionTraining(config)
    for day, same_day in groupby(ordered, key=lambda i: i.match.date):
        same_day = list(same_day)
        calibration = pool.fit()
        models = training.fit()
        day_start = len(result.rows)
        for item in same_day:
            both = _calibrated(calibration, item)
            p_used = both(config.calibrator)
            result.shot_forecasts.append(
                ShotForecast(item, p_used, both(Calibrator.BLEND), both(Calibrator.PLATT), calibration.active)
            )
            for row in _match_rows(config, item, p_used, models, skipped):
                if auditor is not None and len(result.rows) % AUDIT_EVERY == 0:
                    result.audit_checked += 1
                    if not auditor.check(row, item, seen, result.rows):
                        result.audit_mismatches += 1
                result.rows.append(row)
        seen.extend(same_day)
        pool.add(same_day)
        training.add(result.rows[day_start:])
        result.calibration = calibration
    return result


class Auditor:
    """Recomputes a forecast using nothing but matches dated before it."""

    def __init__(self, config: RunConfig, contexts: Dict[str, LeagueContext], half_life: float):
        self.config = config
        self.contexts = contexts
        self.half_life = half_life

    def check(
        self,
        row: ForecastRow,
        item: MatchInputs,
        seen: Sequence[MatchInputs],
        rows: Sequence[ForecastRow],
    ) -> bool:
        ctx = self.contexts[row.league_id]
        m = item.match
        earlier = [x for x in ctx.matches if x.date < m.date]
        state, _ = replay(earlier, ctx.gap_params, league_id=ctx.league_id)
        shots_pred = predict_shots(state, m.home_team, m.away_team)
        p_c = climatology(earlier, m.date)
        try:
            params = fit_shot_model(earlier, ctx.league_id, m.date, self.half_life)
        except InsufficientDataError:
            params = None
        p_raw, fallback = _probabilities(params, m, p_c)
        fresh = MatchInputs(m, item.burn_in, item.evaluated, shots_pred, p_c, p_raw, fallback)

        prior_inputs = [x for x in seen if x.match.date < m.date]
        calibration = fit_calibrators(*_calibration_arrays(prior_inputs))
        p_used = _calibrated(calibration, fresh)(self.config.calibrator)
        models = fit_regressions(self.config, [r for r in rows if r.date < m.date])
        recomputed = [
            r for r in _match_rows(self.config, fresh, p_used, models, Counter())
            if (r.market, r.variant, r.features) == (row.market, row.variant, row.features)
        ]
        ok = bool(recomputed) and np.allclose(
            recomputed[0].probabilities, row.probabilities, rtol=0.0, atol=AUDIT_TOL
        )
        if not ok:
            logger.warning("Audit mismatch for %s %s %s", row.match_id, row.market.value, row.variant.value)
        return ok


# ---------------------------------------------------------------------------
# Scoring and betting
# ---------------------------------------------------------------------------


def _mean(values: Sequence[float]) -> Optional[float]:
    return float(np.mean(values)) if len(values) else None


def evaluate_shots(
    config: RunConfig, forecasts: Sequence[ShotForecast]
) -> Tuple[Dict[str, Any], Dict[str, List[ReliabilityBin]]]:
    """Per-shot ignorance and Brier of raw, blended and Platt-scaled forecasts."""
    p = {name: [] for name in ("raw", "blend", "platt", "climatology")}
    shots, goals = [], []
    for f in forecasts:
        m = f.inputs.match
        if not f.inputs.evaluated or not m.shot_data_valid:
            continue
        p["raw"].extend(f.inputs.p_raw)
        p["blend"].extend(f.p_blend)
        p["platt"].extend(f.p_platt)
        p["climatology"].extend((f.inputs.p_c, f.inputs.p_c))
        shots.extend((m.home_shots, m.away_shots))
        goals.extend((m.home_goals, m.away_goals))

    shots_arr, goals_arr = np.asarray(shots, dtype=float), np.asarray(goals, dtype=float)
    summary: Dict[str, Any] = {"samples": len(shots), "shots": int(shots_arr.sum()), "mean": {}, "relative": {}}
    reliability: Dict[str, List[ReliabilityBin]] = {}
    keep = shots_arr > 0
    if not keep.any():
        return summary, reliability

    per_shot = {}
    for name, values in p.items():
        ign, bri = binomial_scores(values, shots_arr, goals_arr)
        per_shot[name] = (ign[keep] / shots_arr[keep], bri[keep] / shots_arr[keep])
        summary["mean"][name] = {
            "ignorance": float(ign.sum() / shots_arr.sum()),
            "brier": float(bri.sum() / shots_arr.sum()),
        }
    weights = shots_arr[keep]
    for name in ("raw", "blend", "platt"):
        summary["relative"][name] = {
            score: relative_skill(per_shot[name][k], per_shot["climatology"][k], weights)
            for k, score in enumerate(("ignorance", "brier"))
        }
        if len(p[name]) >= config.reliability_bins:
            reliability[name] = reliability_diagram(
                p[name], goals_arr, n_bins=config.reliability_bins, trials=shots_arr,
                replicates=config.reliability_replicates, seed=config.seed,
            )
    return summary, reliability


def evaluate_markets(config: RunConfig, rows: Sequence[ForecastRow]) -> Dict[str, Any]:
    """Mean scores of both predictor variants and their paired difference."""
    result: Dict[str, Any] = {}
    clamped = 0
    for market in config.markets:
        result[market.value] = {}
        for features in _feature_sets(config):
            scores: Dict[Variant, Dict[str, Dict[str, float]]] = {v: {} for v in Variant}
            for r in rows:
                if r.evaluated and r.market is market and r.features is features:
                    clamped += is_clamped(r.probabilities, r.outcome)
                    scores[r.variant][r.match_id] = {
                        "ignorance": ignorance(r.probabilities, r.outcome),
                        "brier": brier(r.probabilities, r.outcome),
                        "rps": rps(r.probabilities, r.outcome),
                    }
            paired = sorted(set(scores[Variant.MODEL]) & set(scores[Variant.CLIMATOLOGY]))
            entry: Dict[str, Any] = {"forecasts": len(paired)}
            for variant in Variant:
                entry[variant.value] = {
                    s: _mean([scores[variant][k][s] for k in paired]) for s in ("ignorance", "brier", "rps")
                }
            entry["relative"] = {
                s: relative_skill(
                    [scores[Variant.MODEL][k][s] for k in paired],
                    [scores[Variant.CLIMATOLOGY][k][s] for k in paired],
                ) if paired else None
                for s in ("ignorance", "brier", "rps")
            }
            result[market.value][features.value] = entry
    result["clamped_ignorance"] = clamped
    return result


def simulate_betting(config: RunConfig, rows: Sequence[ForecastRow]) -> Dict[str, StrategyResult]:
    """Level Stakes and Kelly for each market, variant and feature set."""
    outcomes = {
        (r.match_id, r.market): MARKET_LABELS[r.market][r.outcome] for r in rows if r.evaluated
    }
    results: Dict[str, StrategyResult] = {}
    for market in config.markets:
        for variant in Variant:
            for features in _feature_sets(config):
                candidates = [
                    BetCandidate(r.match_id, r.date, market, MARKET_LABELS[market][i], p, o)
                    for r in rows
                    if r.evaluated and r.market is market and r.variant is variant and r.features is features
                    for i, (p, o) in enumerate(zip(r.probabilities, r.odds))
                ]
                for strategy in Strategy:
                    key = f"{market.value}/{variant.value}/{features.value}/{strategy.value}"
                    results[key] = run_strategy(candidates, outcomes, strategy, config.kelly_numerator)
    return results


# ---------------------------------------------------------------------------
# Runs and sweeps
# ---------------------------------------------------------------------------


@dataclass
class RunReport:
    half_life: float
    config: RunConfig
    counts: Dict[str, int]
    skipped: Dict[str, int]
    gap_params: Dict[str, GapParams]
    shot_forecasts: List[ShotForecast]
    forecasts: List[ForecastRow]
    evaluation: Dict[str, Any]
    reliability: Dict[str, List[ReliabilityBin]]
    betting: Dict[str, StrategyResult]
    calibration: Optional[CalibrationFit]
    audit: Optional[Dict[str, int]] = None

    def summary(self) -> Dict[str, Any]:
        """Headline numbers used by sweeps, the servers and ``report``."""
        shots = self.evaluation["shots"]
        row: Dict[str, Any] = {"half_life": self.half_life, "shot_samples": shots["samples"]}
        for name, rel in shots["relative"].items():
            for score, value in rel.items():
                row[f"shots_{name}_{score}"] = value
        for market in self.config.markets:
            for features, entry in self.evaluation["markets"][market.value].items():
                for score, value in entry["relative"].items():
                    row[f"{market.value}_{features}_{score}"] = value
        for key, result in self.betting.items():
            row[f"profit_{key.replace('/', '_')}"] = result.total_profit
        return row


@dataclass
class SweepReport:
    config: RunConfig
    runs: Dict[float, RunReport]

    def rows(self) -> List[Dict[str, Any]]:
        return [self.runs[h].summary() for h in sorted(self.runs)]

    def best_half_life(self, key: str) -> Optional[float]:
        """Half life with the lowest value of summary column *key*."""
        values = [(row[key], row["half_life"]) for row in self.rows() if row.get(key) is not None]
        return min(values)[1] if values else None


@dataclass
class _Prepared:
    matches: List[MatchRecord]
    tally: IngestTally
    index: SeasonIndex
    contexts: Dict[str, LeagueContext]


def _prepare(config: RunConfig) -> _Prepared:
    matches, tally = load_matches(config)
    index = build_season_index(matches)
    contexts = prepare_leagues(config, matches, config.workers)
    return _Prepared(matches, tally, index, contexts)


def _run(config: RunConfig, prepared: _Prepared, half_life: float, workers: int) -> RunReport:
    skipped: Counter = Counter()
    contexts = [prepared.contexts[k] for k in sorted(prepared.contexts)]
    league_skips = [Counter() for _ in contexts]
    per_league = _map(
        lambda pair: league_inputs(config, pair[0], prepared.index, half_life, pair[1]),
        list(zip(contexts, league_skips)),
        workers,
    )
    for counter in league_skips:
        skipped.update(counter)
    inputs = [item for league in per_league for item in league]
    if not inputs:
        raise EmptyReportError("no match has shot data and a prior climatology; nothing to forecast")

    auditor = Auditor(config, prepared.contexts, half_life) if config.audit else None
    passed = forecast_pass(config, inputs, skipped, auditor)
    shot_eval, reliability = evaluate_shots(config, passed.shot_forecasts)
    evaluation = {
        "half_life": half_life,
        "shots": shot_eval,
        "markets": evaluate_markets(config, passed.rows),
    }
    selected = [m for m in prepared.matches if config.league_selected(m.league_id)]
    counts = {
        "matches": len(selected),
        "shot_matches": sum(1 for m in selected if m.has_shots),
        "forecast_matches": len(inputs),
        "burn_in": sum(1 for i in inputs if i.burn_in),
        "gap_fit_season_matches": sum(1 for i in inputs if not i.burn_in and not i.evaluated),
        "evaluated": sum(1 for i in inputs if i.evaluated),
        "forecast_rows": len(passed.rows),
        "ingest_rows_read": prepared.tally.rows_read,
        "ingest_skipped": prepared.tally.skipped_total,
    }
    audit = None
    if config.audit:
        audit = {"audit_checked": passed.audit_checked, "audit_mismatches": passed.audit_mismatches}
    logger.info(
        "H=%s: %d matches forecast, %d evaluated, %d rows",
        half_life, counts["forecast_matches"], counts["evaluated"], counts["forecast_rows"],
    )
    return RunReport(
        half_life=half_life,
        config=config,
        counts=counts,
        skipped=dict(sorted(skipped.items())),
        gap_params={k: prepared.contexts[k].gap_params for k in sorted(prepared.contexts)},
        shot_forecasts=passed.shot_forecasts,
        forecasts=passed.rows,
        evaluation=evaluation,
        reliability=reliability,
        betting=simulate_betting(config, passed.rows),
        calibration=passed.calibration,
        audit=audit,
    )


def run_backtest(config: RunConfig) -> RunReport:
    """One backtest at ``config.half_life``."""
    prepared = _prepare(config)
    if not prepared.contexts:
        raise EmptyReportError("no league selected")
    return _run(config, prepared, config.half_life, config.workers)


def half_life_sweep(config: RunConfig) -> SweepReport:
    """Backtests for every value of ``config.half_life_grid`` over shared data and GAP fits."""
    prepared = _prepare(config)
    if not prepared.contexts:
        raise EmptyReportError("no league selected")
    grid = sorted(set(config.half_life_grid))
    reports = _map(lambda h: _run(config, prepared, h, 1), grid, config.workers)
    for report in reports:
        if report.audit and report.audit["audit_mismatches"]:
            logger.warning("H=%s: %d audit mismatches", report.half_life, report.audit["audit_mismatches"])
    return SweepReport(config, {r.half_life: r for r in reports})

