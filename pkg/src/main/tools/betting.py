"""Level Stakes and normalized Kelly betting against maximum bookmaker odds.

A bet is placed on an outcome whenever the forecast probability strictly
exceeds the odds-implied probability ``1/o``, tested as ``o*p - 1 > 0`` so that
every placed bet has a positive Kelly fraction.  Level Stakes puts one unit on
every such bet; Kelly stakes the Kelly fraction, rescaled after the whole
backtest so the mean stake over placed bets is one.  The rescaling uses the
complete bet list, so it is an accounting convention for comparing the two
strategies rather than something a bettor could execute live.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from itertools import accumulate
from typing import Dict, List, Mapping, NamedTuple, Sequence, Tuple

from src.main.models import Market

logger = logging.getLogger(__name__)


class KellyNumerator(str, Enum):
    """``standard`` is ``o*p - 1``; ``as_printed`` keeps the ``o + p - 1`` variant."""

    STANDARD = "standard"
    AS_PRINTED = "as_printed"


class Strategy(str, Enum):
    LEVEL_STAKES = "level_stakes"
    KELLY = "kelly"


class BetResult(str, Enum):
    WON = "won"
    LOST = "lost"


def odds_implied(odds: float) -> float:
    if not odds > 1.0:
        raise ValueError(f"decimal odds must exceed 1.0, got {odds}")
    return 1.0 / odds


def level_stakes_decide(probability: float, implied: float) -> bool:
    return probability > implied


def has_value(probability: float, odds: float) -> bool:
    """Placement rule shared by every strategy: positive expected return ``o*p - 1``."""
    return odds * probability - 1.0 > 0.0


def kelly_fraction(
    probability: float, odds: float, numerator: KellyNumerator = KellyNumerator.STANDARD
) -> float:
    if not odds > 1.0:
        raise ValueError(f"decimal odds must exceed 1.0, got {odds}")
    if numerator is KellyNumerator.AS_PRINTED:
        edge = odds + probability - 1.0
    else:
        edge = odds * probability - 1.0
    return max(edge / (odds - 1.0), 0.0)


def normalize_stakes(fractions: Sequence[float]) -> List[float]:
    """Scale *fractions* so their mean is exactly one."""
    if any(f < 0 for f in fractions):
        raise ValueError("fractions must be non-negative")
    total = sum(fractions)
    if total <= 0:
        raise ValueError("no bets placed")
    k = len(fractions) / total
    return [k * f for f in fractions]


@dataclass(frozen=True)
class BetCandidate:
    """One priced outcome with a forecast, before any strategy is applied."""

    match_id: str
    date: date
    market: Market
    outcome: str
    probability: float
    odds: float


@dataclass(frozen=True)
class BetDraft:
    match_id: str
    market: Market
    outcome: str
    odds: float
    fraction: float
    stake: float


@dataclass(frozen=True)
class BetRecord:
    match_id: str
    market: Market
    outcome: str
    odds: float
    fraction: float
    stake: float
    result: BetResult

    def __post_init__(self):
        if self.stake < 0:
            raise ValueError("stake must be non-negative")

    @property
    def profit(self) -> float:
        if self.result is BetResult.WON:
            return self.stake * (self.odds - 1.0)
        return -self.stake


class Settlement(NamedTuple):
    profit_series: List[float]
    total_profit: float
    bets_placed: int
    ledger: List[BetRecord]


def settle(drafts: Sequence[BetDraft], outcomes: Mapping[Tuple[str, Market], str]) -> Settlement:
    """Settle *drafts* against realised outcomes keyed by ``(match_id, market)``.

    Zero-stake drafts are dropped; ``profit_series`` is cumulative.
    """
    ledger: List[BetRecord] = []
    for draft in drafts:
        if draft.stake == 0:
            continue
        try:
            realised = outcomes[(draft.match_id, draft.market)]
        except KeyError:
            raise ValueError(f"missing outcome for {draft.match_id} {draft.market.value}") from None
        result = BetResult.WON if realised == draft.outcome else BetResult.LOST
        ledger.append(BetRecord(draft.match_id, draft.market, draft.outcome, draft.odds,
                                draft.fraction, draft.stake, result))
    series = list(accumulate(bet.profit for bet in ledger))
    return Settlement(series, series[-1] if series else 0.0, len(ledger), ledger)


@dataclass
class StrategyResult:
    strategy: Strategy
    kelly_numerator: KellyNumerator
    ledger: List[BetRecord] = field(default_factory=list)
    profit_series: List[float] = field(default_factory=list)
    total_profit: float = 0.0
    bets_placed: int = 0
    mean_stake: float = 0.0
    multi_bet_matches: int = 0

    def summary(self) -> Dict[str, object]:
        return {
            "strategy": self.strategy.value,
            "kelly_numerator": self.kelly_numerator.value,
            "total_profit": self.total_profit,
            "bets_placed": self.bets_placed,
            "mean_stake": self.mean_stake,
            "multi_bet_matches": self.multi_bet_matches,
        }


def run_strategy(
    candidates: Sequence[BetCandidate],
    outcomes: Mapping[Tuple[str, Market], str],
    strategy: Strategy,
    kelly_numerator: KellyNumerator = KellyNumerator.STANDARD,
) -> StrategyResult:
    """Pick bets from *candidates*, size them, normalize and settle."""
    result = StrategyResult(strategy, kelly_numerator)
    if any(not c.odds > 1.0 for c in candidates):
        raise ValueError("decimal odds must exceed 1.0")
    placed = [c for c in candidates if has_value(c.probability, c.odds)]
    if not placed:
        logger.info("%s: no bets placed", strategy.value)
        return result

    if strategy is Strategy.KELLY:
        fractions = [kelly_fraction(c.probability, c.odds, kelly_numerator) for c in placed]
    else:
        fractions = [1.0] * len(placed)
    stakes = normalize_stakes(fractions)
    drafts = [
        BetDraft(c.match_id, c.market, c.outcome, c.odds, f, s)
        for c, f, s in zip(placed, fractions, stakes)
    ]
    settlement = settle(drafts, outcomes)

    per_match = Counter((bet.match_id, bet.market) for bet in settlement.ledger)
    result.ledger = settlement.ledger
    result.profit_series = settlement.profit_series
    result.total_profit = settlement.total_profit
    result.bets_placed = settlement.bets_placed
    result.mean_stake = sum(stakes) / len(stakes)
    result.multi_bet_matches = sum(1 for n in per_match.values() if n > 1)
    logger.info(
        "%s: %d bets, profit %.3f", strategy.value, result.bets_placed, result.total_profit
    )
    return result
