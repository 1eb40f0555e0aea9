"""Expected-goals predictors and the regressions that turn them into forecasts.

Expected goals are predicted shots times shot-success probability, either
the fitted probability (``Variant.MODEL``) or the league climatology
(``Variant.CLIMATOLOGY``).  Their difference feeds an ordered logistic model
of the match result (ordered Away < Draw < Home) and their sum a logistic
model of over 2.5 goals.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import minimize
from scipy.special import expit, logit

from src.main.errors import InsufficientDataError
from src.main.models import Market, Outcome

logger = logging.getLogger(__name__)

COEF_CAP = 50.0
MIN_REGRESSION_ROWS = 200
MIN_CUT_GAP = 1e-6
TINY = 1e-300


class Variant(str, Enum):
    MODEL = "model"
    CLIMATOLOGY = "climatology"


@dataclass(frozen=True)
class GoalExpectation:
    home: float
    away: float
    variant: Variant = Variant.MODEL

    def __post_init__(self):
        if self.home < 0 or self.away < 0:
            raise ValueError("expected goals must be non-negative")


def expected_goals(shots: float, p: float) -> float:
    return shots * p


def outcome_predictor(expectation: GoalExpectation) -> float:
    return expectation.home - expectation.away


def totals_predictor(expectation: GoalExpectation) -> float:
    return expectation.home + expectation.away


@dataclass(frozen=True)
class OrderedLogitParams:
    beta: np.ndarray
    c1: float
    c2: float

    def __post_init__(self):
        if not self.c1 < self.c2:
            raise ValueError("cutpoints must satisfy c1 < c2")


@dataclass(frozen=True)
class LogitParams:
    intercept: float
    beta: np.ndarray


def _design(X: ArrayLike) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _ordinal_classes(y: Union[Sequence[Outcome], ArrayLike]) -> np.ndarray:
    """Map outcomes to ordinal classes 0 (away), 1 (draw), 2 (home)."""
    index = np.array([o.index if isinstance(o, Outcome) else int(o) for o in y], dtype=int)
    if np.any((index < 0) | (index > 2)):
        raise ValueError("outcome indices must be 0, 1 or 2")
    return 2 - index


def _class_terms(theta: np.ndarray, X: np.ndarray, k: np.ndarray):
    n_features = X.shape[1]
    beta, c1, c2 = theta[:n_features], theta[n_features], theta[n_features + 1]
    eta = X @ beta
    cuts = np.array([-np.inf, c1, c2, np.inf])
    upper, lower = cuts[k + 1] - eta, cuts[k] - eta
    f_upper, f_lower = expit(upper), expit(lower)
    prob = np.where(k == 0, f_upper, np.where(k == 2, expit(-lower), f_upper - f_lower))
    return np.maximum(prob, TINY), f_upper * (1 - f_upper), f_lower * (1 - f_lower)


def ordered_logit_nll(theta: ArrayLike, X: ArrayLike, y) -> float:
    """Negative log-likelihood at natural parameters ``(beta..., c1, c2)``."""
    X, k = _design(X), _ordinal_classes(y)
    prob, _, _ = _class_terms(np.asarray(theta, dtype=float), X, k)
    return float(-np.sum(np.log(prob)))


def ordered_logit_grad(theta: ArrayLike, X: ArrayLike, y) -> np.ndarray:
    X, k = _design(X), _ordinal_classes(y)
    return _ordered_grad(np.asarray(theta, dtype=float), X, k)


def _ordered_grad(theta: np.ndarray, X: np.ndarray, k: np.ndarray) -> np.ndarray:
    prob, d_upper, d_lower = _class_terms(theta, X, k)
    d_upper, d_lower = d_upper / prob, d_lower / prob
    grad_beta = X.T @ (d_upper - d_lower)
    grad_c1 = -np.sum(d_upper[k == 0]) + np.sum(d_lower[k == 1])
    grad_c2 = -np.sum(d_upper[k == 1]) + np.sum(d_lower[k == 2])
    return np.concatenate([grad_beta, [grad_c1, grad_c2]])


def fit_ordered_logit(X: ArrayLike, y) -> OrderedLogitParams:
    """Maximum-likelihood proportional-odds fit.

    The optimiser works on ``(beta, c1, c2 - c1)`` with the gap bounded
    below, and every coefficient bounded by ``COEF_CAP``.
    """
    X, k = _design(X), _ordinal_classes(y)
    n_obs, n_features = X.shape
    if n_obs < n_features + 3:
        raise InsufficientDataError(f"need at least {n_features + 3} observations, got {n_obs}")
    counts = np.bincount(k, minlength=3)
    if np.any(counts == 0):
        raise InsufficientDataError("degenerate outcome set")

    cumulative = np.cumsum(counts)[:2] / n_obs
    start_c1, start_c2 = logit(cumulative)
    x0 = np.concatenate([np.zeros(n_features), [start_c1, start_c2 - start_c1]])

    def objective(z: np.ndarray) -> Tuple[float, np.ndarray]:
        theta = z.copy()
        theta[-1] = z[-2] + z[-1]
        prob, _, _ = _class_terms(theta, X, k)
        grad = _ordered_grad(theta, X, k)
        grad[-2] += grad[-1]
        return float(-np.sum(np.log(prob))), grad

    bounds = [(-COEF_CAP, COEF_CAP)] * (n_features + 1) + [(MIN_CUT_GAP, 2 * COEF_CAP)]
    result = minimize(objective, x0, jac=True, method="L-BFGS-B", bounds=bounds)
    if not result.success:
        logger.warning("Ordered logit did not converge: %s", result.message)
    beta = result.x[:n_features]
    if np.any(np.abs(beta) >= COEF_CAP - 1e-6):
        logger.warning("Ordered logit coefficients hit the cap of %s (separation)", COEF_CAP)
    c1 = float(result.x[-2])
    return OrderedLogitParams(beta=np.array(beta), c1=c1, c2=c1 + float(result.x[-1]))


def predict_ordered_logit(params: OrderedLogitParams, x: ArrayLike) -> np.ndarray:
    """Probabilities ``(p_home, p_draw, p_away)`` for one predictor vector."""
    eta = float(np.dot(np.atleast_1d(np.asarray(x, dtype=float)), params.beta))
    p_away = float(expit(params.c1 - eta))
    p_draw = float(expit(params.c2 - eta) - expit(params.c1 - eta))
    return np.array([1.0 - p_away - p_draw, p_draw, p_away])


def fit_logit(X: ArrayLike, y: ArrayLike) -> LogitParams:
    """Binary logistic regression by maximum likelihood, coefficients capped."""
    X = _design(X)
    y = np.asarray(y, dtype=float)
    if len(y) != X.shape[0]:
        raise ValueError("X and y lengths differ")
    if len(y) == 0:
        raise InsufficientDataError("empty regression input")
    design = np.column_stack([np.ones(len(y)), X])

    def objective(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        z = design @ theta
        nll = np.sum(np.logaddexp(0.0, z) - y * z)
        return float(nll), design.T @ (expit(z) - y)

    bounds = [(-COEF_CAP, COEF_CAP)] * design.shape[1]
    result = minimize(objective, np.zeros(design.shape[1]), jac=True, method="L-BFGS-B", bounds=bounds)
    if not result.success:
        logger.warning("Logistic fit did not converge: %s", result.message)
    if np.any(np.abs(result.x) >= COEF_CAP - 1e-6):
        logger.warning("Logistic coefficients hit the cap of %s (separation)", COEF_CAP)
    return LogitParams(intercept=float(result.x[0]), beta=np.array(result.x[1:]))


def predict_logit(params: LogitParams, x: ArrayLike) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(expit(params.intercept + np.dot(x, params.beta)))


def climatological_frequencies(y: ArrayLike, n_classes: int) -> np.ndarray:
    """Empirical class frequencies; uniform when *y* is empty."""
    y = np.asarray(y, dtype=int)
    if y.size == 0:
        return np.full(n_classes, 1.0 / n_classes)
    return np.bincount(y, minlength=n_classes)[:n_classes] / y.size


@dataclass(frozen=True)
class MarketModel:
    """A fitted forecaster for one market, or class frequencies during cold start.

    Forecast vectors follow the odds order: ``(home, draw, away)`` for 1X2
    and ``(over, under)`` for totals.
    """

    market: Market
    rows: int
    ordered: Optional[OrderedLogitParams] = None
    logistic: Optional[LogitParams] = None
    frequencies: Optional[np.ndarray] = None

    def predict(self, x: ArrayLike) -> np.ndarray:
        if self.ordered is not None:
            return predict_ordered_logit(self.ordered, x)
        if self.logistic is not None:
            p_over = predict_logit(self.logistic, x)
            return np.array([p_over, 1.0 - p_over])
        return np.array(self.frequencies)


def fit_market_model(
    market: Market, X: ArrayLike, y: ArrayLike, min_rows: int = MIN_REGRESSION_ROWS
) -> MarketModel:
    """Fit the market's regression once *min_rows* training rows exist.

    *y* holds forecast-vector indices: ``Outcome.index`` for 1X2, 0 (over)
    or 1 (under) for totals.
    """
    y = np.asarray(y, dtype=int)
    n_classes = 3 if market is Market.MATCH_1X2 else 2
    frequencies = climatological_frequencies(y, n_classes)
    if len(y) < min_rows:
        return MarketModel(market, len(y), frequencies=frequencies)
    try:
        if market is Market.MATCH_1X2:
            return MarketModel(market, len(y), ordered=fit_ordered_logit(X, y))
        return MarketModel(market, len(y), logistic=fit_logit(X, (y == 0).astype(float)))
    except InsufficientDataError as exc:
        logger.warning("%s regression unavailable (%s); using frequencies", market.value, exc)
        return MarketModel(market, len(y), frequencies=frequencies)
