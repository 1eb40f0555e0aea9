"""Recalibration of shot-success forecasts.

Two calibrators are available: Platt scaling, ``1 / (1 + exp(A + b*p))``,
and blending with the climatology, ``alpha*p + (1 - alpha)*p_c``.  Both are
fitted by maximum likelihood over team-match samples, each sample counting
as ``shots`` Bernoulli trials with ``goals`` successes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import minimize, minimize_scalar
from scipy.special import expit

from src.main.errors import InsufficientDataError

logger = logging.getLogger(__name__)

MIN_CALIBRATION_SAMPLES = 500
PROB_CLAMP = 1e-9
BLEND_XATOL = 1e-5


class Calibrator(str, Enum):
    BLEND = "blend"
    PLATT = "platt"
    NONE = "none"


@dataclass(frozen=True)
class PlattParams:
    A: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.A) and math.isfinite(self.b)):
            raise ValueError("Platt parameters must be finite")


@dataclass(frozen=True)
class BlendParams:
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


def _as_samples(*columns: ArrayLike) -> Tuple[np.ndarray, ...]:
    arrays = tuple(np.asarray(c, dtype=float) for c in columns)
    if any(a.shape != arrays[0].shape for a in arrays):
        raise ValueError("calibration inputs must have equal length")
    if arrays[0].size == 0 or float(np.sum(arrays[-2])) <= 0:
        raise InsufficientDataError("empty calibration input")
    return arrays


def shot_ignorance(p: ArrayLike, shots: ArrayLike, goals: ArrayLike) -> float:
    """Mean ignorance per shot, in bits."""
    p, shots, goals = _as_samples(p, shots, goals)
    q = np.clip(p, PROB_CLAMP, 1 - PROB_CLAMP)
    total = -np.sum(goals * np.log2(q) + (shots - goals) * np.log2(1 - q))
    return float(total / shots.sum())


def platt_scale(p: Union[float, ArrayLike], params: PlattParams):
    value = expit(-(params.A + params.b * np.asarray(p, dtype=float)))
    return float(value) if np.ndim(value) == 0 else value


def fit_platt(p: ArrayLike, shots: ArrayLike, goals: ArrayLike) -> PlattParams:
    """Maximum-likelihood Platt parameters for raw forecasts *p*."""
    p, shots, goals = _as_samples(p, shots, goals)
    total_shots = shots.sum()
    rate = goals.sum() / total_shots
    clamped_rate = min(max(rate, PROB_CLAMP), 1 - PROB_CLAMP)
    constant = PlattParams(math.log((1 - clamped_rate) / clamped_rate), 0.0)
    if goals.sum() == 0 or goals.sum() == total_shots:
        logger.warning("Degenerate Platt data (rate %.3f); using a constant map", rate)
        return constant

    def objective(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        z = -(theta[0] + theta[1] * p)
        q = expit(z)
        qc = np.clip(q, PROB_CLAMP, 1 - PROB_CLAMP)
        nll = -np.sum(goals * np.log(qc) + (shots - goals) * np.log1p(-qc))
        dz = shots * q - goals
        grad = np.array([-dz.sum(), -(dz * p).sum()])
        return nll / total_shots, grad / total_shots

    result = minimize(
        objective,
        np.array([constant.A, constant.b]),
        jac=True,
        method="BFGS",
        options={"gtol": 1e-8, "maxiter": 200},
    )
    if not result.success:
        logger.debug("Platt fit: %s", result.message)
    return PlattParams(float(result.x[0]), float(result.x[1]))


def blend(p: Union[float, ArrayLike], p_c: Union[float, ArrayLike], params: BlendParams):
    value = params.alpha * np.asarray(p, dtype=float) + (1 - params.alpha) * np.asarray(p_c, dtype=float)
    return float(value) if np.ndim(value) == 0 else value


def fit_blend(p: ArrayLike, p_c: ArrayLike, shots: ArrayLike, goals: ArrayLike) -> BlendParams:
    """Blend weight minimising mean ignorance of the blended forecasts."""
    p, p_c, shots, goals = _as_samples(p, p_c, shots, goals)

    def objective(alpha: float) -> float:
        return shot_ignorance(alpha * p + (1 - alpha) * p_c, shots, goals)

    result = minimize_scalar(
        objective, bounds=(0.0, 1.0), method="bounded", options={"xatol": BLEND_XATOL}
    )
    best_alpha, best_value = float(result.x), float(result.fun)
    # The bounded search never evaluates the endpoints themselves.
    for edge in (0.0, 1.0):
        value = objective(edge)
        if value <= best_value:
            best_alpha, best_value = edge, value
    return BlendParams(min(max(best_alpha, 0.0), 1.0))


@dataclass(frozen=True)
class CalibrationFit:
    """Both calibrators fitted on one training set; inactive below the sample minimum."""

    samples: int
    platt: Optional[PlattParams] = None
    blend: Optional[BlendParams] = None

    @property
    def active(self) -> bool:
        return self.platt is not None and self.blend is not None

    def apply(self, calibrator: Calibrator, p: float, p_c: float) -> float:
        if calibrator is Calibrator.NONE:
            return p
        if not self.active:
            return p_c
        if calibrator is Calibrator.PLATT:
            return platt_scale(p, self.platt)
        return blend(p, p_c, self.blend)


def fit_calibrators(
    p: ArrayLike,
    p_c: ArrayLike,
    shots: ArrayLike,
    goals: ArrayLike,
    min_samples: int = MIN_CALIBRATION_SAMPLES,
) -> CalibrationFit:
    p = np.asarray(p, dtype=float)
    if p.size < min_samples or float(np.sum(shots)) <= 0:
        return CalibrationFit(int(p.size))
    return CalibrationFit(
        samples=int(p.size),
        platt=fit_platt(p, shots, goals),
        blend=fit_blend(p, p_c, shots, goals),
    )
