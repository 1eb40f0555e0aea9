"""CSV and JSON output of backtests and sweeps.

Floats are written with 9 significant digits and JSON keys are sorted, so
two runs of the same configuration produce identical files.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from src.main.errors import DataError
from src.main.models import Market
from src.main.tools.backtest import RunReport, SweepReport

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.9g"


def sig9(value: Any) -> Any:
    """Round floats (recursively) to 9 significant digits."""
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return value
        return float(f"{value:.9g}")
    if isinstance(value, dict):
        return {str(k): sig9(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sig9(v) for v in value]
    return value


def _write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path.write_text(json.dumps(sig9(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_csv(path: Path, rows: List[Dict[str, Any]], columns: List[str]) -> Path:
    frame = pd.DataFrame(rows, columns=columns)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


FORECAST_COLUMNS = [
    "match_id", "league_id", "season_id", "date", "market", "variant", "features", "predictor",
    "p_home", "p_draw", "p_away", "p_over", "p_under",
    "odds_home", "odds_draw", "odds_away", "odds_over", "odds_under",
    "outcome", "burn_in", "evaluated",
]

SHOT_COLUMNS = [
    "match_id", "league_id", "date", "shots_pred_home", "shots_pred_away", "p_climatology",
    "p_raw_home", "p_raw_away", "p_home", "p_away", "p_blend_home", "p_blend_away",
    "p_platt_home", "p_platt_away", "calibrated", "fallback", "burn_in", "evaluated",
]

RELIABILITY_COLUMNS = ["bin_mean_forecast", "observed_freq", "count", "bar_low", "bar_high"]
BET_COLUMNS = ["book", "match_id", "market", "outcome", "odds", "fraction", "stake", "result", "profit"]


def _forecast_row(row) -> Dict[str, Any]:
    names = ("home", "draw", "away") if row.market is Market.MATCH_1X2 else ("over", "under")
    record = {
        "match_id": row.match_id,
        "league_id": row.league_id,
        "season_id": row.season_id,
        "date": row.date.isoformat(),
        "market": row.market.value,
        "variant": row.variant.value,
        "features": row.features.value,
        "predictor": row.predictor,
        "outcome": names[row.outcome],
        "burn_in": int(row.burn_in),
        "evaluated": int(row.evaluated),
    }
    for name, p, o in zip(names, row.probabilities, row.odds):
        record[f"p_{name}"] = p
        record[f"odds_{name}"] = o
    return record


def _shot_row(forecast) -> Dict[str, Any]:
    item = forecast.inputs
    return {
        "match_id": item.match.match_id,
        "league_id": item.match.league_id,
        "date": item.match.date.isoformat(),
        "shots_pred_home": item.shots_pred[0],
        "shots_pred_away": item.shots_pred[1],
        "p_climatology": item.p_c,
        "p_raw_home": item.p_raw[0],
        "p_raw_away": item.p_raw[1],
        "p_home": forecast.p_used[0],
        "p_away": forecast.p_used[1],
        "p_blend_home": forecast.p_blend[0],
        "p_blend_away": forecast.p_blend[1],
        "p_platt_home": forecast.p_platt[0],
        "p_platt_away": forecast.p_platt[1],
        "calibrated": int(forecast.calibrated),
        "fallback": int(item.fallback),
        "burn_in": int(item.burn_in),
        "evaluated": int(item.evaluated),
    }


def evaluation_payload(report: RunReport) -> Dict[str, Any]:
    config = report.config
    calibration = report.calibration
    return {
        "config": config.model_dump(mode="json"),
        "half_life": report.half_life,
        "counts": report.counts,
        "skipped": report.skipped,
        "gap_params": {league: asdict(p) for league, p in report.gap_params.items()},
        "calibration": {
            "calibrator": config.calibrator.value,
            "samples": calibration.samples if calibration else 0,
            "platt": asdict(calibration.platt) if calibration and calibration.platt else None,
            "blend": asdict(calibration.blend) if calibration and calibration.blend else None,
        },
        "reliability": {
            "binning": "equal-count",
            "bins": config.reliability_bins,
            "replicates": config.reliability_replicates,
            "seed": config.seed,
        },
        "evaluation": report.evaluation,
        "betting": {key: result.summary() for key, result in report.betting.items()},
        "audit": report.audit,
    }


def write_run_report(report: RunReport, out_dir: Path) -> List[Path]:
    """Write every file of one run into *out_dir*."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [
        _write_csv(out_dir / "forecasts.csv", [_forecast_row(r) for r in report.forecasts], FORECAST_COLUMNS),
        _write_csv(out_dir / "shot_forecasts.csv", [_shot_row(f) for f in report.shot_forecasts], SHOT_COLUMNS),
        _write_json(out_dir / "evaluation.json", evaluation_payload(report)),
    ]
    for name in ("raw", "blend", "platt"):
        bins = report.reliability.get(name, [])
        written.append(
            _write_csv(out_dir / f"reliability_{name}.csv", [b.as_row() for b in bins], RELIABILITY_COLUMNS)
        )
    bets = [
        {
            "book": key,
            "match_id": bet.match_id,
            "market": bet.market.value,
            "outcome": bet.outcome,
            "odds": bet.odds,
            "fraction": bet.fraction,
            "stake": bet.stake,
            "result": bet.result.value,
            "profit": bet.profit,
        }
        for key, result in report.betting.items()
        for bet in result.ledger
    ]
    written.append(_write_csv(out_dir / "bets.csv", bets, BET_COLUMNS))
    logger.info("Wrote %d report files to %s", len(written), out_dir)
    return written


def half_life_dirname(half_life: float) -> str:
    return f"H{half_life:g}"


def write_sweep_report(sweep: SweepReport, out_dir: Path) -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    for half_life, report in sorted(sweep.runs.items()):
        written.extend(write_run_report(report, out_dir / half_life_dirname(half_life)))
    rows = sweep.rows()
    columns = sorted({key for row in rows for key in row} - {"half_life"})
    written.append(_write_csv(out_dir / "sweep.csv", rows, ["half_life"] + columns))
    best = {key: sweep.best_half_life(key) for key in columns if key.startswith(("shots_", "1x2_", "ou25_"))}
    written.append(
        _write_json(
            out_dir / "sweep.json",
            {"config": sweep.config.model_dump(mode="json"), "rows": rows, "best_half_life": best},
        )
    )
    return written


def load_report(path: Path) -> Dict[str, Any]:
    """Read ``evaluation.json`` or ``sweep.json`` from a file or an output directory."""
    path = Path(path)
    if path.is_dir():
        candidates = [path / "sweep.json", path / "evaluation.json"]
        path = next((c for c in candidates if c.exists()), candidates[-1])
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise DataError(f"no report at {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"unreadable report {path}: {exc}") from exc


def report_kind(payload: Dict[str, Any]) -> Optional[str]:
    if "rows" in payload:
        return "sweep"
    if "evaluation" in payload:
        return "run"
    return None
