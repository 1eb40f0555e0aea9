"""Run configuration for ShotQuest.

Environment variables (a ``.env`` file in the working directory is honoured):

* ``SHOTQUEST_DATA_DIR`` – overrides the data directory of a config file.
* ``SHOTQUEST_CACHE_DB`` – SQLite file holding cached model fits.
* ``SHOTQUEST_LOG_LEVEL`` – root log level for the CLI and servers.

Precedence for ``data_dir`` is: CLI flag, environment, config file.
"""

from __future__ import annotations

import json
import math
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, List, Literal, Mapping, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

from src.main.errors import ConfigError
from src.main.models import Market
from src.main.tools.betting import KellyNumerator
from src.main.tools.calibration import Calibrator

load_dotenv()

REPO_ROOT = Path(__file__).resolve().parents[2]
DATA_DIR_ENV = "SHOTQUEST_DATA_DIR"
CACHE_DB = os.getenv("SHOTQUEST_CACHE_DB", str(REPO_ROOT / "fits.db"))
LOG_LEVEL = os.getenv("SHOTQUEST_LOG_LEVEL", "INFO")

DEFAULT_HALF_LIFE_GRID = [10.0, 30.0, 60.0, 90.0, 120.0, 180.0, 240.0, 300.0, 365.0]


class RunConfig(BaseModel):
    """Everything a backtest or a half-life sweep needs."""

    data_dir: Path
    leagues: Union[List[str], Literal["all"]] = "all"
    half_life: float = 60.0
    half_life_grid: List[float] = Field(default_factory=lambda: list(DEFAULT_HALF_LIFE_GRID))
    calibrator: Calibrator = Calibrator.BLEND
    include_odds_predictor: bool = False
    burn_in_threshold: int = Field(default=6, ge=0)
    markets: List[Market] = Field(default_factory=lambda: [Market.MATCH_1X2, Market.OVER_UNDER_25])
    seed: int = 0
    output_dir: Path = Path("reports")
    kelly_numerator: KellyNumerator = KellyNumerator.STANDARD
    gap_fit_seasons: int = Field(default=1, ge=0)
    reliability_bins: int = Field(default=10, ge=2)
    reliability_replicates: int = Field(default=1000, ge=1)
    audit: bool = False
    use_cache: bool = True
    workers: int = Field(default=1, ge=1)

    @field_validator("half_life")
    @classmethod
    def _positive_half_life(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("half_life must be positive")
        return value

    @field_validator("half_life_grid")
    @classmethod
    def _positive_grid(cls, values: List[float]) -> List[float]:
        if not values:
            raise ValueError("half_life_grid must not be empty")
        if any(not v > 0 or math.isnan(v) for v in values):
            raise ValueError("half_life_grid values must be positive")
        return values

    @field_validator("markets")
    @classmethod
    def _distinct_markets(cls, values: List[Market]) -> List[Market]:
        if not values:
            raise ValueError("at least one market is required")
        return list(dict.fromkeys(values))

    def league_selected(self, league_id: str) -> bool:
        return self.leagues == "all" or league_id in self.leagues


def _read_config_file(path: Path) -> dict[str, Any]:
    try:
        if path.suffix.lower() == ".toml":
            with open(path, "rb") as f:
                return tomllib.load(f)
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc


def load_run_config(
    path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    """Build a ``RunConfig`` from an optional file, the environment and overrides.

    ``overrides`` entries whose value is ``None`` are ignored so argparse
    namespaces can be passed straight through.
    """
    values: dict[str, Any] = _read_config_file(path) if path else {}
    env_dir = os.getenv(DATA_DIR_ENV)
    if env_dir:
        values["data_dir"] = env_dir
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
