import json

import pytest

from src.main.errors import ConfigError
from src.main.models import Market
from src.main.settings import DATA_DIR_ENV, RunConfig, load_run_config
from src.main.tools.calibration import Calibrator


def test_defaults():
    config = RunConfig(data_dir="data")
    assert config.half_life == 60.0
    assert config.calibrator is Calibrator.BLEND
    assert config.markets == [Market.MATCH_1X2, Market.OVER_UNDER_25]
    assert config.burn_in_threshold == 6
    assert config.league_selected("E0")


def test_toml_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        'data_dir = "football"\nleagues = ["E0", "D1"]\nhalf_life = 90\n'
        'calibrator = "platt"\nmarkets = ["ou25"]\n',
        encoding="utf-8",
    )
    config = load_run_config(path)
    assert str(config.data_dir) == "football"
    assert config.half_life == 90.0
    assert config.calibrator is Calibrator.PLATT
    assert config.markets == [Market.OVER_UNDER_25]
    assert config.league_selected("D1") and not config.league_selected("SP1")


def test_json_file_and_overrides(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"data_dir": "a", "half_life": 30, "seed": 4}), encoding="utf-8")
    config = load_run_config(path, {"half_life": 120.0, "seed": None, "audit": True})
    assert config.half_life == 120.0
    assert config.seed == 4
    assert config.audit


def test_environment_overrides_the_file(tmp_path, monkeypatch):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"data_dir": "from-file"}), encoding="utf-8")
    monkeypatch.setenv(DATA_DIR_ENV, "from-env")
    assert str(load_run_config(path).data_dir) == "from-env"
    assert str(load_run_config(path, {"data_dir": "from-flag"}).data_dir) == "from-flag"


@pytest.mark.parametrize(
    "overrides",
    [
        {"half_life": 0},
        {"half_life": -5},
        {"half_life_grid": []},
        {"half_life_grid": [30, -1]},
        {"markets": []},
        {"calibrator": "isotonic"},
        {"burn_in_threshold": -1},
    ],
)
def test_invalid_values(overrides):
    with pytest.raises(ConfigError):
        load_run_config(None, {"data_dir": "data", **overrides})


def test_missing_data_dir():
    with pytest.raises(ConfigError):
        load_run_config(None, {})


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "missing.toml")
    broken = tmp_path / "broken.json"
    broken.write_text("{data_dir:", encoding="utf-8")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_run_config(broken)


def test_duplicate_markets_collapse():
    config = RunConfig(data_dir="d", markets=["1x2", "1x2", "ou25"])
    assert config.markets == [Market.MATCH_1X2, Market.OVER_UNDER_25]
