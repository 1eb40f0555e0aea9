import json

import numpy as np

from src.cli import EXIT_CONFIG_ERROR, EXIT_DATA_ERROR, main
from tests.synthetic import random_truth, simulate_league, write_data_dir


def _data(tmp_path):
    rng = np.random.default_rng(0)
    matches = simulate_league(rng, random_truth(rng, 6), seasons=2, round_robins=1)
    return write_data_dir(tmp_path / "data", matches), matches


def test_backtest_without_data_dir_is_a_config_error():
    assert main(["backtest"]) == EXIT_CONFIG_ERROR


def test_bad_half_life_is_a_config_error(tmp_path):
    assert main(["backtest", "--data-dir", str(tmp_path), "--half-life", "-3"]) == EXIT_CONFIG_ERROR


def test_missing_data_dir_is_a_data_error(tmp_path):
    assert main(["ingest", "--data-dir", str(tmp_path / "nowhere")]) == EXIT_DATA_ERROR


def test_ingest_writes_the_tally(tmp_path):
    data, matches = _data(tmp_path)
    out = tmp_path / "tally.json"
    assert main(["ingest", "--data-dir", str(data), "--tally", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["tally"]["files"] == 2
    assert payload["tally"]["records"] == len(matches)
    assert payload["summary"]["total"]["matches"] == len(matches)
    assert payload["summary"]["SYN"]["shot_matches"] == len(matches)


def test_ingest_respects_league_selection(tmp_path):
    data, _ = _data(tmp_path)
    out = tmp_path / "tally.json"
    assert main(["ingest", "--data-dir", str(data), "--leagues", "E0", "--tally", str(out)]) == 0
    assert json.loads(out.read_text())["summary"]["total"]["matches"] == 0


def test_report_fits_on_an_empty_cache():
    assert main(["report", "--fits"]) == 0


def test_report_on_a_missing_file_is_a_data_error(tmp_path):
    assert main(["report", str(tmp_path / "evaluation.json")]) == EXIT_DATA_ERROR


def test_report_rejects_foreign_json(tmp_path):
    path = tmp_path / "other.json"
    path.write_text('{"hello": 1}', encoding="utf-8")
    assert main(["report", str(path)]) == EXIT_DATA_ERROR


def _run_config(tmp_path, data):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"data_dir": str(data), "reliability_replicates": 50}), encoding="utf-8")
    return path


def _league(tmp_path):
    rng = np.random.default_rng(5)
    matches = simulate_league(rng, random_truth(rng, 6), seasons=2, round_robins=2)
    return write_data_dir(tmp_path / "data", matches)


def test_backtest_writes_a_readable_report(tmp_path):
    config = _run_config(tmp_path, _league(tmp_path))
    out = tmp_path / "out"
    assert main(["backtest", "--config", str(config), "--half-life", "90", "--output-dir", str(out)]) == 0
    payload = json.loads((out / "evaluation.json").read_text())
    assert payload["half_life"] == 90.0
    assert payload["counts"]["evaluated"] > 0
    assert main(["report", str(out)]) == 0
    assert main(["report", "--fits"]) == 0


def test_backtest_on_a_missing_data_dir_is_a_data_error(tmp_path):
    assert main(["backtest", "--data-dir", str(tmp_path / "nowhere")]) == EXIT_DATA_ERROR


def test_sweep(tmp_path):
    config = _run_config(tmp_path, _league(tmp_path))
    out = tmp_path / "sweep"
    args = ["sweep", "--config", str(config), "--half-life-grid", "30", "90", "--output-dir", str(out)]
    assert main(args) == 0
    rows = json.loads((out / "sweep.json").read_text())["rows"]
    assert [r["half_life"] for r in rows] == [30.0, 90.0]
    assert (out / "H30" / "forecasts.csv").exists()
    assert main(["report", str(out)]) == 0


def test_sweep_with_an_empty_grid_is_a_config_error(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"data_dir": str(tmp_path), "half_life_grid": []}), encoding="utf-8")
    assert main(["sweep", "--config", str(config)]) == EXIT_CONFIG_ERROR


def test_fit_gap(tmp_path):
    data = _league(tmp_path)
    assert main(["fit-gap", "--data-dir", str(data)]) == 0
    assert main(["fit-gap", "--data-dir", str(data), "--gap-fit-seasons", "2"]) == 0
    assert main(["fit-gap", "--data-dir", str(tmp_path / "nowhere")]) == EXIT_DATA_ERROR
    assert main(["fit-gap", "--data-dir", str(data), "--gap-fit-seasons", "-1"]) == EXIT_CONFIG_ERROR
