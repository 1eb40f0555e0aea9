"""ShotQuest command line.

Subcommands::

    ingest    parse the data directory and print match counts per league
    fit-gap   fit and cache the GAP parameters of every league
    backtest  run one backtest at --half-life and write its reports
    sweep     run one backtest per --half-life-grid value
    report    print a written report, or the fit cache with --fits

Exit codes: 0 success, 1 configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from rich.console import Console
from rich.table import Table

from src.main import db
from src.main.errors import ConfigError, DataError
from src.main.models import Market
from src.main.settings import RunConfig
from src.main.tools.backtest import load_matches, prepare_leagues
from src.main.tools.betting import KellyNumerator
from src.main.tools.calibration import Calibrator
from src.main.tools.data_ingest import build_season_index, summarize_ingest
from src.main.tools.registry import list_fits
from src.main.tools.reports import load_report, report_kind
from src.main.tools.utils import backtest_job, build_config, setup_logging, sweep_job

logger = logging.getLogger(__name__)
console = Console()

EXIT_CONFIG_ERROR = 1
EXIT_DATA_ERROR = 2


def _config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML or JSON run configuration")
    parser.add_argument("--data-dir", dest="data_dir", help="football-data.co.uk files")
    parser.add_argument("--leagues", nargs="+", help="league ids (default: all)")
    parser.add_argument("--burn-in-threshold", dest="burn_in_threshold", type=int)
    parser.add_argument("--gap-fit-seasons", dest="gap_fit_seasons", type=int)
    parser.add_argument("--cache", dest="use_cache", action=argparse.BooleanOptionalAction, default=None,
                        help="reuse and store fits in the SQLite cache")
    parser.add_argument("--workers", type=int)


def _run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--calibrator", choices=[c.value for c in Calibrator])
    parser.add_argument("--include-odds-predictor", dest="include_odds_predictor",
                        action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--markets", nargs="+", choices=[m.value for m in Market])
    parser.add_argument("--kelly-numerator", dest="kelly_numerator", choices=[k.value for k in KellyNumerator])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--reliability-bins", dest="reliability_bins", type=int)
    parser.add_argument("--audit", action=argparse.BooleanOptionalAction, default=None,
                        help="recompute every 1000th forecast from scratch")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shotquest", description="Shot-success backtesting engine")
    parser.add_argument("--log-level", dest="log_level")
    parser.add_argument("--cache-db", dest="cache_db", help="SQLite file for cached fits")
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="parse the data directory and print match counts")
    _config_flags(ingest)
    ingest.add_argument("--tally", help="write the ingest diagnostics to this JSON file")

    fit_gap = sub.add_parser("fit-gap", help="fit and cache GAP parameters per league")
    _config_flags(fit_gap)

    backtest = sub.add_parser("backtest", help="run one backtest")
    _config_flags(backtest)
    _run_flags(backtest)
    backtest.add_argument("--half-life", dest="half_life", type=float)

    sweep = sub.add_parser("sweep", help="run one backtest per half life")
    _config_flags(sweep)
    _run_flags(sweep)
    sweep.add_argument("--half-life-grid", dest="half_life_grid", type=float, nargs="+")

    report = sub.add_parser("report", help="print a written report")
    report.add_argument("path", nargs="?", help="report directory or JSON file")
    report.add_argument("--fits", action="store_true", help="list the fit cache instead")
    return parser


CONFIG_KEYS = (
    "data_dir", "leagues", "burn_in_threshold", "gap_fit_seasons", "use_cache", "workers",
    "calibrator", "include_odds_predictor", "markets", "kelly_numerator", "seed", "output_dir",
    "reliability_bins", "audit", "half_life", "half_life_grid",
)


def _config(args: argparse.Namespace) -> RunConfig:
    overrides: Dict[str, Any] = {key: getattr(args, key, None) for key in CONFIG_KEYS}
    return build_config(args.config, overrides)


def _fmt(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _print_table(title: str, columns: List[str], rows: List[List[Any]]) -> None:
    table = Table(title=title)
    for column in columns:
        table.add_column(column)
    for row in rows:
        table.add_row(*(_fmt(v) for v in row))
    console.print(table)


def cmd_ingest(args: argparse.Namespace) -> None:
    config = _config(args)
    matches, tally = load_matches(config)
    summary = summarize_ingest(matches, build_season_index(matches), config.burn_in_threshold)
    _print_table(
        "Matches",
        ["league", "matches", "with shots", "with shots, excl. burn-in"],
        [[league, r["matches"], r["shot_matches"], r["shot_matches_excl_burn_in"]] for league, r in summary.items()],
    )
    _print_table("Skipped rows", ["reason", "rows"], [[k, v] for k, v in sorted(tally.skipped.items())])
    if args.tally:
        payload = {"tally": tally.model_dump(), "summary": summary}
        Path(args.tally).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_fit_gap(args: argparse.Namespace) -> None:
    config = _config(args)
    matches, _ = load_matches(config)
    contexts = prepare_leagues(config, matches, config.workers)
    _print_table(
        "GAP parameters",
        ["league", "fit seasons", "lambda", "phi1", "phi2", "converged", "teams"],
        [
            [ctx.league_id, ",".join(sorted(ctx.fit_seasons)), ctx.gap_params.lam, ctx.gap_params.phi1,
             ctx.gap_params.phi2, ctx.gap_params.converged, len(ctx.gap_state.ratings)]
            for ctx in contexts.values()
        ],
    )


def _print_summary(title: str, summary: Dict[str, Any]) -> None:
    _print_table(title, ["measure", "value"], [[k, v] for k, v in sorted(summary.items())])


def cmd_backtest(args: argparse.Namespace) -> None:
    result = backtest_job(_config(args))
    _print_summary("Backtest (negative relative scores favour the model)", result["summary"])
    if result["audit"]:
        _print_summary("Look-ahead audit", result["audit"])


def cmd_sweep(args: argparse.Namespace) -> None:
    result = sweep_job(_config(args))
    _print_sweep(result["rows"])
    _print_summary("Best half life", result["best_half_life"])


def _print_sweep(rows: List[Dict[str, Any]]) -> None:
    columns = [c for c in ("shots_raw_ignorance", "shots_blend_ignorance", "shots_platt_ignorance",
                           "1x2_base_ignorance", "1x2_base_rps", "ou25_base_ignorance")
               if rows and c in rows[0]]
    _print_table("Half-life sweep", ["H"] + columns, [[row["half_life"]] + [row[c] for c in columns] for row in rows])


def cmd_report(args: argparse.Namespace) -> None:
    if args.fits or not args.path:
        fits = list_fits()
        _print_table(
            "Cached shot fits",
            ["league", "H", "fits", "first", "last", "GAP state"],
            [[f["league_id"], f["half_life"], f["fits"], f["first_as_of"], f["last_as_of"], f["gap_state"]] for f in fits],
        )
        return
    payload = load_report(Path(args.path))
    kind = report_kind(payload)
    if kind == "sweep":
        _print_sweep(payload["rows"])
        _print_summary("Best half life", payload["best_half_life"])
    elif kind == "run":
        evaluation = payload["evaluation"]
        _print_table(
            f"Shot forecasts, H={payload['half_life']}",
            ["forecast", "ignorance", "brier", "rel. ignorance", "rel. brier"],
            [
                [name, scores["ignorance"], scores["brier"],
                 evaluation["shots"]["relative"].get(name, {}).get("ignorance"),
                 evaluation["shots"]["relative"].get(name, {}).get("brier")]
                for name, scores in sorted(evaluation["shots"]["mean"].items())
            ],
        )
        rows = []
        for market, by_features in sorted(evaluation["markets"].items()):
            if not isinstance(by_features, dict):
                continue
            for features, entry in sorted(by_features.items()):
                rel = entry["relative"]
                rows.append([market, features, entry["forecasts"], rel["ignorance"], rel["brier"], rel["rps"]])
        _print_table("Outcome forecasts (model minus climatology)",
                     ["market", "features", "n", "ignorance", "brier", "rps"], rows)
        _print_table(
            "Betting",
            ["book", "bets", "profit"],
            [[key, b["bets_placed"], b["total_profit"]] for key, b in sorted(payload["betting"].items())],
        )
    else:
        raise DataError(f"{args.path} is not a ShotQuest report")


COMMANDS = {
    "ingest": cmd_ingest,
    "fit-gap": cmd_fit_gap,
    "backtest": cmd_backtest,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    if args.cache_db:
        db.configure(args.cache_db)
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        logger.error("Configuration error: %s", exc)
        return EXIT_CONFIG_ERROR
    except DataError as exc:
        logger.error("Data error: %s", exc)
        return EXIT_DATA_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
