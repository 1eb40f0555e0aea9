"""FastMCP server exposing the ShotQuest backtest.

Available tools:
* ``run_backtest(config_path, overrides) -> str`` – one backtest; JSON summary.
* ``half_life_sweep(config_path, overrides) -> str`` – one run per grid value.
* ``list_cached_fits() -> str`` – cached shot-model fits per league and half life.
"""

import json
from typing import Any, Dict, Optional

from fastmcp import FastMCP

from src.main.errors import ShotQuestError
from src.main.tools.utils import backtest_job, build_config, cached_fits, sweep_job

mcp = FastMCP("ShotQuest")


def _run(job, config_path: Optional[str], overrides: Optional[Dict[str, Any]]) -> str:
    try:
        return json.dumps(job(build_config(config_path, overrides)), sort_keys=True)
    except ShotQuestError as exc:
        return json.dumps({"error": type(exc).__name__, "message": str(exc)})


@mcp.tool
def run_backtest(config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> str:
    """Run a backtest and write its reports.

    *overrides* are ``RunConfig`` fields applied on top of the config file,
    e.g. ``{"data_dir": "data", "half_life": 30}``.
    """
    return _run(backtest_job, config_path, overrides)


@mcp.tool
def half_life_sweep(config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> str:
    """Run one backtest per value of ``half_life_grid`` and return the summary rows."""
    return _run(sweep_job, config_path, overrides)


@mcp.tool
def list_cached_fits() -> str:
    fits = cached_fits()
    if not fits:
        return "No cached fits."
    return json.dumps(fits)


def main() -> None:
    """Entry point – start the FastMCP server on stdio transport."""
    mcp.run(transport="stdio")


if __name__ == "__main__":
    main()
