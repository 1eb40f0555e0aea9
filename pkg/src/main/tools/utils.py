"""Shared utilities for ShotQuest.

The command line (``src/cli.py``), the FastAPI HTTP server
(``src/app_server.py``) and the FastMCP tool server (``src/server.py``) all
load a configuration, run a backtest or a sweep and write the reports.  This
module wraps that workflow so the three surfaces reuse the same logic.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from rich.logging import RichHandler

from src.main.settings import LOG_LEVEL, RunConfig, load_run_config
from src.main.tools.backtest import half_life_sweep, run_backtest
from src.main.tools.registry import list_fits
from src.main.tools.reports import sig9, write_run_report, write_sweep_report


def setup_logging(level: Optional[str] = None) -> None:
    """Route all logging through a rich console handler."""
    logging.basicConfig(
        level=(level or LOG_LEVEL).upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True, show_path=False)],
        force=True,
    )


def build_config(config_path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    return load_run_config(Path(config_path) if config_path else None, overrides)


def backtest_job(config: RunConfig) -> Dict[str, Any]:
    """Run one backtest, write its reports and return the headline numbers."""
    report = run_backtest(config)
    written = write_run_report(report, config.output_dir)
    return sig9(
        {
            "summary": report.summary(),
            "counts": report.counts,
            "skipped": report.skipped,
            "audit": report.audit,
            "files": [str(p) for p in written],
        }
    )


def sweep_job(config: RunConfig) -> Dict[str, Any]:
    """Run a half-life sweep, write its reports and return one row per half life."""
    sweep = half_life_sweep(config)
    write_sweep_report(sweep, config.output_dir)
    rows = sweep.rows()
    return sig9(
        {
            "rows": rows,
            "best_half_life": {
                key: sweep.best_half_life(key)
                for key in ("shots_blend_ignorance", "1x2_base_ignorance", "ou25_base_ignorance")
                if rows and key in rows[0]
            },
            "output_dir": str(config.output_dir),
        }
    )


def cached_fits() -> List[Dict[str, Any]]:
    return list_fits()
