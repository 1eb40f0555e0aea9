from typing import Any, Dict, List, Optional

import uvicorn
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from src.main.errors import ConfigError, DataError
from src.main.tools.utils import backtest_job, build_config, cached_fits, setup_logging, sweep_job

app = FastAPI(
    title="ShotQuest API",
    description="Run shot-success backtests and half-life sweeps over football-data files.",
    version="0.1.0",
    docs_url="/docs",        # Swagger UI
    redoc_url="/redoc",      # ReDoc UI
    openapi_url="/openapi.json",
)


class JobRequest(BaseModel):
    """A config file to start from and field overrides on top of it."""

    config_path: Optional[str] = None
    overrides: Dict[str, Any] = Field(default_factory=dict)


def _run(job, request: JobRequest) -> Dict[str, Any]:
    try:
        config = build_config(request.config_path, request.overrides)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    try:
        return job(config)
    except DataError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/", tags=["Root"], summary="API root")
async def read_root():
    return {"message": "Welcome to the ShotQuest FastAPI server!"}


@app.post(
    "/backtest",
    tags=["Backtest"],
    summary="Run one backtest",
    description="Run a backtest at the configured half life and write its reports.",
)
def backtest(request: JobRequest) -> Dict[str, Any]:
    return _run(backtest_job, request)


@app.post(
    "/sweep",
    tags=["Backtest"],
    summary="Run a half-life sweep",
    description="Run one backtest per half-life grid value; returns the per-H summary rows.",
)
def sweep(request: JobRequest) -> Dict[str, Any]:
    return _run(sweep_job, request)


@app.get(
    path="/fits",
    tags=["Cache"],
    summary="List cached fits",
    description="Cached shot-model fits per league and half life.",
)
async def list_cached_fits() -> List[Dict[str, Any]]:
    return cached_fits()


def main():
    setup_logging()
    # bind to localhost interface
    uvicorn.run(app, host="127.0.0.1", port=8090)


if __name__ == "__main__":
    main()
