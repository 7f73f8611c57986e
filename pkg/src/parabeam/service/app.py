"""FastAPI service wrapping the propagation workflows.

Endpoints take the canonical run configuration as JSON and return the run
payload; the CLI is a thin client of this service.  Setup problems map to
HTTP 422 with kind "config-error"; failures during a numerical run map to
HTTP 500 with kind "numerical-failure" (the CLI translates these to its
exit codes 2 and 3).
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import from_dict
from ..errors import NumericalError, SetupError
from ..workflows import run_compare, run_predict, run_propagate, run_sweep, run_tof
from .schemas import (
    HealthResponse,
    RunRequest,
    RunResponse,
    SweepResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(
        title="parabeam",
        version=__version__,
        description="Nonlinear paraxial beam propagation service",
    )

    @app.exception_handler(SetupError)
    async def _setup_error(request, exc: SetupError):
        return JSONResponse(
            status_code=422,
            content={"detail": {"kind": "config-error", "message": str(exc)}},
        )

    @app.exception_handler(NumericalError)
    async def _numerical_error(request, exc: NumericalError):
        return JSONResponse(
            status_code=500,
            content={"detail": {"kind": "numerical-failure", "message": str(exc)}},
        )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    def _config(req: RunRequest, workflow: str):
        return from_dict(req.config.as_config_dict(), workflow_hint=workflow)

    @app.post("/run/propagate", response_model=RunResponse)
    def propagate(req: RunRequest) -> RunResponse:
        payload = run_propagate(_config(req, "propagate"))
        payload["seed"] = req.seed
        return RunResponse(**payload)

    @app.post("/run/predict", response_model=RunResponse)
    def predict(req: RunRequest) -> RunResponse:
        payload = run_predict(_config(req, "predict"))
        payload["seed"] = req.seed
        return RunResponse(**payload)

    @app.post("/run/compare", response_model=RunResponse)
    def compare(req: RunRequest) -> RunResponse:
        payload = run_compare(_config(req, "compare"))
        payload["seed"] = req.seed
        return RunResponse(**payload)

    @app.post("/run/tof", response_model=RunResponse)
    def tof(req: RunRequest) -> RunResponse:
        payload = run_tof(_config(req, "analyze-tof"))
        payload["seed"] = req.seed
        return RunResponse(**payload)

    @app.post("/run/sweep", response_model=SweepResponse)
    def sweep(req: RunRequest) -> SweepResponse:
        payload = run_sweep(_config(req, "sweep"), threads=req.threads)
        payload["seed"] = req.seed
        return SweepResponse(**payload)

    return app


app = create_app()
