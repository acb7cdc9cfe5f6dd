"""FastAPI wiring around the service handlers.

Domain errors surface as HTTP 400 with a structured
``{"detail": {"kind": ..., "message": ...}}`` body; request-shape
problems stay with FastAPI's own 422 handling.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import SketchArmError
from ..kinematics import builtin_chain_names
from . import handlers, models

app = FastAPI(
    title="sketcharm",
    version=__version__,
    description="Calibration, kinematics, and sketch-drawing trajectory service",
)


@app.exception_handler(SketchArmError)
async def _domain_error(request: Request, exc: SketchArmError) -> JSONResponse:
    return JSONResponse(
        status_code=400,
        content={"detail": {"kind": exc.kind, "message": str(exc)}},
    )


@app.get("/health", response_model=models.HealthResponse)
def health() -> models.HealthResponse:
    return models.HealthResponse(
        name="sketcharm", version=__version__, chains=list(builtin_chain_names())
    )


@app.post("/calibrate", response_model=models.CalibrateResponse)
def calibrate(req: models.CalibrateRequest) -> models.CalibrateResponse:
    return handlers.calibrate(req)


@app.post("/compare", response_model=models.CompareResponse)
def compare(req: models.CompareRequest) -> models.CompareResponse:
    return handlers.compare(req)


@app.post("/fk", response_model=models.FkResponse)
def fk(req: models.FkRequest) -> models.FkResponse:
    return handlers.fk(req)


@app.post("/ik", response_model=models.IkResponse)
def ik(req: models.IkRequest) -> models.IkResponse:
    return handlers.ik(req)


@app.post("/draw", response_model=models.DrawResponse)
def draw(req: models.DrawRequest) -> models.DrawResponse:
    return handlers.draw(req)


@app.post("/eval", response_model=models.EvalResponse)
def evaluate(req: models.EvalRequest) -> models.EvalResponse:
    return handlers.evaluate(req)
