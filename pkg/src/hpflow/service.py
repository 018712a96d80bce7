"""HTTP service exposing simulation, verification and preset discovery.

The endpoints wrap the core package one to one; request validation is the
same pydantic layer the CLI uses for config files, so a rejected file and a
rejected request produce the same messages.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, HTTPException

from . import __version__
from .expressions import ExpressionError
from .runner import execute, run_verification
from .schemas import (
    HealthInfo,
    PresetInfo,
    PresetsResponse,
    RunConfig,
    SimulationResult,
    VerifyRequest,
    VerifyResult,
)

logger = logging.getLogger(__name__)

app = FastAPI(
    title="hpflow",
    version=__version__,
    description=(
        "Simulation and stability analysis of Hamilton-Poisson systems with "
        "energy-preserving Casimir dissipation."
    ),
)

_PRESETS = [
    PresetInfo(
        name="rigid_body.case1",
        description=(
            "Rigid body with the standard-Casimir torque; trajectories keep "
            "their energy and spiral onto the short (x3) axis."
        ),
        parameters=["inertia"],
    ),
    PresetInfo(
        name="rigid_body.case2",
        description=(
            "Rigid body with the negated standard-Casimir torque; "
            "trajectories keep their energy and spiral onto the long (x1) "
            "axis."
        ),
        parameters=["inertia"],
    ),
    PresetInfo(
        name="rigid_body.case3",
        description=(
            "Rigid body with a quartic-Casimir torque targeting momentum "
            "magnitude m0 on the long axis."
        ),
        parameters=["inertia", "m0"],
    ),
]


@app.get("/health", response_model=HealthInfo)
def health() -> HealthInfo:
    return HealthInfo(status="ok", version=__version__)


@app.get("/presets", response_model=PresetsResponse)
def presets() -> PresetsResponse:
    return PresetsResponse(presets=_PRESETS)


@app.post("/simulate", response_model=SimulationResult)
def simulate(config: RunConfig) -> SimulationResult:
    try:
        return execute(config)
    except (ExpressionError, ValueError) as exc:
        # semantic problems that pass schema validation, e.g. a requested
        # certificate point that is not an equilibrium
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.post("/verify", response_model=VerifyResult)
def verify(request: VerifyRequest) -> VerifyResult:
    try:
        return run_verification(request)
    except (ExpressionError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
