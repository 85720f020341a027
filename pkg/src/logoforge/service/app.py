"""Stateless inference service: a FastAPI app over an immutable model snapshot.

Every response is a pure function of (checkpoint, request); handlers share the
snapshot without locking because nothing mutates it.
"""

from __future__ import annotations

import os

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..snapshot import ModelSnapshot
from . import ops
from .schemas import (
    DirectionApplyRequest,
    DirectionListResponse,
    GenerateRequest,
    InfoResponse,
    InterpolateRequest,
    OpResponse,
    TransferRequest,
    VicinityRequest,
)

CHECKPOINT_ENV = "LOGOFORGE_CHECKPOINT"


def resolve_checkpoint_path(cli_path=None) -> str:
    """The env var overrides whatever path the CLI was given."""
    env = os.environ.get(CHECKPOINT_ENV)
    path = env or cli_path
    if not path:
        raise ValueError(f"no checkpoint: pass a path or set {CHECKPOINT_ENV}")
    return str(path)


def create_app(snapshot: ModelSnapshot) -> FastAPI:
    app = FastAPI(title="logoforge studio service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.snapshot = snapshot

    @app.exception_handler(ops.RequestError)
    async def bad_request(_req: Request, exc: ops.RequestError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def invalid_body(_req: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={"error": str(exc.errors()[:3])})

    @app.get("/info", response_model=InfoResponse)
    def info():
        return ops.info(snapshot)

    @app.post("/generate", response_model=OpResponse, response_model_exclude_none=True)
    def generate(req: GenerateRequest, debug: bool = Query(default=False)):
        return ops.generate(snapshot, req, debug)

    @app.post("/vicinity", response_model=OpResponse, response_model_exclude_none=True)
    def vicinity(req: VicinityRequest, debug: bool = Query(default=False)):
        return ops.vicinity(snapshot, req, debug)

    @app.post("/interpolate", response_model=OpResponse, response_model_exclude_none=True)
    def interpolate(req: InterpolateRequest, debug: bool = Query(default=False)):
        return ops.interpolate(snapshot, req, debug)

    @app.post("/transfer", response_model=OpResponse, response_model_exclude_none=True)
    def transfer(req: TransferRequest, debug: bool = Query(default=False)):
        return ops.transfer(snapshot, req, debug)

    @app.post("/direction/list", response_model=DirectionListResponse)
    @app.get("/direction/list", response_model=DirectionListResponse)
    def direction_list():
        return ops.direction_list(snapshot)

    @app.post("/direction/apply", response_model=OpResponse, response_model_exclude_none=True)
    def direction_apply(req: DirectionApplyRequest, debug: bool = Query(default=False)):
        return ops.direction_apply(snapshot, req, debug)

    return app


def serve(checkpoint_path, host: str = "127.0.0.1", port: int = 8765):
    """Load the checkpoint and run the service until interrupted."""
    import uvicorn

    snapshot = ModelSnapshot.load(resolve_checkpoint_path(checkpoint_path))
    app = create_app(snapshot)
    uvicorn.run(app, host=host, port=port, log_level="info")
