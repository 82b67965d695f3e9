"""Reference HTTP server exposing a Backends bundle over the wire protocol.

Wraps any in-process backends (normally the mocks) behind the documented
routes, so HTTP clients can be exercised end to end without model weights.
"""
from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..errors import GeometryError, PipelineError, ProtocolError
from .protocol import (
    EMBED_ROUTE,
    INPAINT_ROUTE,
    SEGMENT_ROUTE,
    Backends,
    embed_request_from_wire,
    image_to_b64,
    inpaint_request_from_wire,
    mask_to_b64,
    segment_request_from_wire,
)


def create_backend_app(backends: Backends) -> FastAPI:
    app = FastAPI(title="paintaug backend server")

    @app.exception_handler(PipelineError)
    async def _pipeline_error(_request: Request, exc: PipelineError):
        if isinstance(exc, (ProtocolError, GeometryError)):
            status, code = 400, "bad_request"
        else:
            status, code = 500, "backend_error"
        return JSONResponse(status_code=status, content={"code": code, "message": str(exc)})

    @app.post(INPAINT_ROUTE)
    async def inpaint(body: dict):
        req = inpaint_request_from_wire(body)
        resp = backends.inpaint(req)
        return {"image_png": image_to_b64(resp.image), "backend_id": resp.backend_id}

    @app.post(EMBED_ROUTE)
    async def embed(body: dict):
        req = embed_request_from_wire(body)
        resp = backends.embed(req)
        return {"vector": list(resp.vector)}

    @app.post(SEGMENT_ROUTE)
    async def segment(body: dict):
        req = segment_request_from_wire(body)
        resp = backends.segment(req)
        return {"mask_png": mask_to_b64(resp.mask), "confidence": resp.confidence}

    return app
