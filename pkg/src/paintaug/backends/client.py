"""HTTP clients for the inpainting, embedding, and segmentation backends.

Each client enforces its config's timeout, retry budget, and in-flight bound.
Transport-level failures (timeouts, connection errors) are retried up to
``max_retries`` times; an HTTP error status is not retried, since the server
answered and its error envelope is the more useful signal.
"""
from __future__ import annotations

import os
import threading
import time

import httpx

from ..errors import ProtocolError, RemoteBackendError, TransportError
from .protocol import (
    EMBED_ROUTE,
    INPAINT_ROUTE,
    SEGMENT_ROUTE,
    BackendConfig,
    EmbedRequest,
    EmbedResponse,
    InpaintRequest,
    InpaintResponse,
    SegmentRequest,
    SegmentResponse,
    embed_request_to_wire,
    image_from_b64,
    inpaint_request_to_wire,
    mask_from_b64,
    segment_request_to_wire,
)

DEFAULT_ENDPOINT = "http://127.0.0.1:8600"

INPAINT_URL_ENV = "INPAINT_URL"
EMBED_URL_ENV = "EMBED_URL"
SEGMENT_URL_ENV = "SEGMENT_URL"


class HttpBackendClient:
    """One backend endpoint: POSTs JSON, bounded in-flight, retried transport."""

    def __init__(self, cfg: BackendConfig, *, transport: httpx.BaseTransport | None = None):
        self.cfg = cfg
        headers = {}
        if cfg.bearer_token:
            headers["Authorization"] = f"Bearer {cfg.bearer_token}"
        self._client = httpx.Client(
            base_url=cfg.endpoint.rstrip("/"),
            timeout=cfg.timeout_ms / 1000.0,
            headers=headers,
            transport=transport,
        )
        self._in_flight = threading.BoundedSemaphore(cfg.max_in_flight)

    def close(self) -> None:
        self._client.close()

    def post(self, route: str, payload: dict) -> dict:
        last_error: Exception | None = None
        for _attempt in range(self.cfg.max_retries + 1):
            with self._in_flight:
                try:
                    response = self._client.post(route, json=payload)
                except httpx.TransportError as e:
                    last_error = e
                    continue
            if response.is_success:
                try:
                    return response.json()
                except ValueError as e:
                    raise ProtocolError(f"{route}: response body is not JSON") from e
            code, message = _error_envelope(response)
            raise RemoteBackendError(code, message)
        raise TransportError(
            f"{route}: no response after {self.cfg.max_retries + 1} attempts: {last_error}"
        ) from last_error


def _error_envelope(response: httpx.Response) -> tuple[str, str]:
    try:
        body = response.json()
        return str(body["code"]), str(body["message"])
    except Exception:
        return str(response.status_code), response.text[:200]


class HttpBackends:
    """Backends implementation that forwards every call over HTTP."""

    def __init__(
        self,
        inpaint_cfg: BackendConfig,
        embed_cfg: BackendConfig,
        segment_cfg: BackendConfig,
        *,
        transport: httpx.BaseTransport | None = None,
    ):
        self._inpaint = HttpBackendClient(inpaint_cfg, transport=transport)
        self._embed = HttpBackendClient(embed_cfg, transport=transport)
        self._segment = HttpBackendClient(segment_cfg, transport=transport)
        self._embed_dim: int | None = None
        self._dim_lock = threading.Lock()

    def close(self) -> None:
        for client in (self._inpaint, self._embed, self._segment):
            client.close()

    def inpaint(self, req: InpaintRequest) -> InpaintResponse:
        started = time.perf_counter()
        body = self._inpaint.post(INPAINT_ROUTE, inpaint_request_to_wire(req))
        latency_ms = (time.perf_counter() - started) * 1000.0
        try:
            image = image_from_b64(body["image_png"])
            backend_id = str(body.get("backend_id", "unknown"))
        except KeyError as e:
            raise ProtocolError(f"inpaint response missing field {e}") from e
        if (image.width, image.height) != (req.base_crop.width, req.base_crop.height):
            raise ProtocolError(
                f"inpaint returned {image.width}x{image.height} for a "
                f"{req.base_crop.width}x{req.base_crop.height} crop"
            )
        return InpaintResponse(image=image, backend_id=backend_id, latency_ms=latency_ms)

    def embed(self, req: EmbedRequest) -> EmbedResponse:
        body = self._embed.post(EMBED_ROUTE, embed_request_to_wire(req))
        try:
            vector = tuple(float(v) for v in body["vector"])
        except (KeyError, TypeError, ValueError) as e:
            raise ProtocolError(f"embed response has no usable vector: {e}") from e
        with self._dim_lock:
            if self._embed_dim is None:
                self._embed_dim = len(vector)
            elif len(vector) != self._embed_dim:
                raise ProtocolError(
                    f"embed dimension changed mid-session: {len(vector)} != {self._embed_dim}"
                )
        return EmbedResponse(vector=vector)

    def segment(self, req: SegmentRequest) -> SegmentResponse:
        body = self._segment.post(SEGMENT_ROUTE, segment_request_to_wire(req))
        try:
            mask = mask_from_b64(body["mask_png"])
            confidence = float(body["confidence"])
        except (KeyError, TypeError, ValueError) as e:
            raise ProtocolError(f"segment response malformed: {e}") from e
        if (mask.width, mask.height) != (req.image.width, req.image.height):
            raise ProtocolError(
                f"segment returned {mask.width}x{mask.height} for a "
                f"{req.image.width}x{req.image.height} image"
            )
        return SegmentResponse(mask=mask, confidence=confidence)


def config_from_env(kind: str, **overrides) -> BackendConfig:
    """Backend config with the endpoint taken from INPAINT_URL / EMBED_URL /
    SEGMENT_URL when set."""
    env_var = {"inpaint": INPAINT_URL_ENV, "embed": EMBED_URL_ENV, "segment": SEGMENT_URL_ENV}[kind]
    endpoint = os.environ.get(env_var, DEFAULT_ENDPOINT)
    return BackendConfig(endpoint=endpoint, **overrides)


def http_backends_from_env(**overrides) -> HttpBackends:
    return HttpBackends(
        config_from_env("inpaint", **overrides),
        config_from_env("embed", **overrides),
        config_from_env("segment", **overrides),
    )
