"""Wire protocol shared by the three model backends.

All three backends speak HTTP POST with JSON bodies; images and masks travel
as base64-encoded PNG. One route per backend kind:

    POST /v1/inpaint   {"base_png", "mask_png", "reference_png", "seed"}
                    -> {"image_png", "backend_id"}
    POST /v1/embed     {"image_png"}
                    -> {"vector": [float, ...]}
    POST /v1/segment   {"image_png", "box": {x, y, w, h}, "hint_mask_png"?}
                    -> {"mask_png", "confidence"}

Errors are non-2xx statuses with body {"code": str, "message": str}.
"""
from __future__ import annotations

import base64
import io
import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from PIL import Image

from ..errors import GeometryError, NumericError, ProtocolError
from ..imaging import BitMask, RasterImage, Rect

INPAINT_ROUTE = "/v1/inpaint"
EMBED_ROUTE = "/v1/embed"
SEGMENT_ROUTE = "/v1/segment"


@dataclass(frozen=True, eq=False)
class InpaintRequest:
    base_crop: RasterImage
    mask: BitMask
    reference: RasterImage
    seed: int

    def __post_init__(self):
        if (self.mask.width, self.mask.height) != (self.base_crop.width, self.base_crop.height):
            raise GeometryError(
                f"inpaint mask {self.mask.width}x{self.mask.height} does not match "
                f"base crop {self.base_crop.width}x{self.base_crop.height}"
            )


@dataclass(frozen=True, eq=False)
class InpaintResponse:
    image: RasterImage
    backend_id: str
    latency_ms: float = 0.0


@dataclass(frozen=True, eq=False)
class EmbedRequest:
    image: RasterImage


@dataclass(frozen=True)
class EmbedResponse:
    vector: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class SegmentRequest:
    image: RasterImage
    prompt_box: Rect
    hint_mask: BitMask | None = None

    def __post_init__(self):
        box = self.prompt_box
        if box.x < 0 or box.y < 0 or box.x1 > self.image.width or box.y1 > self.image.height:
            raise GeometryError(
                f"prompt box {box} exceeds image bounds {self.image.width}x{self.image.height}"
            )


@dataclass(frozen=True, eq=False)
class SegmentResponse:
    mask: BitMask
    confidence: float


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str
    timeout_ms: int = 30_000
    max_retries: int = 2
    max_in_flight: int = 4
    bearer_token: str | None = None

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError(f"timeout_ms must be > 0, got {self.timeout_ms}")
        if self.max_in_flight < 1:
            raise ValueError(f"max_in_flight must be >= 1, got {self.max_in_flight}")


class Backends(Protocol):
    """What the generation engine needs from the model side."""

    def inpaint(self, req: InpaintRequest) -> InpaintResponse: ...

    def embed(self, req: EmbedRequest) -> EmbedResponse: ...

    def segment(self, req: SegmentRequest) -> SegmentResponse: ...


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine similarity in [-1, 1]. Raises on zero vectors or mixed dimensions."""
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.shape != b.shape:
        raise ProtocolError(f"vector dimension mismatch: {a.shape} vs {b.shape}")
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na == 0.0 or nb == 0.0:
        raise NumericError("cosine of a zero vector is undefined")
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


# ---------------------------------------------------------------------------
# Base64 PNG codecs
# ---------------------------------------------------------------------------


def image_to_b64(image: RasterImage) -> str:
    buf = io.BytesIO()
    Image.fromarray(image.data, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def image_from_b64(payload: str) -> RasterImage:
    try:
        raw = base64.b64decode(payload, validate=True)
        with Image.open(io.BytesIO(raw)) as im:
            return RasterImage(np.asarray(im.convert("RGB"), dtype=np.uint8))
    except Exception as e:
        raise ProtocolError(f"invalid base64 PNG image payload: {e}") from e


def mask_to_b64(mask: BitMask) -> str:
    buf = io.BytesIO()
    arr = np.where(mask.data, np.uint8(255), np.uint8(0))
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def mask_from_b64(payload: str) -> BitMask:
    try:
        raw = base64.b64decode(payload, validate=True)
        with Image.open(io.BytesIO(raw)) as im:
            arr = np.asarray(im.convert("L"), dtype=np.uint8)
        return BitMask(arr != 0)
    except Exception as e:
        raise ProtocolError(f"invalid base64 PNG mask payload: {e}") from e


def rect_to_dict(rect: Rect) -> dict:
    return {"x": rect.x, "y": rect.y, "w": rect.w, "h": rect.h}


def rect_from_dict(data: dict) -> Rect:
    try:
        return Rect(int(data["x"]), int(data["y"]), int(data["w"]), int(data["h"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ProtocolError(f"invalid rect payload: {data!r}") from e


def inpaint_request_to_wire(req: InpaintRequest) -> dict:
    return {
        "base_png": image_to_b64(req.base_crop),
        "mask_png": mask_to_b64(req.mask),
        "reference_png": image_to_b64(req.reference),
        "seed": int(req.seed),
    }


def inpaint_request_from_wire(data: dict) -> InpaintRequest:
    try:
        return InpaintRequest(
            base_crop=image_from_b64(data["base_png"]),
            mask=mask_from_b64(data["mask_png"]),
            reference=image_from_b64(data["reference_png"]),
            seed=int(data["seed"]),
        )
    except KeyError as e:
        raise ProtocolError(f"inpaint request missing field {e}") from e


def embed_request_to_wire(req: EmbedRequest) -> dict:
    return {"image_png": image_to_b64(req.image)}


def embed_request_from_wire(data: dict) -> EmbedRequest:
    try:
        return EmbedRequest(image=image_from_b64(data["image_png"]))
    except KeyError as e:
        raise ProtocolError(f"embed request missing field {e}") from e


def segment_request_to_wire(req: SegmentRequest) -> dict:
    return {
        "image_png": image_to_b64(req.image),
        "box": rect_to_dict(req.prompt_box),
        "hint_mask_png": mask_to_b64(req.hint_mask) if req.hint_mask is not None else None,
    }


def segment_request_from_wire(data: dict) -> SegmentRequest:
    try:
        hint = data.get("hint_mask_png")
        return SegmentRequest(
            image=image_from_b64(data["image_png"]),
            prompt_box=rect_from_dict(data["box"]),
            hint_mask=mask_from_b64(hint) if hint else None,
        )
    except KeyError as e:
        raise ProtocolError(f"segment request missing field {e}") from e
