"""Deterministic in-process backends for tests and offline runs.

All three are pure functions of their request (seed included), which is what
makes whole-pipeline determinism testable: two runs with the same root seed
produce byte-identical artifacts.

  - inpaint: scales the reference to the mask's bounding box (nearest
    neighbor), stamps it over the base crop where the mask is set, and shifts
    the stamped pixels by a small seed-derived brightness offset.
  - embed: 64-bin RGB color histogram (4 bins per channel), L2-normalized.
    Similar-looking crops score high, which is all the filter logic needs.
  - segment: returns the pixels inside the prompt box whose luminance differs
    from the median luminance of the box border by more than a fixed
    threshold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..imaging import BitMask, RasterImage, mask_bbox, mix64, scale_nearest
from .protocol import (
    EmbedRequest,
    EmbedResponse,
    InpaintRequest,
    InpaintResponse,
    SegmentRequest,
    SegmentResponse,
)

MOCK_LUMA_THRESHOLD = 12
EMBED_DIM = 64


def mock_inpaint(req: InpaintRequest) -> InpaintResponse:
    out = req.base_crop.data.copy()
    box = mask_bbox(req.mask)
    if box is not None:
        stamp = scale_nearest(req.reference, box.w, box.h).data.astype(np.int16)
        offset = (mix64(req.seed) % 31) - 15
        stamp = np.clip(stamp + offset, 0, 255).astype(np.uint8)
        window = out[box.y : box.y1, box.x : box.x1]
        local_mask = req.mask.data[box.y : box.y1, box.x : box.x1]
        window[local_mask] = stamp[local_mask]
    return InpaintResponse(image=RasterImage(out), backend_id="mock-stamp", latency_ms=0.0)


def mock_embed(req: EmbedRequest) -> EmbedResponse:
    pixels = req.image.data.reshape(-1, 3)
    bins = (pixels // 64).astype(np.int64)
    index = bins[:, 0] * 16 + bins[:, 1] * 4 + bins[:, 2]
    hist = np.bincount(index, minlength=EMBED_DIM).astype(np.float64)
    norm = float(np.linalg.norm(hist))
    hist = hist / norm  # every image has at least one pixel, norm > 0
    return EmbedResponse(vector=tuple(float(v) for v in hist))


def luminance(image: RasterImage) -> np.ndarray:
    """Integer luma per pixel (ITU-R 601 weights, exact integer arithmetic)."""
    data = image.data.astype(np.int64)
    return (299 * data[:, :, 0] + 587 * data[:, :, 1] + 114 * data[:, :, 2]) // 1000


def mock_segment(req: SegmentRequest) -> SegmentResponse:
    box = req.prompt_box
    luma = luminance(req.image)
    window = luma[box.y : box.y1, box.x : box.x1]

    if box.h > 1 and box.w > 1:
        border = np.concatenate(
            [window[0, :], window[-1, :], window[1:-1, 0], window[1:-1, -1]]
        )
    else:
        border = window.ravel()
    median = int(np.median(border))

    selected = np.abs(window - median) > MOCK_LUMA_THRESHOLD
    out = np.zeros(luma.shape, dtype=bool)
    out[box.y : box.y1, box.x : box.x1] = selected

    n_selected = int(np.count_nonzero(selected))
    if n_selected == 0:
        confidence = 0.0
    else:
        mean_delta = float(np.abs(window[selected] - median).mean())
        confidence = min(1.0, mean_delta / 64.0)
    return SegmentResponse(mask=BitMask(out), confidence=confidence)


@dataclass(frozen=True)
class MockBackends:
    """Bundle satisfying the Backends protocol with the three mocks above."""

    backend_id: str = "mock"

    def inpaint(self, req: InpaintRequest) -> InpaintResponse:
        return mock_inpaint(req)

    def embed(self, req: EmbedRequest) -> EmbedResponse:
        return mock_embed(req)

    def segment(self, req: SegmentRequest) -> SegmentResponse:
        return mock_segment(req)
