from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pytest

from paintaug.backends.mock import MockBackends
from paintaug.backends.protocol import (
    EmbedRequest,
    EmbedResponse,
    InpaintRequest,
    InpaintResponse,
    SegmentRequest,
    SegmentResponse,
)
from paintaug.dataset import init_task_dir
from paintaug.imaging import BitMask, RasterImage


def random_image(rng: np.random.Generator, width: int, height: int) -> RasterImage:
    return RasterImage(rng.integers(0, 256, (height, width, 3), dtype=np.uint8))


def random_mask(rng: np.random.Generator, width: int, height: int, density: float = 0.5) -> BitMask:
    return BitMask(rng.random((height, width)) < density)


def blob_mask(width: int, height: int, blobs: list[tuple[int, int, int, int]]) -> BitMask:
    """Mask with filled rectangles given as (x, y, w, h)."""
    data = np.zeros((height, width), dtype=bool)
    for x, y, w, h in blobs:
        data[y : y + h, x : x + w] = True
    return BitMask(data)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def demo_task(tmp_path, rng):
    """Small on-disk task: 2 support examples, 2 base images, one with a
    two-blob placement mask."""
    supports = []
    for _ in range(2):
        image = random_image(rng, 40, 32)
        mask = blob_mask(40, 32, [(8, 8, 16, 12)])
        supports.append((image, mask))
    placement = blob_mask(128, 128, [(16, 16, 18, 18), (80, 88, 20, 16)])
    bases = [
        ("b0", random_image(rng, 128, 128), placement),
        ("b1", random_image(rng, 128, 128), None),
    ]
    task_dir = tmp_path / "task"
    manifest = init_task_dir("boat", supports, bases, task_dir)
    return task_dir, manifest, placement


# ---------------------------------------------------------------------------
# Rigged backends
# ---------------------------------------------------------------------------


@dataclass
class CountingBackends:
    """Delegates to another bundle while counting calls per kind."""

    inner: object = field(default_factory=MockBackends)
    inpaint_calls: int = 0
    embed_calls: int = 0
    segment_calls: int = 0

    def inpaint(self, req: InpaintRequest) -> InpaintResponse:
        self.inpaint_calls += 1
        return self.inner.inpaint(req)

    def embed(self, req: EmbedRequest) -> EmbedResponse:
        self.embed_calls += 1
        return self.inner.embed(req)

    def segment(self, req: SegmentRequest) -> SegmentResponse:
        self.segment_calls += 1
        return self.inner.segment(req)


class OrthogonalEmbedder:
    """Embeds known reference images as (1, 0) and everything else as (0, 1),
    so every candidate scores cosine 0 against its reference."""

    def __init__(self, references: list[RasterImage], inner=None):
        self.references = list(references)
        self.inner = inner or MockBackends()

    def inpaint(self, req: InpaintRequest) -> InpaintResponse:
        return self.inner.inpaint(req)

    def embed(self, req: EmbedRequest) -> EmbedResponse:
        if any(req.image == ref for ref in self.references):
            return EmbedResponse(vector=(1.0, 0.0))
        return EmbedResponse(vector=(0.0, 1.0))

    def segment(self, req: SegmentRequest) -> SegmentResponse:
        return self.inner.segment(req)


class ScriptedEmbedder:
    """References embed as (1, 0); candidate scores are consumed from a fixed
    sequence, cycling when exhausted."""

    def __init__(self, references: list[RasterImage], scores: list[float], inner=None):
        self.references = list(references)
        self.scores = list(scores)
        self.cursor = 0
        self.inner = inner or MockBackends()

    def inpaint(self, req: InpaintRequest) -> InpaintResponse:
        return self.inner.inpaint(req)

    def embed(self, req: EmbedRequest) -> EmbedResponse:
        if any(req.image == ref for ref in self.references):
            return EmbedResponse(vector=(1.0, 0.0))
        score = self.scores[self.cursor % len(self.scores)]
        self.cursor += 1
        return EmbedResponse(vector=(score, float(np.sqrt(1.0 - score * score))))

    def segment(self, req: SegmentRequest) -> SegmentResponse:
        return self.inner.segment(req)


class FractionSegmenter:
    """Returns the first ``ceil(fraction * count)`` set pixels of the hint
    mask in row-major order; lets tests control the refined-mask area exactly."""

    def __init__(self, fraction: float, inner=None):
        self.fraction = fraction
        self.inner = inner or MockBackends()

    def inpaint(self, req: InpaintRequest) -> InpaintResponse:
        return self.inner.inpaint(req)

    def embed(self, req: EmbedRequest) -> EmbedResponse:
        return self.inner.embed(req)

    def segment(self, req: SegmentRequest) -> SegmentResponse:
        hint = req.hint_mask
        assert hint is not None
        ys, xs = np.nonzero(hint.data)
        keep = int(np.ceil(self.fraction * len(ys)))
        out = np.zeros(hint.data.shape, dtype=bool)
        out[ys[:keep], xs[:keep]] = True
        return SegmentResponse(mask=BitMask(out), confidence=1.0 if keep else 0.0)


class FixedSegmenter:
    """Always returns the given mask (padded/cropped is the caller's problem)."""

    def __init__(self, mask: BitMask, inner=None):
        self.mask = mask
        self.inner = inner or MockBackends()

    def inpaint(self, req: InpaintRequest) -> InpaintResponse:
        return self.inner.inpaint(req)

    def embed(self, req: EmbedRequest) -> EmbedResponse:
        return self.inner.embed(req)

    def segment(self, req: SegmentRequest) -> SegmentResponse:
        return SegmentResponse(mask=self.mask, confidence=1.0)
