"""Value types and primitive operations for images, masks, and rectangles.

Everything here is an immutable value: the wrapped numpy arrays are marked
read-only at construction time, so instances can be shared freely between
threads. All operations are pure functions of their inputs.

Conventions:
  - images are 8-bit RGB, stored row-major as (H, W, 3) uint8
  - masks are one bit per pixel, stored as (H, W) bool
  - Rect(x, y, w, h) addresses the half-open window [x, x+w) x [y, y+h)
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import GeometryError

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class RasterImage:
    """An 8-bit RGB image. ``data`` has shape (height, width, 3)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.uint8, copy=True)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise GeometryError(f"image data must have shape (H, W, 3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise GeometryError(f"image must be at least 1x1, got {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None  # value equality on array contents; not hashable


@dataclass(frozen=True, eq=False)
class BitMask:
    """A binary mask. ``data`` has shape (height, width); True means masked."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, copy=True)
        if arr.ndim != 2:
            raise GeometryError(f"mask data must have shape (H, W), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise GeometryError(f"mask must be at least 1x1, got {arr.shape}")
        arr = arr.astype(bool)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def count(self) -> int:
        """Number of set (masked) pixels."""
        return int(np.count_nonzero(self.data))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitMask):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None

    def __and__(self, other: "BitMask") -> "BitMask":
        _require_same_shape(self, other)
        return BitMask(self.data & other.data)

    def __or__(self, other: "BitMask") -> "BitMask":
        _require_same_shape(self, other)
        return BitMask(self.data | other.data)

    @classmethod
    def zeros(cls, width: int, height: int) -> "BitMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def ones(cls, width: int, height: int) -> "BitMask":
        return cls(np.ones((height, width), dtype=bool))


@dataclass(frozen=True, order=True)
class Rect:
    """Axis-aligned pixel rectangle: offset (x, y), extent (w, h), w and h >= 1."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise GeometryError(f"rect extent must be at least 1x1, got {self!r}")

    @property
    def x1(self) -> int:
        return self.x + self.w

    @property
    def y1(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def contains(self, other: "Rect") -> bool:
        return (
            self.x <= other.x
            and self.y <= other.y
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )

    def overlaps(self, other: "Rect") -> bool:
        return (
            min(self.x1, other.x1) > max(self.x, other.x)
            and min(self.y1, other.y1) > max(self.y, other.y)
        )


@dataclass(frozen=True)
class RunSeed:
    """Root seed from which every backend-call seed is derived.

    Derived seeds are a pure function of (root, region index, variation index,
    attempt index), so a pipeline run is reproducible across processes without
    any shared RNG state.
    """

    root: int

    def __post_init__(self):
        object.__setattr__(self, "root", int(self.root) & _MASK64)

    def derive(self, *indices: int) -> int:
        """Mix ``indices`` into the root, returning a 64-bit seed."""
        h = self.root
        for i in indices:
            h = mix64(h ^ ((int(i) + 0x9E3779B97F4A7C15) & _MASK64))
        return h


def mix64(x: int) -> int:
    """Stable 64-bit mixing function (splitmix64 finalizer)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _require_same_shape(a, b) -> None:
    if a.data.shape[:2] != b.data.shape[:2]:
        raise GeometryError(f"shape mismatch: {a.data.shape[:2]} vs {b.data.shape[:2]}")


def _require_inside(rect: Rect, width: int, height: int) -> None:
    if rect.x < 0 or rect.y < 0 or rect.x1 > width or rect.y1 > height:
        raise GeometryError(f"rect {rect} exceeds {width}x{height} bounds")


def crop(image: RasterImage, rect: Rect) -> RasterImage:
    """Return the sub-image under ``rect``; the rect must lie inside the image."""
    _require_inside(rect, image.width, image.height)
    return RasterImage(image.data[rect.y : rect.y1, rect.x : rect.x1])


def paste(image: RasterImage, rect: Rect, patch: RasterImage) -> RasterImage:
    """Return a copy of ``image`` with ``patch`` written over ``rect``."""
    _require_inside(rect, image.width, image.height)
    if (patch.height, patch.width) != (rect.h, rect.w):
        raise GeometryError(
            f"patch {patch.width}x{patch.height} does not fit rect {rect.w}x{rect.h}"
        )
    out = image.data.copy()
    out[rect.y : rect.y1, rect.x : rect.x1] = patch.data
    return RasterImage(out)


def crop_mask(mask: BitMask, rect: Rect) -> BitMask:
    _require_inside(rect, mask.width, mask.height)
    return BitMask(mask.data[rect.y : rect.y1, rect.x : rect.x1])


def mask_coverage(mask: BitMask) -> float:
    """Fraction of pixels that are set, in [0, 1]."""
    return mask.count / (mask.width * mask.height)


def dilate(mask: BitMask, radius: int) -> BitMask:
    """Chebyshev dilation: output bit is set iff any set input bit lies within
    distance ``radius`` under the max metric (square structuring element)."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    if radius == 0:
        return mask
    size = 2 * radius + 1
    out = ndimage.maximum_filter(
        mask.data.astype(np.uint8), size=size, mode="constant", cval=0
    )
    return BitMask(out.astype(bool))


def mask_subset(inner: BitMask, outer: BitMask) -> bool:
    """True iff every set bit of ``inner`` is also set in ``outer``."""
    _require_same_shape(inner, outer)
    return not bool(np.any(inner.data & ~outer.data))


def mask_bbox(mask: BitMask) -> Rect | None:
    """Tight bounding rect of the set pixels, or None for an empty mask."""
    ys, xs = np.nonzero(mask.data)
    if ys.size == 0:
        return None
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    x0, x1 = int(xs.min()), int(xs.max()) + 1
    return Rect(x0, y0, x1 - x0, y1 - y0)


def scale_nearest(image: RasterImage, width: int, height: int) -> RasterImage:
    """Nearest-neighbor rescale. At scale factor 1 output pixels equal source
    pixels exactly."""
    if width < 1 or height < 1:
        raise GeometryError(f"target size must be at least 1x1, got {width}x{height}")
    ys = (np.arange(height) * image.height) // height
    xs = (np.arange(width) * image.width) // width
    return RasterImage(image.data[np.ix_(ys, xs)])


def scale_mask_nearest(mask: BitMask, width: int, height: int) -> BitMask:
    if width < 1 or height < 1:
        raise GeometryError(f"target size must be at least 1x1, got {width}x{height}")
    ys = (np.arange(height) * mask.height) // height
    xs = (np.arange(width) * mask.width) // width
    return BitMask(mask.data[np.ix_(ys, xs)])


# ---------------------------------------------------------------------------
# PNG round-trip. Images are written as 8-bit RGB; masks as 8-bit grayscale
# with 0 = unmasked and 255 = masked. Any other nonzero byte read back is
# normalized to a set bit, with a warning.
# ---------------------------------------------------------------------------


def write_image_png(image: RasterImage, path: Path | str) -> None:
    Image.fromarray(image.data, mode="RGB").save(path, format="PNG")


def read_image_png(path: Path | str) -> RasterImage:
    with Image.open(path) as im:
        return RasterImage(np.asarray(im.convert("RGB"), dtype=np.uint8))


def write_mask_png(mask: BitMask, path: Path | str) -> None:
    arr = np.where(mask.data, np.uint8(255), np.uint8(0))
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def read_mask_png(path: Path | str) -> BitMask:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.uint8)
    odd = (arr != 0) & (arr != 255)
    if bool(np.any(odd)):
        logger.warning(
            "mask %s contains %d bytes outside {0, 255}; normalizing nonzero to 1",
            path,
            int(np.count_nonzero(odd)),
        )
    return BitMask(arr != 0)
