"""Derive croppable regions from a base image's placement mask.

One region per 8-connected blob of the placement mask. Each region's crop
window starts at the blob's bounding box and grows outward (clamped to the
image) until the blob covers roughly the target fraction of the window;
generation quality is best when the object mask occupies 15-30% of the crop.
Windows of distinct regions are then shrunk back toward their bounding boxes
until pairwise disjoint.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .errors import ConfigError, GeometryError
from .imaging import BitMask, RasterImage, Rect

DEFAULT_TARGET_BAND = (0.15, 0.30)

# Blobs below this pixel count are kept but never marked feasible; windows for
# them are too unstable to hit the coverage band reliably.
MIN_FEASIBLE_PIXELS = 16

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


@dataclass(frozen=True)
class RegionSpec:
    """One croppable region: window in base coordinates plus its local mask."""

    index: int
    rect: Rect
    region_mask: BitMask
    coverage: float
    feasible: bool

    def __post_init__(self):
        if (self.region_mask.height, self.region_mask.width) != (self.rect.h, self.rect.w):
            raise GeometryError(
                f"region mask {self.region_mask.width}x{self.region_mask.height} "
                f"does not match rect {self.rect.w}x{self.rect.h}"
            )


def extract_regions(
    base: RasterImage,
    placement_mask: BitMask,
    target_band: tuple[float, float] = DEFAULT_TARGET_BAND,
) -> list[RegionSpec]:
    """Split the placement mask into per-blob regions with coverage-tuned windows.

    Returns one RegionSpec per 8-connected component, ordered by the (top,
    left) of the component bounding box. ``feasible`` is True only when the
    final window coverage lies inside ``target_band``, the component has at
    least MIN_FEASIBLE_PIXELS pixels, and the window is disjoint from every
    other region's window. An all-zero mask yields an empty list.
    """
    low, high = target_band
    if not (0.0 < low < high <= 1.0):
        raise ConfigError(f"target band must satisfy 0 < low < high <= 1, got {target_band}")
    if (placement_mask.height, placement_mask.width) != (base.height, base.width):
        raise GeometryError(
            f"placement mask {placement_mask.width}x{placement_mask.height} does not "
            f"match base image {base.width}x{base.height}"
        )

    labels, n_components = ndimage.label(placement_mask.data, structure=_EIGHT_CONNECTED)
    if n_components == 0:
        return []

    slices = ndimage.find_objects(labels)
    sizes = np.bincount(labels.ravel())

    components = []  # (sort key, label, bbox, size)
    for label_id, sl in enumerate(slices, start=1):
        ysl, xsl = sl
        bbox = Rect(xsl.start, ysl.start, xsl.stop - xsl.start, ysl.stop - ysl.start)
        components.append(((bbox.y, bbox.x, bbox.y1, bbox.x1), label_id, bbox, int(sizes[label_id])))
    components.sort(key=lambda c: c[0])

    mid = (low + high) / 2.0
    windows: list[Rect] = []
    bboxes: list[Rect] = []
    comp_sizes: list[int] = []
    for _, _, bbox, size in components:
        windows.append(_expand_window(bbox, size, base.width, base.height, low, high, mid))
        bboxes.append(bbox)
        comp_sizes.append(size)

    _shrink_to_disjoint(windows, bboxes)

    specs: list[RegionSpec] = []
    for idx, ((_, label_id, bbox, size), rect) in enumerate(zip(components, windows)):
        local = labels[rect.y : rect.y1, rect.x : rect.x1] == label_id
        region_mask = BitMask(local)
        coverage = size / rect.area
        disjoint = all(not rect.overlaps(other) for j, other in enumerate(windows) if j != idx)
        feasible = size >= MIN_FEASIBLE_PIXELS and low <= coverage <= high and disjoint
        specs.append(RegionSpec(idx, rect, region_mask, coverage, feasible))
    return specs


def place_region_mask(spec: RegionSpec, width: int, height: int) -> BitMask:
    """Place the crop-local region mask back into a full-size mask."""
    out = np.zeros((height, width), dtype=bool)
    out[spec.rect.y : spec.rect.y1, spec.rect.x : spec.rect.x1] = spec.region_mask.data
    return BitMask(out)


def region_summaries(specs: list[RegionSpec]) -> list[dict]:
    """JSON-friendly view of the extracted regions, for UIs and manifests."""
    return [
        {
            "index": s.index,
            "rect": {"x": s.rect.x, "y": s.rect.y, "w": s.rect.w, "h": s.rect.h},
            "coverage": s.coverage,
            "feasible": s.feasible,
        }
        for s in specs
    ]


def _expand_window(
    bbox: Rect, comp_size: int, img_w: int, img_h: int, low: float, high: float, mid: float
) -> Rect:
    """Grow a window outward from ``bbox`` until the component covers ~``mid``
    of it. Growth is one pixel per side in round-robin order (approximately
    symmetric), each side clamping independently at the image border. Among the
    windows visited, the in-band one with coverage closest to ``mid`` wins;
    with no in-band window the closest-to-mid window wins.
    """
    x0, y0, x1, y1 = bbox.x, bbox.y, bbox.x1, bbox.y1

    def cov(ax0, ay0, ax1, ay1):
        return comp_size / ((ax1 - ax0) * (ay1 - ay0))

    def rank(c):
        return (not (low <= c <= high), abs(c - mid))

    best = (x0, y0, x1, y1)
    best_rank = rank(cov(*best))
    while cov(x0, y0, x1, y1) > mid:
        grew = False
        for side in range(4):
            if side == 0 and x0 > 0:
                x0 -= 1
            elif side == 1 and y0 > 0:
                y0 -= 1
            elif side == 2 and x1 < img_w:
                x1 += 1
            elif side == 3 and y1 < img_h:
                y1 += 1
            else:
                continue
            grew = True
            r = rank(cov(x0, y0, x1, y1))
            if r < best_rank:
                best, best_rank = (x0, y0, x1, y1), r
            if cov(x0, y0, x1, y1) <= mid:
                break
        if not grew:
            break  # fully clamped at the image bounds
    bx0, by0, bx1, by1 = best
    return Rect(bx0, by0, bx1 - bx0, by1 - by0)


def _shrink_to_disjoint(windows: list[Rect], bboxes: list[Rect]) -> None:
    """Shrink overlapping windows back toward their bounding boxes, splitting
    the retreat between the two rects of each overlapping pair. Windows never
    shrink below their bbox, so disjointness is unattainable when the bboxes
    themselves overlap; such regions are left overlapping (and end up flagged
    infeasible by the caller).
    """
    for i in range(len(windows)):
        for j in range(i + 1, len(windows)):
            if windows[i].overlaps(windows[j]):
                windows[i], windows[j] = _separate_pair(windows[i], bboxes[i], windows[j], bboxes[j])


def _separate_pair(a: Rect, a_box: Rect, b: Rect, b_box: Rect) -> tuple[Rect, Rect]:
    overlap_x = min(a.x1, b.x1) - max(a.x, b.x)
    overlap_y = min(a.y1, b.y1) - max(a.y, b.y)

    # Per axis: which side of each rect faces the other, and how much slack
    # (window minus bbox) is available on that side.
    if a.x + a.x1 <= b.x + b.x1:  # a is left of b (by center)
        slack_ax = a.x1 - a_box.x1
        slack_bx = b_box.x - b.x
    else:
        slack_ax = a_box.x - a.x
        slack_bx = b.x1 - b_box.x1
    if a.y + a.y1 <= b.y + b.y1:
        slack_ay = a.y1 - a_box.y1
        slack_by = b_box.y - b.y
    else:
        slack_ay = a_box.y - a.y
        slack_by = b.y1 - b_box.y1

    can_x = slack_ax + slack_bx >= overlap_x
    can_y = slack_ay + slack_by >= overlap_y
    if can_x and (not can_y or overlap_x <= overlap_y):
        axis = "x"
    elif can_y:
        axis = "y"
    else:
        # Best effort: retreat as far as slack allows on the axis with the
        # smaller residual overlap.
        axis = "x" if overlap_x - (slack_ax + slack_bx) <= overlap_y - (slack_ay + slack_by) else "y"

    if axis == "x":
        a_share = min(slack_ax, (overlap_x + 1) // 2)
        b_share = min(slack_bx, overlap_x - a_share)
        a_share = min(slack_ax, overlap_x - b_share)
        if a.x + a.x1 <= b.x + b.x1:
            a = replace(a, w=a.w - a_share) if a_share else a
            b = Rect(b.x + b_share, b.y, b.w - b_share, b.h) if b_share else b
        else:
            a = Rect(a.x + a_share, a.y, a.w - a_share, a.h) if a_share else a
            b = replace(b, w=b.w - b_share) if b_share else b
    else:
        a_share = min(slack_ay, (overlap_y + 1) // 2)
        b_share = min(slack_by, overlap_y - a_share)
        a_share = min(slack_ay, overlap_y - b_share)
        if a.y + a.y1 <= b.y + b.y1:
            a = replace(a, h=a.h - a_share) if a_share else a
            b = Rect(b.x, b.y + b_share, b.w, b.h - b_share) if b_share else b
        else:
            a = Rect(a.x, a.y + a_share, a.w, a.h - a_share) if a_share else a
            b = replace(b, h=b.h - b_share) if b_share else b
    return a, b
