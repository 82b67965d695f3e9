"""Combinatorial composition of per-region variations into augmented samples.

A selection is a non-empty subset of the N regions plus one of the L
variations for each selected region, identified by a CombinationKey. The
number of distinct selections is sum over k of C(N,k) * L^k, which equals
(L+1)^N - 1; both forms are computed and cross-checked.

Keys serialize as ``0b101:2,0``: bit n of the binary literal is region n,
choices are listed for the set bits in ascending region order.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .engine import Variation, composite_region
from .errors import ConfigError, GeometryError, PipelineError
from .imaging import (
    BitMask,
    RasterImage,
    Rect,
    scale_mask_nearest,
    scale_nearest,
)
from .regions import RegionSpec


@dataclass(frozen=True)
class CombinationKey:
    """Non-empty region selection with one variation choice per set bit."""

    region_bits: int
    choices: tuple[int, ...]

    def __post_init__(self):
        if self.region_bits <= 0:
            raise ConfigError("a combination must include at least one region")
        if len(self.choices) != self.popcount:
            raise ConfigError(
                f"key {self.to_string()}: {self.popcount} regions selected but "
                f"{len(self.choices)} choices given"
            )
        if any(c < 0 for c in self.choices):
            raise ConfigError(f"key {self.to_string()}: negative variation choice")

    @property
    def popcount(self) -> int:
        return bin(self.region_bits).count("1")

    @property
    def selected_regions(self) -> tuple[int, ...]:
        return tuple(n for n in range(self.region_bits.bit_length()) if self.region_bits >> n & 1)

    def choice_for(self, region_index: int) -> int:
        if not (self.region_bits >> region_index) & 1:
            raise KeyError(f"region {region_index} not selected by {self.to_string()}")
        return self.choices[self.selected_regions.index(region_index)]

    def pairs(self) -> tuple[tuple[int, int], ...]:
        """(region index, variation choice) pairs in ascending region order."""
        return tuple(zip(self.selected_regions, self.choices))

    def to_string(self) -> str:
        return f"{bin(self.region_bits)}:{','.join(str(c) for c in self.choices)}"

    @classmethod
    def from_string(cls, text: str) -> "CombinationKey":
        try:
            bits_part, _, choices_part = text.partition(":")
            bits = int(bits_part, 2)
            choices = tuple(int(c) for c in choices_part.split(",")) if choices_part else ()
        except ValueError as e:
            raise ConfigError(f"unparseable combination key {text!r}") from e
        return cls(region_bits=bits, choices=choices)


@dataclass(frozen=True, eq=False)
class AugmentedSample:
    """A fully composited image and its annotation mask."""

    image: RasterImage
    mask: BitMask
    key: CombinationKey | None
    region_scores: tuple[float, ...] = ()

    def __post_init__(self):
        if (self.image.width, self.image.height) != (self.mask.width, self.mask.height):
            raise GeometryError(
                f"sample mask {self.mask.width}x{self.mask.height} does not match "
                f"image {self.image.width}x{self.image.height}"
            )


def count_combinations(n_regions: int, variations_per_region: int) -> int:
    """Number of distinct non-empty selections; exact (Python integers)."""
    if n_regions < 1 or variations_per_region < 1:
        raise ConfigError("need at least one region and one variation per region")
    total = sum(
        math.comb(n_regions, k) * variations_per_region**k for k in range(1, n_regions + 1)
    )
    closed_form = (variations_per_region + 1) ** n_regions - 1
    if total != closed_form:
        raise PipelineError(
            f"combination count self-check failed: {total} != {closed_form}"
        )  # pragma: no cover - identity holds for all valid inputs
    return total


def enumerate_keys(n_regions: int, variations_per_region: int) -> Iterator[CombinationKey]:
    """All keys, ordered by region_bits ascending, then choices in odometer
    order with the lowest-indexed selected region changing fastest."""
    if n_regions < 1 or variations_per_region < 1:
        raise ConfigError("need at least one region and one variation per region")
    allowed = [list(range(variations_per_region))] * n_regions
    return _enumerate_allowed(n_regions, allowed)


def _enumerate_allowed(n_regions: int, allowed: Sequence[Sequence[int]]) -> Iterator[CombinationKey]:
    for bits in range(1, 1 << n_regions):
        selected = [n for n in range(n_regions) if bits >> n & 1]
        choices = [allowed[n] for n in selected]
        if any(not c for c in choices):  # a selected region with no allowed choices
            continue
        counters = [0] * len(selected)
        while True:
            yield CombinationKey(
                region_bits=bits,
                choices=tuple(choices[i][counters[i]] for i in range(len(selected))),
            )
            pos = 0  # least-significant selected region steps fastest
            while pos < len(selected):
                counters[pos] += 1
                if counters[pos] < len(choices[pos]):
                    break
                counters[pos] = 0
                pos += 1
            if pos == len(selected):
                break


def random_key(
    rng: random.Random, n_regions: int, variations_per_region: int,
    allowed: Sequence[Sequence[int]] | None = None,
) -> CombinationKey:
    """One uniform draw over the selection space (with replacement).

    Draws a base-(L+1) digit per region: 0 excludes the region, d selects
    variation d-1. All-zero vectors are rejected and redrawn.
    """
    if allowed is None:
        allowed = [list(range(variations_per_region))] * n_regions
    if all(not a for a in allowed):
        raise ConfigError("every region's variations are excluded; nothing to draw")
    while True:
        digits = [rng.randrange(len(allowed[n]) + 1) for n in range(n_regions)]
        if any(digits):
            break
    bits = 0
    choices = []
    for n, d in enumerate(digits):
        if d:
            bits |= 1 << n
            choices.append(allowed[n][d - 1])
    return CombinationKey(region_bits=bits, choices=tuple(choices))


def sample_keys(
    n_regions: int,
    variations_per_region: int,
    count: int,
    seed: int,
    *,
    exclude: Iterable[tuple[int, int]] = (),
) -> list[CombinationKey]:
    """Draw ``count`` distinct keys uniformly, reproducibly for a fixed seed.

    Duplicates are rejected and redrawn. If ``count`` meets or exceeds the
    size of the space, the full enumeration is returned instead. ``exclude``
    removes individual (region, variation) pairs from the space, e.g. after
    a human rejects a variation.
    """
    if count < 1:
        raise ConfigError("count must be >= 1")
    excluded = set(exclude)
    allowed = [
        [c for c in range(variations_per_region) if (n, c) not in excluded]
        for n in range(n_regions)
    ]
    total = math.prod(len(a) + 1 for a in allowed) - 1
    if count >= total:
        return list(_enumerate_allowed(n_regions, allowed))

    rng = random.Random(seed)
    seen: set[CombinationKey] = set()
    out: list[CombinationKey] = []
    while len(out) < count:
        key = random_key(rng, n_regions, variations_per_region, allowed)
        if key not in seen:
            seen.add(key)
            out.append(key)
    return out


def realize(
    base: RasterImage,
    regions: Sequence[RegionSpec],
    variations: Mapping[int, Sequence[Variation]],
    key: CombinationKey,
) -> AugmentedSample:
    """Composite the key's chosen variations onto the base image.

    The sample's annotation mask is the union of the chosen variations'
    refined masks placed at their region rects; unselected regions leave the
    base untouched.
    """
    n_regions = len(regions)
    if key.region_bits >> n_regions:
        raise ConfigError(
            f"key {key.to_string()} selects regions beyond the {n_regions} available"
        )
    by_index = {region.index: region for region in regions}

    image = base
    mask = np.zeros((base.height, base.width), dtype=bool)
    scores = []
    for region_index, choice in key.pairs():
        if region_index not in by_index:
            raise ConfigError(f"key {key.to_string()}: unknown region {region_index}")
        region = by_index[region_index]
        region_variations = variations.get(region_index, ())
        if choice >= len(region_variations):
            raise ConfigError(
                f"key {key.to_string()}: region {region_index} has only "
                f"{len(region_variations)} variations"
            )
        variation = region_variations[choice]
        image = composite_region(image, region, variation.image)
        rect = region.rect
        mask[rect.y : rect.y1, rect.x : rect.x1] |= variation.refined_mask.data
        scores.append(variation.similarity)

    return AugmentedSample(
        image=image, mask=BitMask(mask), key=key, region_scores=tuple(scores)
    )


def copy_paste_augment(
    base: RasterImage,
    base_mask: BitMask,
    instances: Sequence[tuple[RasterImage, BitMask]],
    placements: Sequence[Rect],
    seed: int = 0,
) -> AugmentedSample:
    """Naive copy-paste baseline: stamp annotated instances into the base.

    Each placement receives one instance (chosen by the seeded RNG when there
    is more than one), scaled to the placement rect with nearest-neighbor so a
    same-size paste copies source pixels exactly. The output annotation mask
    is the base mask united with the placed instance masks.
    """
    if (base_mask.width, base_mask.height) != (base.width, base.height):
        raise GeometryError("base mask does not match base image dimensions")
    for i, (image, mask) in enumerate(instances):
        if (image.width, image.height) != (mask.width, mask.height):
            raise GeometryError(f"instance {i}: image and mask dimensions differ")

    out = base.data.copy()
    out_mask = base_mask.data.copy()
    if instances:
        rng = random.Random(seed)
        for rect in placements:
            if rect.x < 0 or rect.y < 0 or rect.x1 > base.width or rect.y1 > base.height:
                raise GeometryError(f"placement {rect} exceeds base bounds")
            image, mask = instances[rng.randrange(len(instances))]
            scaled = scale_nearest(image, rect.w, rect.h)
            scaled_mask = scale_mask_nearest(mask, rect.w, rect.h)
            window = out[rect.y : rect.y1, rect.x : rect.x1]
            window[scaled_mask.data] = scaled.data[scaled_mask.data]
            out_mask[rect.y : rect.y1, rect.x : rect.x1] |= scaled_mask.data

    return AugmentedSample(image=RasterImage(out), mask=BitMask(out_mask), key=None)
