"""Per-region variation generation with similarity filtering and mask refinement.

For each region the engine asks the inpainting backend for candidates, scores
each candidate's object area against its conditioning reference with the
embedding backend, and regenerates (new seed, next reference) while the score
stays below the threshold. The kept candidate's object mask is then refined by
the segmentation backend, constrained to a dilation of the placement mask.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

from .backends.protocol import (
    Backends,
    EmbedRequest,
    InpaintRequest,
    SegmentRequest,
    cosine,
)
from .errors import ConfigError, GeometryError, PipelineError
from .imaging import (
    BitMask,
    RasterImage,
    RunSeed,
    crop,
    dilate,
    mask_bbox,
    scale_nearest,
)
from .regions import RegionSpec

FLAG_BELOW_THRESHOLD = "below_threshold"
FLAG_MASK_FALLBACK = "mask_fallback"


class GenerationError(PipelineError):
    """A backend call failed; carries which unit of work was running."""

    def __init__(self, message: str, *, region_index: int, variation_index: int,
                 attempt: int | None = None):
        super().__init__(message)
        self.region_index = region_index
        self.variation_index = variation_index
        self.attempt = attempt


@dataclass(frozen=True)
class GenerationConfig:
    variations_per_region: int = 4
    similarity_threshold: float = 0.75
    max_attempts: int = 5
    dilation_radius: int = 5
    min_refined_fraction: float = 0.2

    def __post_init__(self):
        if self.variations_per_region < 1:
            raise ConfigError("variations_per_region must be >= 1")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be >= 1")
        if not (-1.0 < self.similarity_threshold < 1.0):
            raise ConfigError("similarity_threshold must lie in (-1, 1)")
        if self.dilation_radius < 0:
            raise ConfigError("dilation_radius must be >= 0")

    def to_dict(self) -> dict:
        return {
            "variations_per_region": self.variations_per_region,
            "similarity_threshold": self.similarity_threshold,
            "max_attempts": self.max_attempts,
            "dilation_radius": self.dilation_radius,
            "min_refined_fraction": self.min_refined_fraction,
        }


@dataclass(frozen=True, eq=False)
class Variation:
    """One generated candidate for a region, with its score and refined mask."""

    region_index: int
    variation_index: int
    image: RasterImage
    refined_mask: BitMask
    similarity: float
    reference_index: int
    attempts_used: int
    flags: frozenset[str] = field(default_factory=frozenset)


def composite_region(base: RasterImage, region: RegionSpec, candidate: RasterImage) -> RasterImage:
    """Write candidate pixels into ``base`` wherever the region mask is set.

    Pixels with a clear mask bit keep their base values, including inside the
    crop window, so compositing never disturbs unmasked content.
    """
    rect = region.rect
    if (candidate.width, candidate.height) != (rect.w, rect.h):
        raise GeometryError(
            f"candidate {candidate.width}x{candidate.height} does not match "
            f"region rect {rect.w}x{rect.h}"
        )
    out = base.data.copy()
    window = out[rect.y : rect.y1, rect.x : rect.x1]
    window[region.region_mask.data] = candidate.data[region.region_mask.data]
    return RasterImage(out)


def refine_mask(
    candidate: RasterImage,
    region: RegionSpec,
    cfg: GenerationConfig,
    backends: Backends,
) -> tuple[BitMask, frozenset[str]]:
    """Segment the generated object and constrain it to the placement area.

    The segmentation result is intersected with a ``dilation_radius`` dilation
    of the region mask. If that leaves less than ``min_refined_fraction`` of
    the region mask's area, the region mask itself is returned with the
    fallback flag set.
    """
    if (candidate.width, candidate.height) != (region.rect.w, region.rect.h):
        raise GeometryError(
            f"candidate {candidate.width}x{candidate.height} does not match "
            f"region rect {region.rect.w}x{region.rect.h}"
        )
    prompt_box = mask_bbox(region.region_mask)
    if prompt_box is None:
        return region.region_mask, frozenset({FLAG_MASK_FALLBACK})
    response = backends.segment(
        SegmentRequest(image=candidate, prompt_box=prompt_box, hint_mask=region.region_mask)
    )
    allowed = dilate(region.region_mask, cfg.dilation_radius)
    refined = response.mask & allowed
    if refined.count < cfg.min_refined_fraction * region.region_mask.count:
        return region.region_mask, frozenset({FLAG_MASK_FALLBACK})
    return refined, frozenset()


def generate_region_variations(
    region: RegionSpec,
    base: RasterImage,
    references: list[RasterImage],
    cfg: GenerationConfig,
    backends: Backends,
    run_seed: RunSeed = RunSeed(0),
) -> list[Variation]:
    """Generate the configured number of scored variations for one region.

    Variation ``l`` starts from reference ``l mod K`` and may regenerate up to
    ``max_attempts`` times, moving to the next reference each attempt. The
    first candidate at or above the similarity threshold wins; when the budget
    runs out the best-scoring candidate is kept and flagged.
    """
    if not references:
        raise ConfigError("at least one reference image is required")
    base_crop = crop(base, region.rect)
    return [
        _generate_one(region, base_crop, references, cfg, backends, run_seed, l)
        for l in range(cfg.variations_per_region)
    ]


def _generate_one(
    region: RegionSpec,
    base_crop: RasterImage,
    references: list[RasterImage],
    cfg: GenerationConfig,
    backends: Backends,
    run_seed: RunSeed,
    variation_index: int,
) -> Variation:
    k = len(references)
    object_box = mask_bbox(region.region_mask)
    ref_vectors: dict[int, tuple[float, ...]] = {}

    best: tuple[float, RasterImage, int] | None = None  # (similarity, image, ref index)
    accepted = False
    attempts = 0
    for attempt in range(cfg.max_attempts):
        attempts = attempt + 1
        ref_index = (variation_index + attempt) % k
        seed = run_seed.derive(region.index, variation_index, attempt)
        try:
            response = backends.inpaint(
                InpaintRequest(
                    base_crop=base_crop,
                    mask=region.region_mask,
                    reference=references[ref_index],
                    seed=seed,
                )
            )
            candidate = response.image
            object_area = crop(candidate, object_box) if object_box is not None else candidate
            if ref_index not in ref_vectors:
                ref_vectors[ref_index] = backends.embed(
                    EmbedRequest(image=references[ref_index])
                ).vector
            similarity = cosine(
                backends.embed(EmbedRequest(image=object_area)).vector, ref_vectors[ref_index]
            )
        except PipelineError as e:
            raise GenerationError(
                f"region {region.index}, variation {variation_index}, attempt {attempt}: {e}",
                region_index=region.index,
                variation_index=variation_index,
                attempt=attempt,
            ) from e
        if best is None or similarity > best[0]:
            best = (similarity, candidate, ref_index)
        if similarity >= cfg.similarity_threshold:
            best = (similarity, candidate, ref_index)
            accepted = True
            break

    similarity, image, ref_index = best
    flags = set()
    if not accepted:
        flags.add(FLAG_BELOW_THRESHOLD)
    try:
        refined, refine_flags = refine_mask(image, region, cfg, backends)
    except PipelineError as e:
        raise GenerationError(
            f"region {region.index}, variation {variation_index}, mask refinement: {e}",
            region_index=region.index,
            variation_index=variation_index,
        ) from e
    flags |= refine_flags
    return Variation(
        region_index=region.index,
        variation_index=variation_index,
        image=image,
        refined_mask=refined,
        similarity=similarity,
        reference_index=ref_index,
        attempts_used=attempts,
        flags=frozenset(flags),
    )


def generate_for_regions(
    regions: list[RegionSpec],
    base: RasterImage,
    references: list[RasterImage],
    cfg: GenerationConfig,
    backends: Backends,
    run_seed: RunSeed = RunSeed(0),
    max_workers: int = 1,
    progress: Callable[[int, int], None] | None = None,
) -> dict[int, list[Variation]]:
    """Run the variation loop for every region, optionally in parallel.

    Region/variation units are independent and the backends are required to be
    pure, so results are deterministic regardless of completion order; they
    are returned keyed by region index with variations ordered by index.
    ``progress`` is invoked once per finished (region, variation) unit.
    """
    units = [
        (region, l)
        for region in regions
        for l in range(cfg.variations_per_region)
    ]

    def run_unit(unit):
        region, l = unit
        base_crop = crop(base, region.rect)
        variation = _generate_one(region, base_crop, references, cfg, backends, run_seed, l)
        if progress is not None:
            progress(region.index, l)
        return variation

    if max_workers <= 1:
        produced = [run_unit(u) for u in units]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            produced = list(pool.map(run_unit, units))

    out: dict[int, list[Variation]] = {region.index: [] for region in regions}
    for variation in produced:
        out[variation.region_index].append(variation)
    for variations in out.values():
        variations.sort(key=lambda v: v.variation_index)
    return out


def preview_composite(
    base: RasterImage, region: RegionSpec, variation: Variation, max_edge: int = 512
) -> RasterImage:
    """Downscaled full-image composite used for review UIs."""
    composed = composite_region(base, region, variation.image)
    longest = max(composed.width, composed.height)
    if longest <= max_edge:
        return composed
    scale = max_edge / longest
    return scale_nearest(
        composed, max(1, int(composed.width * scale)), max(1, int(composed.height * scale))
    )
