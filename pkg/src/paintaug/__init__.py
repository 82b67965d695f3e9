"""paintaug: inpainting-based dataset augmentation for few-shot segmentation.

Turns a handful of annotated examples of a novel class into a large augmented
dataset: hand-drawn placement masks are split into regions, an inpainting
backend paints reference-conditioned variations into each region, a similarity
filter rejects off-semantics results, a segmentation backend refines the
annotation masks, and the per-region variations are composed combinatorially
into full samples.
"""

from .combine import (
    AugmentedSample,
    CombinationKey,
    copy_paste_augment,
    count_combinations,
    enumerate_keys,
    realize,
    sample_keys,
)
from .engine import GenerationConfig, Variation, composite_region, generate_region_variations, refine_mask
from .errors import (
    ConfigError,
    GeometryError,
    ManifestError,
    NumericError,
    PipelineError,
    ProtocolError,
    RemoteBackendError,
    TransportError,
)
from .evaluate import IouReport, evaluate, iou
from .imaging import BitMask, RasterImage, Rect, RunSeed, crop, dilate, mask_coverage
from .regions import RegionSpec, extract_regions

__version__ = "0.1.0"

__all__ = [
    "AugmentedSample",
    "BitMask",
    "CombinationKey",
    "ConfigError",
    "GenerationConfig",
    "GeometryError",
    "IouReport",
    "ManifestError",
    "NumericError",
    "PipelineError",
    "ProtocolError",
    "RasterImage",
    "Rect",
    "RegionSpec",
    "RemoteBackendError",
    "RunSeed",
    "TransportError",
    "Variation",
    "composite_region",
    "copy_paste_augment",
    "count_combinations",
    "crop",
    "dilate",
    "enumerate_keys",
    "evaluate",
    "extract_regions",
    "generate_region_variations",
    "iou",
    "mask_coverage",
    "realize",
    "refine_mask",
    "sample_keys",
]
