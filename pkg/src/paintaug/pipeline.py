"""Orchestration shared by the CLI and the HTTP service.

Glues the stages together for one base image: load assets, extract regions,
run the variation engine, and persist/reload the per-region variations so
combination and export can run as separate steps.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .backends.protocol import Backends
from .dataset import DatasetManifest, reference_crops
from .engine import GenerationConfig, Variation, generate_for_regions
from .errors import ManifestError
from .imaging import (
    BitMask,
    RasterImage,
    Rect,
    RunSeed,
    read_image_png,
    read_mask_png,
    write_image_png,
    write_mask_png,
)
from .regions import RegionSpec, extract_regions

VARIATIONS_FILENAME = "variations.json"


@dataclass(frozen=True)
class GenerationRun:
    """Everything produced by the generation stage for one base image."""

    base_image_id: str
    base: RasterImage
    regions: list[RegionSpec]
    variations: dict[int, list[Variation]]
    config: GenerationConfig
    run_seed: RunSeed


def run_generation(
    manifest: DatasetManifest,
    task_dir: Path | str,
    base_image_id: str,
    placement_mask: BitMask,
    cfg: GenerationConfig,
    backends: Backends,
    run_seed: RunSeed,
    *,
    max_workers: int = 1,
    progress: Callable[[int, int], None] | None = None,
) -> GenerationRun:
    task_dir = Path(task_dir)
    entry = manifest.task.base_entry(base_image_id)
    base = read_image_png(task_dir / entry.image)
    regions = extract_regions(base, placement_mask)
    references = reference_crops(manifest.task, task_dir)
    variations = generate_for_regions(
        regions, base, references, cfg, backends, run_seed,
        max_workers=max_workers, progress=progress,
    )
    return GenerationRun(
        base_image_id=base_image_id,
        base=base,
        regions=regions,
        variations=variations,
        config=cfg,
        run_seed=run_seed,
    )


def save_run(run: GenerationRun, out_dir: Path | str) -> None:
    """Persist a generation run: index JSON plus per-variation PNG pairs."""
    out = Path(out_dir)
    (out / "var_images").mkdir(parents=True, exist_ok=True)
    (out / "var_masks").mkdir(parents=True, exist_ok=True)
    write_image_png(run.base, out / "base.png")

    entries = []
    for region in run.regions:
        mask_rel = f"var_masks/region_{region.index}.png"
        write_mask_png(region.region_mask, out / mask_rel)
        for v in run.variations[region.index]:
            image_rel = f"var_images/r{region.index}_v{v.variation_index}.png"
            refined_rel = f"var_masks/r{region.index}_v{v.variation_index}.png"
            write_image_png(v.image, out / image_rel)
            write_mask_png(v.refined_mask, out / refined_rel)
            entries.append(
                {
                    "region_index": v.region_index,
                    "variation_index": v.variation_index,
                    "image": image_rel,
                    "refined_mask": refined_rel,
                    "similarity": v.similarity,
                    "reference_index": v.reference_index,
                    "attempts_used": v.attempts_used,
                    "flags": sorted(v.flags),
                }
            )

    index = {
        "base_image_id": run.base_image_id,
        "base_image": "base.png",
        "regions": [
            {
                "index": r.index,
                "rect": {"x": r.rect.x, "y": r.rect.y, "w": r.rect.w, "h": r.rect.h},
                "region_mask": f"var_masks/region_{r.index}.png",
                "coverage": r.coverage,
                "feasible": r.feasible,
            }
            for r in run.regions
        ],
        "variations": entries,
        "config": run.config.to_dict(),
        "run_seed": run.run_seed.root,
    }
    (out / VARIATIONS_FILENAME).write_text(
        json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_run(run_dir: Path | str) -> GenerationRun:
    run_dir = Path(run_dir)
    index_path = run_dir / VARIATIONS_FILENAME
    try:
        index = json.loads(index_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ManifestError(f"cannot read variations index at {index_path}: {e}") from e

    base = read_image_png(run_dir / index["base_image"])
    regions = []
    for r in index["regions"]:
        rect = Rect(r["rect"]["x"], r["rect"]["y"], r["rect"]["w"], r["rect"]["h"])
        regions.append(
            RegionSpec(
                index=r["index"],
                rect=rect,
                region_mask=read_mask_png(run_dir / r["region_mask"]),
                coverage=r["coverage"],
                feasible=r["feasible"],
            )
        )

    variations: dict[int, list[Variation]] = {r.index: [] for r in regions}
    for e in index["variations"]:
        variations[e["region_index"]].append(
            Variation(
                region_index=e["region_index"],
                variation_index=e["variation_index"],
                image=read_image_png(run_dir / e["image"]),
                refined_mask=read_mask_png(run_dir / e["refined_mask"]),
                similarity=e["similarity"],
                reference_index=e["reference_index"],
                attempts_used=e["attempts_used"],
                flags=frozenset(e["flags"]),
            )
        )
    for entries in variations.values():
        entries.sort(key=lambda v: v.variation_index)

    return GenerationRun(
        base_image_id=index["base_image_id"],
        base=base,
        regions=regions,
        variations=variations,
        config=GenerationConfig(**index["config"]),
        run_seed=RunSeed(index["run_seed"]),
    )
