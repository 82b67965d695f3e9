"""On-disk dataset model: few-shot tasks, manifests, and training-pair extraction.

A task directory looks like:

    task.json        # the manifest
    images/*.png     # support images, base images, generated samples
    masks/*.png      # annotation masks and placement masks
    refs/*.png       # reference crops used to condition generation

``task.json`` is a single JSON document; unknown fields survive a load/save
round-trip so newer writers do not lose data through older readers.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image

from .errors import GeometryError, ManifestError
from .imaging import (
    BitMask,
    RasterImage,
    Rect,
    crop,
    mask_bbox,
    read_image_png,
    read_mask_png,
    write_image_png,
    write_mask_png,
)

MANIFEST_FILENAME = "task.json"
MANIFEST_SCHEMA_VERSION = 1

ORIGIN_ANNOTATED = "annotated"
ORIGIN_GENERATED = "generated"
ORIGIN_COPY_PASTE = "copy_paste"
_ORIGINS = (ORIGIN_ANNOTATED, ORIGIN_GENERATED, ORIGIN_COPY_PASTE)

DEFAULT_SUPPORT_SIZE = 5
DEFAULT_BASE_POOL_SIZE = 10


@dataclass(frozen=True)
class SupportExample:
    image: str
    mask: str


@dataclass(frozen=True)
class BaseImageEntry:
    id: str
    image: str
    mask: str | None = None  # placement mask, if one has been saved


@dataclass(frozen=True)
class FewShotTask:
    class_name: str
    support: tuple[SupportExample, ...]
    base_pool: tuple[BaseImageEntry, ...]

    def __post_init__(self):
        if not self.support:
            raise ManifestError("task support set must be non-empty")

    def base_entry(self, base_image_id: str) -> BaseImageEntry:
        for entry in self.base_pool:
            if entry.id == base_image_id:
                return entry
        raise ManifestError(f"unknown base image id {base_image_id!r}")


@dataclass(frozen=True)
class SampleRecord:
    id: str
    image_path: str
    mask_path: str
    origin: str
    combination_key: str | None = None
    scores: tuple[float, ...] = ()
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.origin not in _ORIGINS:
            raise ManifestError(f"record {self.id!r}: unknown origin {self.origin!r}")
        if self.origin == ORIGIN_GENERATED and not self.combination_key:
            raise ManifestError(f"record {self.id!r}: generated records need a combination key")
        if self.combination_key is not None:
            from .combine import CombinationKey

            try:
                CombinationKey.from_string(self.combination_key)
            except Exception as e:
                raise ManifestError(
                    f"record {self.id!r}: bad combination key {self.combination_key!r}: {e}"
                ) from e


@dataclass(frozen=True)
class DatasetManifest:
    version: int
    task: FewShotTask
    samples: tuple[SampleRecord, ...]
    provenance: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def record(self, sample_id: str) -> SampleRecord:
        for rec in self.samples:
            if rec.id == sample_id:
                return rec
        raise ManifestError(f"unknown sample id {sample_id!r}")


@dataclass(frozen=True, eq=False)
class TrainingPair:
    """Self-supervised inpainting example built from one detection box.

    ``mask`` is the filled box, ``reference`` the patch inside the box,
    ``target`` the untouched original, and ``masked_base`` the original with
    the box blanked to zero.
    """

    masked_base: RasterImage
    reference: RasterImage
    mask: BitMask
    target: RasterImage
    box: Rect


# ---------------------------------------------------------------------------
# Training-pair extraction
# ---------------------------------------------------------------------------


def extract_training_pairs(image: RasterImage, boxes: Sequence[Rect]) -> list[TrainingPair]:
    """Turn each detection box into a (masked base, reference, mask, target) pair."""
    pairs = []
    for i, box in enumerate(boxes):
        if box.x < 0 or box.y < 0 or box.x1 > image.width or box.y1 > image.height:
            raise GeometryError(f"box {i} ({box}) exceeds image bounds {image.width}x{image.height}")
        mask = np.zeros((image.height, image.width), dtype=bool)
        mask[box.y : box.y1, box.x : box.x1] = True
        blanked = image.data.copy()
        blanked[box.y : box.y1, box.x : box.x1] = 0
        pairs.append(
            TrainingPair(
                masked_base=RasterImage(blanked),
                reference=crop(image, box),
                mask=BitMask(mask),
                target=image,
                box=box,
            )
        )
    return pairs


def parse_boxes_file(path: Path | str) -> dict[str, list[Rect]]:
    """Parse a boxes sidecar: one `image_id x y w h` line per box."""
    boxes: dict[str, list[Rect]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ManifestError(f"{path}:{lineno}: expected `image_id x y w h`, got {line!r}")
        image_id = parts[0]
        try:
            x, y, w, h = (int(p) for p in parts[1:])
        except ValueError as e:
            raise ManifestError(f"{path}:{lineno}: non-integer box coordinate") from e
        try:
            rect = Rect(x, y, w, h)
        except GeometryError as e:
            raise ManifestError(f"{path}:{lineno}: {e}") from e
        boxes.setdefault(image_id, []).append(rect)
    return boxes


# ---------------------------------------------------------------------------
# Manifest load/save
# ---------------------------------------------------------------------------

_TASK_KEYS = {"class_name", "support", "base_pool"}
_RECORD_KEYS = {"id", "image", "mask", "origin", "combination_key", "scores"}
_TOP_KEYS = {"schema_version", "task", "samples", "provenance"}


def manifest_path(task_dir: Path | str) -> Path:
    return Path(task_dir) / MANIFEST_FILENAME


def save_manifest(manifest: DatasetManifest, path: Path | str) -> None:
    payload = manifest_to_dict(manifest)
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise ManifestError(f"failed to write manifest: {path}") from e


def load_manifest(path: Path | str, *, validate_files: bool = True) -> DatasetManifest:
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ManifestError(f"manifest not found or unreadable: {path}") from e
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest is not valid JSON: {path}") from e
    if not isinstance(data, dict):
        raise ManifestError(f"manifest must be a JSON object: {path}")
    version = data.get("schema_version")
    if version != MANIFEST_SCHEMA_VERSION:
        raise ManifestError(
            f"unsupported manifest schema_version {version!r} (expected {MANIFEST_SCHEMA_VERSION})"
        )
    manifest = _manifest_from_dict(data)
    _check_duplicate_ids(manifest)
    if validate_files:
        validate_manifest_files(manifest, path.parent)
    return manifest


def _check_duplicate_ids(manifest: DatasetManifest) -> None:
    seen: set[str] = set()
    dupes: list[str] = []
    for rec in manifest.samples:
        if rec.id in seen and rec.id not in dupes:
            dupes.append(rec.id)
        seen.add(rec.id)
    if dupes:
        raise ManifestError(f"duplicate sample ids: {', '.join(sorted(dupes))}")


def validate_manifest_files(manifest: DatasetManifest, base_dir: Path) -> None:
    """Check that every referenced file exists and image/mask dimensions agree."""
    for s in manifest.task.support:
        _check_pair(base_dir, s.image, s.mask, f"support example {s.image!r}")
    for entry in manifest.task.base_pool:
        _check_pair(base_dir, entry.image, entry.mask, f"base image {entry.id!r}")
    for rec in manifest.samples:
        _check_pair(base_dir, rec.image_path, rec.mask_path, f"record {rec.id!r}")


def _check_pair(base_dir: Path, image_rel: str, mask_rel: str | None, what: str) -> None:
    image_path = base_dir / image_rel
    if not image_path.is_file():
        raise ManifestError(f"{what}: missing image file {image_rel}")
    with Image.open(image_path) as im:
        size = im.size
    if mask_rel is None:
        return
    mask_path = base_dir / mask_rel
    if not mask_path.is_file():
        raise ManifestError(f"{what}: missing mask file {mask_rel}")
    with Image.open(mask_path) as mm:
        if mm.size != size:
            raise ManifestError(
                f"{what}: mask {mask_rel} is {mm.size[0]}x{mm.size[1]} but image is "
                f"{size[0]}x{size[1]}"
            )


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    task = manifest.task
    task_dict = {
        "class_name": task.class_name,
        "support": [{"image": s.image, "mask": s.mask} for s in task.support],
        "base_pool": [
            {"id": e.id, "image": e.image, "mask": e.mask} for e in task.base_pool
        ],
    }
    samples = []
    for rec in manifest.samples:
        d = {
            "id": rec.id,
            "image": rec.image_path,
            "mask": rec.mask_path,
            "origin": rec.origin,
            "combination_key": rec.combination_key,
            "scores": list(rec.scores),
        }
        d.update(rec.extra)
        samples.append(d)
    out = {
        "schema_version": manifest.version,
        "task": task_dict,
        "samples": samples,
        "provenance": manifest.provenance,
    }
    out.update(manifest.extra)
    return out


def _manifest_from_dict(data: dict) -> DatasetManifest:
    task_data = data.get("task")
    if not isinstance(task_data, dict):
        raise ManifestError("manifest missing 'task' object")
    support = tuple(
        SupportExample(image=s["image"], mask=s["mask"]) for s in task_data.get("support", [])
    )
    base_pool = tuple(
        BaseImageEntry(id=e["id"], image=e["image"], mask=e.get("mask"))
        for e in task_data.get("base_pool", [])
    )
    task = FewShotTask(class_name=task_data.get("class_name", ""), support=support, base_pool=base_pool)

    samples = []
    for raw in data.get("samples", []):
        try:
            rec = SampleRecord(
                id=raw["id"],
                image_path=raw["image"],
                mask_path=raw["mask"],
                origin=raw["origin"],
                combination_key=raw.get("combination_key"),
                scores=tuple(float(v) for v in raw.get("scores", [])),
                extra={k: v for k, v in raw.items() if k not in _RECORD_KEYS},
            )
        except KeyError as e:
            raise ManifestError(f"sample record missing key {e}") from e
        samples.append(rec)

    return DatasetManifest(
        version=data["schema_version"],
        task=task,
        samples=tuple(samples),
        provenance=dict(data.get("provenance", {})),
        extra={k: v for k, v in data.items() if k not in _TOP_KEYS},
    )


# ---------------------------------------------------------------------------
# Task-directory construction and export
# ---------------------------------------------------------------------------


def config_hash(config: Mapping | None) -> str:
    canonical = json.dumps(config or {}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def init_task_dir(
    class_name: str,
    supports: Sequence[tuple[RasterImage, BitMask]],
    base_images: Sequence[tuple[str, RasterImage, BitMask | None]],
    out_dir: Path | str,
) -> DatasetManifest:
    """Write a fresh task directory holding only annotated data."""
    out = Path(out_dir)
    for sub in ("images", "masks", "refs"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    support_entries = []
    records = []
    for k, (image, mask) in enumerate(supports):
        image_rel = f"images/support_{k}.png"
        mask_rel = f"masks/support_{k}.png"
        write_image_png(image, out / image_rel)
        write_mask_png(mask, out / mask_rel)
        support_entries.append(SupportExample(image=image_rel, mask=mask_rel))
        records.append(
            SampleRecord(id=f"support_{k}", image_path=image_rel, mask_path=mask_rel, origin=ORIGIN_ANNOTATED)
        )

    base_entries = []
    for base_id, image, placement in base_images:
        image_rel = f"images/base_{base_id}.png"
        write_image_png(image, out / image_rel)
        mask_rel = None
        if placement is not None:
            mask_rel = f"masks/placement_{base_id}.png"
            write_mask_png(placement, out / mask_rel)
        base_entries.append(BaseImageEntry(id=base_id, image=image_rel, mask=mask_rel))

    task = FewShotTask(class_name=class_name, support=tuple(support_entries), base_pool=tuple(base_entries))
    manifest = DatasetManifest(
        version=MANIFEST_SCHEMA_VERSION,
        task=task,
        samples=tuple(records),
        provenance={},
    )
    save_manifest(manifest, manifest_path(out))
    return manifest


def reference_crops(task: FewShotTask, task_dir: Path | str) -> list[RasterImage]:
    """Reference image per support example: the support image cropped to the
    bounding box of its annotation mask."""
    task_dir = Path(task_dir)
    refs = []
    for k, s in enumerate(task.support):
        image = read_image_png(task_dir / s.image)
        mask = read_mask_png(task_dir / s.mask)
        box = mask_bbox(mask)
        if box is None:
            raise ManifestError(f"support example {k} has an empty annotation mask")
        refs.append(crop(image, box))
    return refs


def export_augmented(
    task: FewShotTask,
    samples: Iterable[tuple[RasterImage, BitMask, str | None, Sequence[float]]],
    out_dir: Path | str,
    *,
    source_dir: Path | str,
    run_seed: int | None = None,
    config: Mapping | None = None,
    created: str | None = "auto",
    origin: str = ORIGIN_GENERATED,
) -> DatasetManifest:
    """Write a self-contained augmented dataset directory.

    The support set (and base pool) are copied from ``source_dir``; generated
    samples are written as PNG pairs. The manifest lists the annotated support
    records first, then the generated records. ``created="auto"`` stamps the
    current UTC time; pass None to omit the timestamp entirely.
    """
    src = Path(source_dir)
    out = Path(out_dir)
    for sub in ("images", "masks", "refs"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    support_entries = []
    records = []
    for k, s in enumerate(task.support):
        image_rel = f"images/support_{k}.png"
        mask_rel = f"masks/support_{k}.png"
        write_image_png(read_image_png(src / s.image), out / image_rel)
        write_mask_png(read_mask_png(src / s.mask), out / mask_rel)
        support_entries.append(SupportExample(image=image_rel, mask=mask_rel))
        records.append(
            SampleRecord(id=f"support_{k}", image_path=image_rel, mask_path=mask_rel, origin=ORIGIN_ANNOTATED)
        )

    base_entries = []
    for entry in task.base_pool:
        image_rel = f"images/base_{entry.id}.png"
        write_image_png(read_image_png(src / entry.image), out / image_rel)
        mask_rel = None
        if entry.mask is not None:
            mask_rel = f"masks/placement_{entry.id}.png"
            write_mask_png(read_mask_png(src / entry.mask), out / mask_rel)
        base_entries.append(BaseImageEntry(id=entry.id, image=image_rel, mask=mask_rel))

    for k, ref in enumerate(reference_crops(task, src)):
        write_image_png(ref, out / f"refs/ref_{k}.png")

    for i, (image, mask, key, scores) in enumerate(samples):
        if (image.width, image.height) != (mask.width, mask.height):
            raise GeometryError(
                f"sample {i}: image {image.width}x{image.height} does not match "
                f"mask {mask.width}x{mask.height}"
            )
        sample_id = f"{origin}_{i:05d}"
        image_rel = f"images/{sample_id}.png"
        mask_rel = f"masks/{sample_id}.png"
        write_image_png(image, out / image_rel)
        write_mask_png(mask, out / mask_rel)
        records.append(
            SampleRecord(
                id=sample_id,
                image_path=image_rel,
                mask_path=mask_rel,
                origin=origin,
                combination_key=key,
                scores=tuple(float(v) for v in scores),
            )
        )

    provenance: dict = {"run_seed": run_seed, "config_hash": config_hash(config)}
    if config is not None:
        provenance["config"] = dict(config)
    if created == "auto":
        provenance["created"] = datetime.now(timezone.utc).isoformat()
    elif created is not None:
        provenance["created"] = created

    new_task = FewShotTask(
        class_name=task.class_name, support=tuple(support_entries), base_pool=tuple(base_entries)
    )
    manifest = DatasetManifest(
        version=MANIFEST_SCHEMA_VERSION,
        task=new_task,
        samples=tuple(records),
        provenance=provenance,
    )
    save_manifest(manifest, manifest_path(out))
    return manifest


def append_generated(
    manifest: DatasetManifest,
    task_dir: Path | str,
    sample_id: str,
    image: RasterImage,
    mask: BitMask,
    combination_key: str,
    scores: Sequence[float],
    extra: Mapping | None = None,
) -> DatasetManifest:
    """Write one generated sample into an existing task directory and return
    the updated manifest (also saved to disk)."""
    task_dir = Path(task_dir)
    for rec in manifest.samples:
        if rec.id == sample_id:
            raise ManifestError(f"sample id {sample_id!r} already present")
    image_rel = f"images/{sample_id}.png"
    mask_rel = f"masks/{sample_id}.png"
    (task_dir / "images").mkdir(exist_ok=True)
    (task_dir / "masks").mkdir(exist_ok=True)
    write_image_png(image, task_dir / image_rel)
    write_mask_png(mask, task_dir / mask_rel)
    record = SampleRecord(
        id=sample_id,
        image_path=image_rel,
        mask_path=mask_rel,
        origin=ORIGIN_GENERATED,
        combination_key=combination_key,
        scores=tuple(float(v) for v in scores),
        extra=dict(extra or {}),
    )
    updated = replace(manifest, samples=manifest.samples + (record,))
    save_manifest(updated, manifest_path(task_dir))
    return updated
