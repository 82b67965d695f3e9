"""Binary-IoU evaluation of predicted masks against a dataset's ground truth.

Each class is a binary segmentation task. The aggregate IoU is micro-averaged
(summed intersections over summed unions), which differs from the mean of
per-image IoUs; both views are available in the report.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import DatasetManifest
from .errors import GeometryError, ManifestError
from .imaging import BitMask, read_mask_png


@dataclass(frozen=True)
class PerImageIou:
    sample_id: str
    intersection: int
    union: int
    iou: float
    both_empty: bool = False


@dataclass(frozen=True)
class IouReport:
    class_name: str
    per_image: tuple[PerImageIou, ...]
    aggregate_iou: float
    missing_predictions: tuple[str, ...] = ()

    @property
    def mean_iou(self) -> float:
        if not self.per_image:
            return 0.0
        return float(np.mean([e.iou for e in self.per_image]))

    def to_dict(self) -> dict:
        return {
            "class_name": self.class_name,
            "aggregate_iou": self.aggregate_iou,
            "mean_iou": self.mean_iou,
            "missing_predictions": list(self.missing_predictions),
            "per_image": [
                {
                    "id": e.sample_id,
                    "intersection": e.intersection,
                    "union": e.union,
                    "iou": e.iou,
                    "both_empty": e.both_empty,
                }
                for e in self.per_image
            ],
        }


def intersection_union(pred: BitMask, gt: BitMask) -> tuple[int, int]:
    if (pred.width, pred.height) != (gt.width, gt.height):
        raise GeometryError(
            f"prediction {pred.width}x{pred.height} does not match "
            f"ground truth {gt.width}x{gt.height}"
        )
    intersection = int(np.count_nonzero(pred.data & gt.data))
    union = int(np.count_nonzero(pred.data | gt.data))
    return intersection, union


def iou(pred: BitMask, gt: BitMask) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    intersection, union = intersection_union(pred, gt)
    if union == 0:
        return 1.0
    return intersection / union


def evaluate(
    predictions: Sequence[tuple[str, BitMask]],
    manifest: DatasetManifest,
    manifest_dir: Path | str,
) -> IouReport:
    """Score predictions against the manifest's ground-truth masks.

    Every prediction id must exist in the manifest. Manifest records with no
    prediction are scored as empty masks and listed in the report.
    """
    manifest_dir = Path(manifest_dir)
    known = {rec.id for rec in manifest.samples}
    by_id: dict[str, BitMask] = {}
    for sample_id, mask in predictions:
        if sample_id not in known:
            raise ManifestError(f"prediction for unknown sample id {sample_id!r}")
        by_id[sample_id] = mask

    per_image = []
    missing = []
    total_intersection = 0
    total_union = 0
    for rec in manifest.samples:
        gt = read_mask_png(manifest_dir / rec.mask_path)
        pred = by_id.get(rec.id)
        if pred is None:
            missing.append(rec.id)
            pred = BitMask.zeros(gt.width, gt.height)
        intersection, union = intersection_union(pred, gt)
        per_image.append(
            PerImageIou(
                sample_id=rec.id,
                intersection=intersection,
                union=union,
                iou=1.0 if union == 0 else intersection / union,
                both_empty=union == 0,
            )
        )
        total_intersection += intersection
        total_union += union

    aggregate = 1.0 if total_union == 0 else total_intersection / total_union
    return IouReport(
        class_name=manifest.task.class_name,
        per_image=tuple(per_image),
        aggregate_iou=aggregate,
        missing_predictions=tuple(missing),
    )


def format_report(report: IouReport) -> str:
    lines = [
        f"class: {report.class_name}",
        f"aggregate IoU (micro): {report.aggregate_iou:.4f}",
        f"mean IoU (per image):  {report.mean_iou:.4f}",
    ]
    if report.missing_predictions:
        lines.append(f"missing predictions: {', '.join(report.missing_predictions)}")
    lines.append(f"{'sample':<24} {'inter':>8} {'union':>8} {'IoU':>8}")
    for e in report.per_image:
        note = "  (both empty)" if e.both_empty else ""
        lines.append(f"{e.sample_id:<24} {e.intersection:>8} {e.union:>8} {e.iou:>8.4f}{note}")
    return "\n".join(lines)


def format_comparison(results: Mapping[str, Mapping[str, float]]) -> str:
    """Method-by-class IoU grid (methods as rows, classes as columns)."""
    classes = sorted({c for per_method in results.values() for c in per_method})
    width = max([len("method")] + [len(m) for m in results]) + 2
    header = "method".ljust(width) + "".join(c.rjust(max(len(c) + 2, 10)) for c in classes)
    lines = [header, "-" * len(header)]
    for method, per_class in results.items():
        row = method.ljust(width)
        for c in classes:
            cell = f"{per_class[c]:.2f}" if c in per_class else "-"
            row += cell.rjust(max(len(c) + 2, 10))
        lines.append(row)
    return "\n".join(lines)
