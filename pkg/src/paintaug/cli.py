"""Command-line entry points.

    augment generate       run region extraction + variation generation
    augment combine        enumerate/sample combinations and export a dataset
    augment extract-pairs  build self-supervised training pairs from boxes
    augment copy-paste     naive copy-paste baseline augmentation
    augment evaluate       binary-IoU report against a task manifest
    augment serve          start the studio backend
    augment serve-backends serve the deterministic mock model backends
"""
from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from pathlib import Path

from . import dataset as ds
from .backends.client import http_backends_from_env
from .backends.mock import MockBackends
from .combine import copy_paste_augment, count_combinations, sample_keys, realize
from .engine import GenerationConfig
from .errors import PipelineError
from .evaluate import evaluate, format_report
from .imaging import (
    BitMask,
    Rect,
    RunSeed,
    crop_mask,
    mask_bbox,
    read_image_png,
    read_mask_png,
    write_image_png,
    write_mask_png,
)
from .pipeline import load_run, run_generation, save_run

logger = logging.getLogger(__name__)


def _load_config(args) -> GenerationConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    if getattr(args, "threshold", None) is not None:
        values["similarity_threshold"] = args.threshold
    if getattr(args, "variations", None) is not None:
        values["variations_per_region"] = args.variations
    return GenerationConfig(**{**GenerationConfig().to_dict(), **values})


def _backends(args):
    if getattr(args, "backend_mode", "mock") == "http":
        return http_backends_from_env()
    return MockBackends()


def cmd_generate(args) -> int:
    manifest = ds.load_manifest(ds.manifest_path(args.task))
    cfg = _load_config(args)
    placement = read_mask_png(args.mask)
    run = run_generation(
        manifest,
        args.task,
        args.base,
        placement,
        cfg,
        _backends(args),
        RunSeed(args.seed),
        max_workers=args.workers,
    )
    save_run(run, args.out)
    n = len(run.regions)
    total = count_combinations(n, cfg.variations_per_region) if n else 0
    print(f"{n} regions, {sum(len(v) for v in run.variations.values())} variations, "
          f"{total} realizable combinations -> {args.out}")
    return 0


def cmd_combine(args) -> int:
    run = load_run(args.run_dir)
    manifest = ds.load_manifest(ds.manifest_path(args.task))
    n = len(run.regions)
    if n == 0:
        print("no regions in run; nothing to combine", file=sys.stderr)
        return 1
    exclude = {
        (t["region_index"], t["variation_index"])
        for t in manifest.provenance.get("tombstones", [])
        if t.get("base_image_id") == run.base_image_id
    }
    keys = sample_keys(
        n, run.config.variations_per_region, args.count, args.seed, exclude=exclude
    )
    samples = []
    for key in keys:
        sample = realize(run.base, run.regions, run.variations, key)
        samples.append((sample.image, sample.mask, key.to_string(), sample.region_scores))
    out_manifest = ds.export_augmented(
        manifest.task,
        samples,
        args.out,
        source_dir=args.task,
        run_seed=args.seed,
        config=run.config.to_dict(),
    )
    print(f"exported {len(out_manifest.samples)} records "
          f"({len(keys)} generated) -> {args.out}")
    return 0


def cmd_extract_pairs(args) -> int:
    boxes_by_image = ds.parse_boxes_file(args.boxes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    index = []
    for image_id, boxes in sorted(boxes_by_image.items()):
        image = read_image_png(Path(args.images) / f"{image_id}.png")
        pairs = ds.extract_training_pairs(image, boxes)
        for i, pair in enumerate(pairs):
            stem = f"{image_id}_{i}"
            write_image_png(pair.masked_base, out / f"{stem}_base.png")
            write_image_png(pair.reference, out / f"{stem}_reference.png")
            write_mask_png(pair.mask, out / f"{stem}_mask.png")
            write_image_png(pair.target, out / f"{stem}_target.png")
            index.append(
                {
                    "image_id": image_id,
                    "pair": i,
                    "box": {"x": pair.box.x, "y": pair.box.y, "w": pair.box.w, "h": pair.box.h},
                }
            )
    (out / "pairs.json").write_text(json.dumps(index, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(index)} training pairs -> {out}")
    return 0


def cmd_copy_paste(args) -> int:
    manifest = ds.load_manifest(ds.manifest_path(args.task))
    task_dir = Path(args.task)
    instances = []
    for ref, support in zip(ds.reference_crops(manifest.task, task_dir), manifest.task.support):
        mask = read_mask_png(task_dir / support.mask)
        box = mask_bbox(mask)
        instances.append((ref, crop_mask(mask, box)))

    rng = random.Random(args.seed)
    samples = []
    for i in range(args.count):
        entry = manifest.task.base_pool[rng.randrange(len(manifest.task.base_pool))]
        base = read_image_png(task_dir / entry.image)
        placements = []
        for _ in range(args.pastes):
            w = max(8, min(base.width // 4, instances[0][0].width))
            h = max(8, min(base.height // 4, instances[0][0].height))
            x = rng.randrange(max(1, base.width - w))
            y = rng.randrange(max(1, base.height - h))
            placements.append(Rect(x, y, w, h))
        sample = copy_paste_augment(
            base, BitMask.zeros(base.width, base.height), instances, placements,
            seed=rng.getrandbits(32),
        )
        samples.append((sample.image, sample.mask, None, ()))
    out_manifest = ds.export_augmented(
        manifest.task,
        samples,
        args.out,
        source_dir=task_dir,
        run_seed=args.seed,
        config={"pastes": args.pastes, "count": args.count},
        origin=ds.ORIGIN_COPY_PASTE,
    )
    print(f"exported {len(out_manifest.samples)} records -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    manifest = ds.load_manifest(ds.manifest_path(args.task))
    pred_dir = Path(args.predictions)
    predictions = []
    for rec in manifest.samples:
        path = pred_dir / f"{rec.id}.png"
        if path.is_file():
            predictions.append((rec.id, read_mask_png(path)))
    report = evaluate(predictions, manifest, args.task)
    print(format_report(report))
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"report -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        args.task,
        _backends(args),
        config=_load_config(args),
        run_seed=args.seed,
        job_workers=args.jobs,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_serve_backends(args) -> int:
    import uvicorn

    from .backends.app import create_backend_app

    uvicorn.run(create_backend_app(MockBackends()), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="augment", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, config=True):
        p.add_argument("--seed", type=int, default=0, help="root seed for reproducible runs")
        if config:
            p.add_argument("--config", help="JSON file of GenerationConfig overrides")
            p.add_argument("--threshold", type=float, help="similarity threshold override")
            p.add_argument("--variations", type=int, help="variations per region override")
            p.add_argument(
                "--backend-mode", choices=("mock", "http"), default="mock",
                help="in-process mocks or HTTP backends from INPAINT_URL/EMBED_URL/SEGMENT_URL",
            )

    p = sub.add_parser("generate", help="generate per-region variations for one base image")
    p.add_argument("--task", required=True, help="task directory (with task.json)")
    p.add_argument("--base", required=True, help="base image id from the task's pool")
    p.add_argument("--mask", required=True, help="placement mask PNG")
    p.add_argument("--out", required=True, help="output run directory")
    p.add_argument("--workers", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("combine", help="realize combinations from a run and export a dataset")
    p.add_argument("--run-dir", required=True, help="directory written by `augment generate`")
    p.add_argument("--task", required=True)
    p.add_argument("--count", type=int, default=1000, help="number of combinations to realize")
    p.add_argument("--out", required=True)
    common(p, config=False)
    p.set_defaults(func=cmd_combine)

    p = sub.add_parser("extract-pairs", help="self-supervised pairs from detection boxes")
    p.add_argument("--images", required=True, help="directory of <image_id>.png files")
    p.add_argument("--boxes", required=True, help="sidecar file: image_id x y w h per line")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract_pairs)

    p = sub.add_parser("copy-paste", help="copy-paste baseline augmentation")
    p.add_argument("--task", required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--pastes", type=int, default=2, help="instances pasted per sample")
    p.add_argument("--out", required=True)
    common(p, config=False)
    p.set_defaults(func=cmd_copy_paste)

    p = sub.add_parser("evaluate", help="binary-IoU report for predicted masks")
    p.add_argument("--task", required=True)
    p.add_argument("--predictions", required=True, help="directory of <sample_id>.png masks")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="start the studio backend")
    p.add_argument("--task", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8500)
    p.add_argument("--jobs", type=int, default=2, help="concurrent generation jobs")
    common(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("serve-backends", help="serve the mock model backends over HTTP")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8600)
    p.set_defaults(func=cmd_serve_backends)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
