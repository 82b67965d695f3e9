#!/usr/bin/env python3
"""Build a synthetic demo task directory.

Creates a small few-shot task with procedurally drawn scenes: noisy terrain
base images, support examples containing a bright elliptical object with its
annotation mask, and a two-blob placement mask on the first base image.

Usage: python scripts/make_demo_task.py --out demo_task [--seed 0]
"""
import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from paintaug.dataset import DEFAULT_BASE_POOL_SIZE, DEFAULT_SUPPORT_SIZE, init_task_dir
from paintaug.imaging import BitMask, RasterImage


def terrain(rng: np.random.Generator, size: int) -> np.ndarray:
    """Smooth pseudo-terrain: blurred noise mixed into a green/brown palette."""
    coarse = rng.random((size // 8, size // 8))
    field = np.kron(coarse, np.ones((8, 8)))[:size, :size]
    r = (60 + 80 * field).astype(np.uint8)
    g = (90 + 100 * field).astype(np.uint8)
    b = (50 + 40 * field).astype(np.uint8)
    return np.stack([r, g, b], axis=-1)


def support_example(rng: np.random.Generator, size: int = 64):
    scene = terrain(rng, size)
    yy, xx = np.mgrid[0:size, 0:size]
    cy, cx = size // 2, size // 2
    ry, rx = int(rng.integers(8, 14)), int(rng.integers(10, 18))
    obj = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    color = np.array([220, 225, 235], dtype=np.uint8)  # bright hull
    scene[obj] = color + rng.integers(-12, 12, 3).astype(np.int16).astype(np.uint8)
    return RasterImage(scene), BitMask(obj)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--supports", type=int, default=DEFAULT_SUPPORT_SIZE)
    parser.add_argument("--bases", type=int, default=DEFAULT_BASE_POOL_SIZE)
    parser.add_argument("--size", type=int, default=256)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    supports = [support_example(rng) for _ in range(args.supports)]

    placement = np.zeros((args.size, args.size), dtype=bool)
    placement[40:70, 48:86] = True
    placement[150:175, 160:195] = True

    bases = []
    for i in range(args.bases):
        mask = BitMask(placement) if i == 0 else None
        bases.append((f"b{i}", RasterImage(terrain(rng, args.size)), mask))

    manifest = init_task_dir("demo-class", supports, bases, args.out)
    print(f"task directory ready at {args.out}: {len(manifest.samples)} annotated records, "
          f"{len(manifest.task.base_pool)} base images")
    return 0


if __name__ == "__main__":
    sys.exit(main())
