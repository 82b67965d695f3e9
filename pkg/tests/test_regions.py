import numpy as np
import pytest

from paintaug.errors import ConfigError, GeometryError
from paintaug.imaging import BitMask, mask_coverage
from paintaug.regions import extract_regions, place_region_mask, region_summaries

from conftest import blob_mask, random_image


def components_bruteforce(data: np.ndarray) -> list[set[tuple[int, int]]]:
    """8-connected flood fill, independent of the scipy-backed implementation."""
    h, w = data.shape
    seen = np.zeros_like(data, dtype=bool)
    out = []
    for y in range(h):
        for x in range(w):
            if data[y, x] and not seen[y, x]:
                comp = set()
                stack = [(y, x)]
                seen[y, x] = True
                while stack:
                    cy, cx = stack.pop()
                    comp.add((cy, cx))
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            ny, nx = cy + dy, cx + dx
                            if 0 <= ny < h and 0 <= nx < w and data[ny, nx] and not seen[ny, nx]:
                                seen[ny, nx] = True
                                stack.append((ny, nx))
                out.append(comp)
    return out


def test_all_zero_mask_gives_empty_list(rng):
    base = random_image(rng, 64, 64)
    assert extract_regions(base, BitMask.zeros(64, 64)) == []


def test_size_mismatch_is_geometry_error(rng):
    base = random_image(rng, 64, 64)
    with pytest.raises(GeometryError):
        extract_regions(base, BitMask.zeros(32, 32))


def test_invalid_band_rejected(rng):
    base = random_image(rng, 16, 16)
    with pytest.raises(ConfigError):
        extract_regions(base, BitMask.ones(16, 16), target_band=(0.3, 0.2))


def test_single_square_blob_expands_to_band(rng):
    base = random_image(rng, 100, 100)
    mask = blob_mask(100, 100, [(40, 40, 20, 20)])
    regions = extract_regions(base, mask)
    assert len(regions) == 1
    region = regions[0]
    assert region.region_mask.count == 400
    assert region.feasible
    assert 0.15 <= region.coverage <= 0.30
    # the 22.5% midpoint target puts the window area near 400 / 0.225 ~ 1778
    assert abs(region.rect.area - 400 / 0.225) < 200
    assert region.coverage == mask_coverage(region.region_mask)


def test_two_far_components_are_ordered_and_disjoint(rng):
    base = random_image(rng, 120, 120)
    mask = blob_mask(120, 120, [(10, 70, 18, 18), (60, 10, 18, 18)])
    regions = extract_regions(base, mask)
    assert len(regions) == 2
    # ordered by (top, left) of the component bbox: the y=10 blob first
    assert regions[0].index == 0 and regions[0].rect.y < regions[1].rect.y
    assert not regions[0].rect.overlaps(regions[1].rect)

    comps = components_bruteforce(mask.data)
    assert len(comps) == 2


def test_region_count_matches_bruteforce_components(rng):
    for trial in range(10):
        data = np.random.default_rng(trial).random((48, 48)) < 0.1
        mask = BitMask(data)
        base = random_image(rng, 48, 48)
        regions = extract_regions(base, mask)
        assert len(regions) == len(components_bruteforce(data))


def test_union_of_placed_region_masks_reconstructs_placement(rng):
    for trial in range(8):
        local = np.random.default_rng(100 + trial)
        data = local.random((64, 64)) < 0.08
        mask = BitMask(data)
        base = random_image(rng, 64, 64)
        regions = extract_regions(base, mask)
        union = np.zeros((64, 64), dtype=bool)
        for region in regions:
            placed = place_region_mask(region, 64, 64)
            union |= placed.data
        assert (union == data).all()


def test_feasible_implies_band(rng):
    base = random_image(rng, 256, 256)
    for side in (8, 12, 16, 24, 40, 64):
        mask = blob_mask(256, 256, [(30, 30, side, side)])
        regions = extract_regions(base, mask)
        assert len(regions) == 1
        region = regions[0]
        if region.feasible:
            assert 0.15 <= region.coverage <= 0.30


def test_oversized_blob_is_flagged_infeasible(rng):
    base = random_image(rng, 100, 100)
    mask = blob_mask(100, 100, [(10, 10, 70, 70)])  # 49% of the image
    regions = extract_regions(base, mask)
    assert len(regions) == 1
    region = regions[0]
    assert not region.feasible
    assert region.rect.area == 100 * 100  # largest clamped window
    assert region.coverage > 0.30


def test_tiny_component_kept_but_infeasible(rng):
    base = random_image(rng, 64, 64)
    mask = blob_mask(64, 64, [(30, 30, 3, 3)])  # 9 px < 16
    regions = extract_regions(base, mask)
    assert len(regions) == 1
    assert not regions[0].feasible
    assert regions[0].region_mask.count == 9


def test_near_components_shrink_to_disjoint_windows(rng):
    base = random_image(rng, 120, 120)
    # close enough that expanded windows would collide
    mask = blob_mask(120, 120, [(10, 50, 16, 16), (40, 50, 16, 16)])
    regions = extract_regions(base, mask)
    assert len(regions) == 2
    assert not regions[0].rect.overlaps(regions[1].rect)
    for region in regions:
        union = np.zeros((120, 120), dtype=bool)
        union[region.rect.y : region.rect.y1, region.rect.x : region.rect.x1] = True
        # component pixels stay inside their own window
        placed = place_region_mask(region, 120, 120)
        assert (placed.data <= union).all()


def test_determinism(rng):
    base = random_image(rng, 96, 96)
    data = np.random.default_rng(9).random((96, 96)) < 0.1
    mask = BitMask(data)
    first = extract_regions(base, mask)
    second = extract_regions(base, mask)
    assert region_summaries(first) == region_summaries(second)
    for a, b in zip(first, second):
        assert a.region_mask == b.region_mask
