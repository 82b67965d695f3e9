import itertools
import math
import random

import numpy as np
import pytest

from paintaug.combine import (
    AugmentedSample,
    CombinationKey,
    copy_paste_augment,
    count_combinations,
    enumerate_keys,
    random_key,
    realize,
    sample_keys,
)
from paintaug.engine import GenerationConfig, Variation, generate_for_regions
from paintaug.backends.mock import MockBackends
from paintaug.errors import ConfigError, GeometryError
from paintaug.imaging import BitMask, RasterImage, Rect, RunSeed
from paintaug.regions import RegionSpec, extract_regions

from conftest import blob_mask, random_image, random_mask


def keys_bruteforce(n, l):
    """Independent enumeration: subsets via itertools.combinations, choices via
    itertools.product."""
    out = set()
    for k in range(1, n + 1):
        for subset in itertools.combinations(range(n), k):
            bits = sum(1 << r for r in subset)
            for choices in itertools.product(range(l), repeat=k):
                out.add((bits, choices))
    return out


class TestCombinationKey:
    def test_rejects_empty_selection(self):
        with pytest.raises(ConfigError):
            CombinationKey(region_bits=0, choices=())

    def test_choice_count_must_match_popcount(self):
        with pytest.raises(ConfigError):
            CombinationKey(region_bits=0b101, choices=(1,))

    def test_string_roundtrip(self):
        key = CombinationKey(region_bits=0b101, choices=(2, 0))
        assert key.to_string() == "0b101:2,0"
        assert CombinationKey.from_string("0b101:2,0") == key
        assert key.selected_regions == (0, 2)
        assert key.choice_for(0) == 2 and key.choice_for(2) == 0

    def test_unparseable_string(self):
        with pytest.raises(ConfigError):
            CombinationKey.from_string("whatever")


class TestCounting:
    def test_single_region_single_variation(self):
        assert count_combinations(1, 1) == 1

    def test_spec_examples(self):
        assert count_combinations(3, 2) == 26
        assert count_combinations(2, 3) == 15

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    @pytest.mark.parametrize("l", [1, 2, 3])
    def test_matches_bruteforce_and_closed_form(self, n, l):
        brute = keys_bruteforce(n, l)
        assert count_combinations(n, l) == len(brute)
        assert count_combinations(n, l) == (l + 1) ** n - 1
        assert count_combinations(n, l) == sum(
            math.comb(n, k) * l**k for k in range(1, n + 1)
        )

    def test_large_counts_are_exact(self):
        # Python integers cannot overflow; the count stays exact at any size
        assert count_combinations(64, 9) == 10**64 - 1


class TestEnumeration:
    def test_n1_l2_order(self):
        keys = list(enumerate_keys(1, 2))
        assert [k.to_string() for k in keys] == ["0b1:0", "0b1:1"]

    def test_n2_l1_lists_three_selections(self):
        keys = list(enumerate_keys(2, 1))
        assert [(k.region_bits, k.choices) for k in keys] == [
            (0b01, (0,)),
            (0b10, (0,)),
            (0b11, (0, 0)),
        ]

    def test_odometer_order_low_region_fastest(self):
        keys = [k for k in enumerate_keys(2, 2) if k.region_bits == 0b11]
        assert [k.choices for k in keys] == [(0, 0), (1, 0), (0, 1), (1, 1)]

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    @pytest.mark.parametrize("l", [1, 2, 3])
    def test_complete_and_duplicate_free(self, n, l):
        keys = list(enumerate_keys(n, l))
        as_set = {(k.region_bits, k.choices) for k in keys}
        assert len(keys) == len(as_set) == count_combinations(n, l)
        assert as_set == keys_bruteforce(n, l)

    def test_bits_ascending(self):
        keys = list(enumerate_keys(3, 2))
        bits = [k.region_bits for k in keys]
        assert bits == sorted(bits)


class TestSampling:
    def test_saturation_returns_full_enumeration(self):
        keys = sample_keys(2, 1, 10, seed=0)
        assert [(k.region_bits, k.choices) for k in keys] == [
            (0b01, (0,)),
            (0b10, (0,)),
            (0b11, (0, 0)),
        ]

    def test_distinct_and_reproducible(self):
        first = sample_keys(4, 3, 100, seed=42)
        second = sample_keys(4, 3, 100, seed=42)
        assert first == second
        assert len({(k.region_bits, k.choices) for k in first}) == 100
        assert sample_keys(4, 3, 100, seed=43) != first

    def test_exclusions_respected(self):
        exclude = {(0, 1), (2, 0)}
        keys = sample_keys(3, 2, 18, seed=7, exclude=exclude)
        # space shrinks to (2)(3)(2) - 1 = 11 < 18: full filtered enumeration
        assert len(keys) == 11
        for key in keys:
            for region, choice in key.pairs():
                assert (region, choice) not in exclude

    def test_fully_excluded_region_never_selected(self):
        # region 1 loses both variations; keys must never include it
        exclude = {(1, 0), (1, 1)}
        keys = sample_keys(2, 2, 100, seed=3, exclude=exclude)
        assert len(keys) == 2  # only region 0's two variations remain
        assert all(key.selected_regions == (0,) for key in keys)

    def test_everything_excluded_gives_empty_space(self):
        exclude = {(n, c) for n in range(2) for c in range(2)}
        assert sample_keys(2, 2, 5, seed=0, exclude=exclude) == []

    def test_popcount_distribution_uniform(self):
        # with-replacement draws against the exact popcount proportions
        n, l, draws = 3, 2, 26_000
        rng = random.Random(1)
        counts = {k: 0 for k in range(1, n + 1)}
        for _ in range(draws):
            counts[random_key(rng, n, l).popcount] += 1
        total = (l + 1) ** n - 1
        for k in range(1, n + 1):
            p = math.comb(n, k) * l**k / total
            expected = draws * p
            sigma = math.sqrt(draws * p * (1 - p))
            assert abs(counts[k] - expected) <= 3 * sigma, (k, counts[k], expected)


@pytest.fixture
def realization(rng):
    base = random_image(rng, 128, 128)
    placement = blob_mask(128, 128, [(12, 16, 16, 16), (80, 80, 18, 16)])
    regions = extract_regions(base, placement)
    refs = [random_image(rng, 10, 10)]
    cfg = GenerationConfig(variations_per_region=2)
    variations = generate_for_regions(regions, base, refs, cfg, MockBackends(), RunSeed(3))
    return base, placement, regions, variations


class TestRealize:
    def test_full_selection_mask_popcount(self, realization):
        base, _, regions, variations = realization
        key = CombinationKey(region_bits=0b11, choices=(0, 1))
        sample = realize(base, regions, variations, key)
        expected = variations[0][0].refined_mask.count + variations[1][1].refined_mask.count
        assert sample.mask.count == expected
        assert sample.region_scores == (
            variations[0][0].similarity,
            variations[1][1].similarity,
        )

    def test_single_region_leaves_other_untouched(self, realization):
        base, _, regions, variations = realization
        key = CombinationKey(region_bits=0b10, choices=(0,))
        sample = realize(base, regions, variations, key)
        r0 = regions[0].rect
        assert (
            sample.image.data[r0.y : r0.y1, r0.x : r0.x1]
            == base.data[r0.y : r0.y1, r0.x : r0.x1]
        ).all()

    def test_differing_choice_localizes_diff(self, realization):
        base, _, regions, variations = realization
        a = realize(base, regions, variations, CombinationKey(0b11, (0, 0)))
        b = realize(base, regions, variations, CombinationKey(0b11, (1, 0)))
        diff = np.any(a.image.data != b.image.data, axis=2)
        r0 = regions[0].rect
        window = np.zeros((128, 128), dtype=bool)
        window[r0.y : r0.y1, r0.x : r0.x1] = True
        assert (diff <= window).all()  # all diffs inside region 0's rect

    def test_unmasked_pixels_preserved(self, realization):
        base, placement, regions, variations = realization
        for key in enumerate_keys(2, 2):
            sample = realize(base, regions, variations, key)
            outside = ~placement.data
            assert (sample.image.data[outside] == base.data[outside]).all()

    def test_distinct_keys_give_distinct_images(self, realization):
        base, _, regions, _ = realization
        # tag variations with distinct constant colors inside their masks
        tagged = {}
        for region in regions:
            rect = region.rect
            vs = []
            for l in range(2):
                color = 40 * (region.index + 1) + 10 * l
                img = np.full((rect.h, rect.w, 3), color, dtype=np.uint8)
                vs.append(
                    Variation(
                        region_index=region.index,
                        variation_index=l,
                        image=RasterImage(img),
                        refined_mask=region.region_mask,
                        similarity=1.0,
                        reference_index=0,
                        attempts_used=1,
                    )
                )
            tagged[region.index] = vs
        images = {}
        for key in enumerate_keys(2, 2):
            sample = realize(base, regions, tagged, key)
            images[key.to_string()] = sample.image.data.tobytes()
        assert len(set(images.values())) == len(images)

    def test_invalid_keys_rejected(self, realization):
        base, _, regions, variations = realization
        with pytest.raises(ConfigError):
            realize(base, regions, variations, CombinationKey(0b100, (0,)))
        with pytest.raises(ConfigError):
            realize(base, regions, variations, CombinationKey(0b1, (5,)))


class TestCopyPaste:
    def test_empty_instances_is_identity(self, rng):
        base = random_image(rng, 40, 40)
        base_mask = random_mask(rng, 40, 40, 0.1)
        sample = copy_paste_augment(base, base_mask, [], [Rect(0, 0, 10, 10)])
        assert sample.image == base
        assert sample.mask == base_mask
        assert sample.key is None

    def test_full_mask_same_size_paste_copies_exactly(self, rng):
        base = random_image(rng, 32, 32)
        instance = random_image(rng, 32, 32)
        sample = copy_paste_augment(
            base,
            BitMask.zeros(32, 32),
            [(instance, BitMask.ones(32, 32))],
            [Rect(0, 0, 32, 32)],
        )
        assert sample.image == instance
        assert sample.mask == BitMask.ones(32, 32)

    def test_half_mask_keeps_base_outside_instance_mask(self, rng):
        base = random_image(rng, 24, 24)
        instance = random_image(rng, 8, 8)
        inst_mask = np.zeros((8, 8), dtype=bool)
        inst_mask[:, :4] = True  # left half
        placement = Rect(10, 10, 8, 8)
        sample = copy_paste_augment(
            base, BitMask.zeros(24, 24), [(instance, BitMask(inst_mask))], [placement]
        )
        # oracle: per-pixel select
        for j in range(8):
            for i in range(8):
                got = sample.image.data[10 + j, 10 + i]
                expected = instance.data[j, i] if inst_mask[j, i] else base.data[10 + j, 10 + i]
                assert (got == expected).all()
        assert sample.mask.count == 32

    def test_seed_reproducible_instance_choice(self, rng):
        base = random_image(rng, 40, 40)
        instances = [
            (random_image(rng, 8, 8), BitMask.ones(8, 8)),
            (random_image(rng, 8, 8), BitMask.ones(8, 8)),
        ]
        placements = [Rect(0, 0, 8, 8), Rect(20, 20, 8, 8)]
        a = copy_paste_augment(base, BitMask.zeros(40, 40), instances, placements, seed=5)
        b = copy_paste_augment(base, BitMask.zeros(40, 40), instances, placements, seed=5)
        assert a.image == b.image

    def test_out_of_bounds_placement(self, rng):
        base = random_image(rng, 16, 16)
        with pytest.raises(GeometryError):
            copy_paste_augment(
                base,
                BitMask.zeros(16, 16),
                [(random_image(rng, 4, 4), BitMask.ones(4, 4))],
                [Rect(14, 14, 4, 4)],
            )
