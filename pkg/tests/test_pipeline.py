from paintaug.backends.mock import MockBackends
from paintaug.dataset import load_manifest, manifest_path
from paintaug.engine import GenerationConfig
from paintaug.imaging import RunSeed
from paintaug.pipeline import load_run, run_generation, save_run


def test_run_save_load_roundtrip(demo_task, tmp_path):
    task_dir, manifest, placement = demo_task
    cfg = GenerationConfig(variations_per_region=2)
    run = run_generation(
        manifest, task_dir, "b0", placement, cfg, MockBackends(), RunSeed(11)
    )
    assert len(run.regions) == 2
    save_run(run, tmp_path / "run")
    loaded = load_run(tmp_path / "run")

    assert loaded.base_image_id == run.base_image_id
    assert loaded.base == run.base
    assert loaded.config == run.config
    assert loaded.run_seed == run.run_seed
    assert len(loaded.regions) == len(run.regions)
    for a, b in zip(loaded.regions, run.regions):
        assert (a.index, a.rect, a.coverage, a.feasible) == (b.index, b.rect, b.coverage, b.feasible)
        assert a.region_mask == b.region_mask
    for n in run.variations:
        for a, b in zip(loaded.variations[n], run.variations[n]):
            assert a.image == b.image
            assert a.refined_mask == b.refined_mask
            assert a.similarity == b.similarity
            assert a.flags == b.flags


def test_rerun_with_same_seed_is_identical(demo_task):
    task_dir, manifest, placement = demo_task
    cfg = GenerationConfig(variations_per_region=2)

    def run_once():
        return run_generation(
            manifest, task_dir, "b0", placement, cfg, MockBackends(), RunSeed(4)
        )

    a, b = run_once(), run_once()
    for n in a.variations:
        for va, vb in zip(a.variations[n], b.variations[n]):
            assert va.image == vb.image
            assert va.refined_mask == vb.refined_mask
            assert va.similarity == vb.similarity
