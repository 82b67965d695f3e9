"""HTTP service backing the studio UI.

Sessions hold a base image and its hand-drawn placement mask; generation runs
as asynchronous jobs on a bounded worker pool; accepted combinations are
realized at full resolution and appended to the task manifest, which is the
only state that survives a restart. Rejections are recorded as tombstones in
the manifest provenance so they are equally durable.

Routes:
    POST /sessions                   {"base_image_id", "config"?}
    PUT  /sessions/{id}/mask         {"mask_png"}
    POST /sessions/{id}/generate
    GET  /jobs/{id}
    POST /jobs/{id}/decisions        {"accept", "key"?, "region_index"?, "variation_index"?}
    GET  /tasks/{id}/manifest
"""
from __future__ import annotations

import hashlib
import itertools
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import dataset
from .backends.protocol import Backends, image_to_b64, mask_from_b64, mask_to_b64
from .combine import CombinationKey, count_combinations, realize
from .dataset import DatasetManifest, load_manifest
from .engine import GenerationConfig, preview_composite
from .errors import ConfigError, GeometryError, PipelineError
from .imaging import BitMask, RasterImage, RunSeed, read_image_png
from .pipeline import GenerationRun, run_generation
from .regions import RegionSpec, extract_regions, region_summaries

JOB_QUEUED = "queued"
JOB_RUNNING = "running"
JOB_DONE = "done"
JOB_FAILED = "failed"


class CreateSessionBody(BaseModel):
    base_image_id: str
    config: Optional[dict] = None


class MaskBody(BaseModel):
    mask_png: str


class DecisionBody(BaseModel):
    accept: bool
    key: Optional[str] = None
    region_index: Optional[int] = None
    variation_index: Optional[int] = None


@dataclass
class Session:
    id: str
    base_image_id: str
    base: RasterImage
    config: GenerationConfig
    placement_mask: BitMask | None = None
    regions: list[RegionSpec] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass
class Job:
    id: str
    session_id: str
    state: str = JOB_QUEUED
    done_units: int = 0
    total_units: int = 0
    error: str | None = None
    results: list[dict] = field(default_factory=list)
    run: GenerationRun | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def snapshot(self) -> dict:
        with self.lock:
            payload = {
                "id": self.id,
                "session_id": self.session_id,
                "state": self.state,
                "progress": {"done": self.done_units, "total": self.total_units},
                "error": self.error,
                "results": list(self.results),
            }
            if self.run is not None:
                payload["regions"] = region_summaries(self.run.regions)
                n = len(self.run.regions)
                l = self.run.config.variations_per_region
                payload["total_combinations"] = count_combinations(n, l) if n >= 1 else 0
        return payload


class PipelineService:
    """All mutable service state, guarded for concurrent request handlers."""

    def __init__(
        self,
        task_dir: Path | str,
        backends: Backends,
        *,
        config: GenerationConfig | None = None,
        run_seed: int = 0,
        job_workers: int = 2,
        preview_max_edge: int = 512,
    ):
        self.task_dir = Path(task_dir)
        self.backends = backends
        self.default_config = config or GenerationConfig()
        self.run_seed = RunSeed(run_seed)
        self.preview_max_edge = preview_max_edge
        self.manifest: DatasetManifest = load_manifest(dataset.manifest_path(self.task_dir))
        self.sessions: dict[str, Session] = {}
        self.jobs: dict[str, Job] = {}
        self.executor = ThreadPoolExecutor(max_workers=job_workers)
        self.state_lock = threading.Lock()
        # sequential ids keep identical runs byte-identical on disk
        self._session_ids = itertools.count(1)
        self._job_ids = itertools.count(1)

    # -- sessions ----------------------------------------------------------

    def create_session(self, body: CreateSessionBody) -> dict:
        entry = self.manifest.task.base_entry(body.base_image_id)
        base = read_image_png(self.task_dir / entry.image)
        cfg = self.default_config
        if body.config:
            cfg = GenerationConfig(**{**cfg.to_dict(), **body.config})
        session = Session(
            id=f"session_{next(self._session_ids)}",
            base_image_id=body.base_image_id,
            base=base,
            config=cfg,
        )
        with self.state_lock:
            self.sessions[session.id] = session
        return {
            "id": session.id,
            "base_image_id": session.base_image_id,
            "width": base.width,
            "height": base.height,
            "image_png": image_to_b64(base),
            "config": cfg.to_dict(),
        }

    def session(self, session_id: str) -> Session:
        with self.state_lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    def submit_mask(self, session_id: str, body: MaskBody) -> dict:
        session = self.session(session_id)
        mask = mask_from_b64(body.mask_png)
        with session.lock:
            if (mask.width, mask.height) != (session.base.width, session.base.height):
                raise HTTPException(
                    status_code=400,
                    detail=f"mask {mask.width}x{mask.height} does not match base "
                    f"{session.base.width}x{session.base.height}",
                )
            session.placement_mask = mask
            session.regions = extract_regions(session.base, mask)
            return {"regions": region_summaries(session.regions)}

    # -- jobs ---------------------------------------------------------------

    def start_generation(self, session_id: str) -> dict:
        session = self.session(session_id)
        with session.lock:
            if session.placement_mask is None or not session.regions:
                raise HTTPException(
                    status_code=409, detail="session has no regions; submit a mask first"
                )
            regions = list(session.regions)
            placement = session.placement_mask
        job = Job(
            id=f"job_{next(self._job_ids)}",
            session_id=session_id,
            total_units=len(regions) * session.config.variations_per_region,
        )
        with self.state_lock:
            self.jobs[job.id] = job
            manifest = self.manifest
        self.executor.submit(self._run_job, job, session, placement, manifest)
        return job.snapshot()

    def job(self, job_id: str) -> Job:
        with self.state_lock:
            job = self.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return job

    def _run_job(
        self, job: Job, session: Session, placement: BitMask, manifest: DatasetManifest
    ) -> None:
        with job.lock:
            job.state = JOB_RUNNING

        def on_unit_done(_region_index: int, _variation_index: int) -> None:
            with job.lock:
                job.done_units += 1

        try:
            run = run_generation(
                manifest,
                self.task_dir,
                session.base_image_id,
                placement,
                session.config,
                self.backends,
                self.run_seed,
                progress=on_unit_done,
            )
            results = self._build_results(run)
            with job.lock:
                job.run = run
                job.results = results
                job.state = JOB_DONE
        except PipelineError as e:
            with job.lock:
                job.error = str(e)
                job.state = JOB_FAILED
        except Exception as e:  # keep the job observable even on unexpected bugs
            with job.lock:
                job.error = f"internal error: {e}"
                job.state = JOB_FAILED

    def _build_results(self, run: GenerationRun) -> list[dict]:
        results = []
        for region in run.regions:
            for v in run.variations[region.index]:
                preview = preview_composite(run.base, region, v, self.preview_max_edge)
                results.append(
                    {
                        "region_index": v.region_index,
                        "variation_index": v.variation_index,
                        "similarity": v.similarity,
                        "reference_index": v.reference_index,
                        "attempts_used": v.attempts_used,
                        "flags": sorted(v.flags),
                        "preview_png": image_to_b64(preview),
                        "refined_mask_png": mask_to_b64(v.refined_mask),
                    }
                )
        return results

    # -- decisions -----------------------------------------------------------

    def decide(self, job_id: str, body: DecisionBody) -> dict:
        job = self.job(job_id)
        with job.lock:
            if job.state != JOB_DONE:
                raise HTTPException(status_code=409, detail=f"job {job_id} is {job.state}")
            run = job.run
        if body.accept:
            if not body.key:
                raise HTTPException(status_code=400, detail="accept decisions require a key")
            try:
                key = CombinationKey.from_string(body.key)
            except ConfigError as e:
                raise HTTPException(status_code=400, detail=str(e))
            return self._accept(job, run, key)
        if body.region_index is None or body.variation_index is None:
            raise HTTPException(
                status_code=400,
                detail="reject decisions require region_index and variation_index",
            )
        return self._reject(job, run, body.region_index, body.variation_index)

    def _accept(self, job: Job, run: GenerationRun, key: CombinationKey) -> dict:
        key_string = key.to_string()
        sample_id = self._sample_id(run, key)
        with self.state_lock:
            existing = next(
                (r for r in self.manifest.samples if r.id == sample_id), None
            )
            if existing is not None:
                return {"accepted": sample_id, "created": False,
                        "manifest_count": len(self.manifest.samples)}
            try:
                sample = realize(run.base, run.regions, run.variations, key)
            except (ConfigError, GeometryError) as e:
                raise HTTPException(status_code=400, detail=str(e))
            self.manifest = dataset.append_generated(
                self.manifest,
                self.task_dir,
                sample_id,
                sample.image,
                sample.mask,
                key_string,
                sample.region_scores,
                extra={"base_image_id": run.base_image_id, "job_id": job.id},
            )
            return {"accepted": sample_id, "created": True,
                    "manifest_count": len(self.manifest.samples)}

    def _sample_id(self, run: GenerationRun, key: CombinationKey) -> str:
        # Region layout goes into the id so the same key string accepted for a
        # different placement mask creates a distinct sample, while re-accepts
        # of the same (mask, key), even across restarts, stay idempotent.
        digest = hashlib.sha256()
        for region in run.regions:
            rect = region.rect
            digest.update(f"{rect.x},{rect.y},{rect.w},{rect.h};".encode())
            digest.update(region.region_mask.data.tobytes())
        bits = format(key.region_bits, "b")
        choices = "-".join(str(c) for c in key.choices)
        return f"gen_{run.base_image_id}_{digest.hexdigest()[:8]}_{bits}_{choices}"

    def _reject(self, job: Job, run: GenerationRun, region_index: int, variation_index: int) -> dict:
        valid = run is not None and any(
            v.region_index == region_index and v.variation_index == variation_index
            for vs in run.variations.values()
            for v in vs
        )
        if not valid:
            raise HTTPException(
                status_code=400,
                detail=f"no variation ({region_index}, {variation_index}) in this job",
            )
        tombstone = {
            "base_image_id": run.base_image_id,
            "job_id": job.id,
            "region_index": region_index,
            "variation_index": variation_index,
        }
        with self.state_lock:
            provenance = dict(self.manifest.provenance)
            tombstones = list(provenance.get("tombstones", []))
            if tombstone not in tombstones:
                tombstones.append(tombstone)
            provenance["tombstones"] = tombstones
            self.manifest = replace(self.manifest, provenance=provenance)
            dataset.save_manifest(self.manifest, dataset.manifest_path(self.task_dir))
        return {"rejected": tombstone, "manifest_count": len(self.manifest.samples)}

    def tombstoned_pairs(self, base_image_id: str) -> set[tuple[int, int]]:
        return {
            (t["region_index"], t["variation_index"])
            for t in self.manifest.provenance.get("tombstones", [])
            if t.get("base_image_id") == base_image_id
        }

    def manifest_payload(self, task_id: str) -> dict:
        with self.state_lock:
            manifest = self.manifest
        known = {manifest.task.class_name, self.task_dir.name}
        if task_id not in known:
            raise HTTPException(status_code=404, detail=f"unknown task {task_id!r}")
        return dataset.manifest_to_dict(manifest)


def create_app(
    task_dir: Path | str,
    backends: Backends,
    *,
    config: GenerationConfig | None = None,
    run_seed: int = 0,
    job_workers: int = 2,
) -> FastAPI:
    service = PipelineService(
        task_dir, backends, config=config, run_seed=run_seed, job_workers=job_workers
    )
    app = FastAPI(title="paintaug pipeline service")
    app.state.service = service

    @app.exception_handler(PipelineError)
    async def _pipeline_error(_request, exc: PipelineError):
        return JSONResponse(status_code=400, content={"code": "pipeline_error", "message": str(exc)})

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        return service.create_session(body)

    @app.put("/sessions/{session_id}/mask")
    def put_mask(session_id: str, body: MaskBody):
        return service.submit_mask(session_id, body)

    @app.post("/sessions/{session_id}/generate")
    def generate(session_id: str):
        return service.start_generation(session_id)

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        return service.job(job_id).snapshot()

    @app.post("/jobs/{job_id}/decisions")
    def decide(job_id: str, body: DecisionBody):
        return service.decide(job_id, body)

    @app.get("/tasks/{task_id}/manifest")
    def get_manifest(task_id: str):
        return service.manifest_payload(task_id)

    return app
