/**
 * Studio single-page app: draw a placement mask over a base image, submit it
 * for region extraction, launch generation, review similarity-sorted
 * candidates, and accept/reject combinations into the dataset.
 */
import { StudioApi } from "./api.js";
import { base64ToBytes } from "./base64.js";
import { MaskBuffer } from "./maskBuffer.js";
import { pollJob } from "./poll.js";
import { canGenerate, overlayBoxes } from "./regionOverlay.js";
import {
  PAGE_SIZE,
  ReviewItem,
  buildReviewItems,
  filterByFlag,
  keyForSelection,
  markDecision,
  pageCount,
  paginate,
  restoreDecisions,
} from "./review.js";
import type { JobSnapshot, RegionSummary, SessionInfo } from "./types.js";

const TASK_ID = new URLSearchParams(location.search).get("task") ?? "task";
const BASE_IMAGE_ID = new URLSearchParams(location.search).get("base") ?? "b0";

const api = new StudioApi("");

interface StudioState {
  session: SessionInfo | null;
  mask: MaskBuffer | null;
  regions: RegionSummary[];
  job: JobSnapshot | null;
  items: ReviewItem[];
  selection: Map<number, number>; // region -> chosen variation
  page: number;
  flagFilter: string | null;
  zoom: number;
  brushRadius: number;
  erasing: boolean;
}

const state: StudioState = {
  session: null,
  mask: null,
  regions: [],
  job: null,
  items: [],
  selection: new Map(),
  page: 0,
  flagFilter: null,
  zoom: 1,
  brushRadius: 8,
  erasing: false,
};

const el = <T extends HTMLElement>(id: string): T => document.getElementById(id) as T;

const imageCanvas = () => el<HTMLCanvasElement>("image-canvas");
const overlayCanvas = () => el<HTMLCanvasElement>("overlay-canvas");

let baseBitmap: ImageBitmap | null = null;

async function boot(): Promise<void> {
  state.session = await api.createSession(BASE_IMAGE_ID);
  state.mask = new MaskBuffer(state.session.width, state.session.height);
  const blob = new Blob([base64ToBytes(state.session.image_png) as BlobPart], { type: "image/png" });
  baseBitmap = await createImageBitmap(blob);
  sizeCanvases();
  drawScene();
  await refreshManifestCount();
  bindControls();
  setStatus(`session ${state.session.id} on ${BASE_IMAGE_ID}; draw a placement mask`);
}

function sizeCanvases(): void {
  if (!state.session) return;
  const width = Math.round(state.session.width * state.zoom);
  const height = Math.round(state.session.height * state.zoom);
  for (const canvas of [imageCanvas(), overlayCanvas()]) {
    canvas.width = width;
    canvas.height = height;
  }
}

function drawScene(): void {
  if (!state.session || !baseBitmap || !state.mask) return;
  const ctx = imageCanvas().getContext("2d")!;
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, imageCanvas().width, imageCanvas().height);
  ctx.drawImage(baseBitmap, 0, 0, imageCanvas().width, imageCanvas().height);

  // mask layer: translucent red over set pixels, rendered at native res
  const native = new OffscreenCanvas(state.session.width, state.session.height);
  const nctx = native.getContext("2d")!;
  const overlay = nctx.createImageData(state.session.width, state.session.height);
  for (let i = 0; i < state.mask.data.length; i++) {
    if (state.mask.data[i]) {
      overlay.data[i * 4] = 255;
      overlay.data[i * 4 + 3] = 90;
    }
  }
  nctx.putImageData(overlay, 0, 0);
  ctx.drawImage(native, 0, 0, imageCanvas().width, imageCanvas().height);

  drawRegionOverlays();
}

function drawRegionOverlays(): void {
  const ctx = overlayCanvas().getContext("2d")!;
  ctx.clearRect(0, 0, overlayCanvas().width, overlayCanvas().height);
  ctx.font = "12px sans-serif";
  for (const box of overlayBoxes(state.regions, state.zoom)) {
    ctx.strokeStyle = box.level === "ok" ? "#2e9e44" : "#d99a1b";
    ctx.lineWidth = 2;
    ctx.strokeRect(box.x, box.y, box.w, box.h);
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillRect(box.x, box.y - 16, ctx.measureText(box.label).width + 8, 16);
    ctx.fillStyle = "#fff";
    ctx.fillText(box.label, box.x + 4, box.y - 4);
  }
}

function canvasToImage(event: MouseEvent): { x: number; y: number } {
  const rect = overlayCanvas().getBoundingClientRect();
  return {
    x: (event.clientX - rect.left) / state.zoom,
    y: (event.clientY - rect.top) / state.zoom,
  };
}

function bindControls(): void {
  let drawing = false;
  let last: { x: number; y: number } | null = null;
  const surface = overlayCanvas();

  surface.addEventListener("mousedown", (event) => {
    drawing = true;
    last = canvasToImage(event);
    state.mask?.brush(last.x, last.y, state.brushRadius, state.erasing);
    drawScene();
  });
  surface.addEventListener("mousemove", (event) => {
    if (!drawing || !state.mask || !last) return;
    const now = canvasToImage(event);
    state.mask.stroke(last.x, last.y, now.x, now.y, state.brushRadius, state.erasing);
    last = now;
    drawScene();
  });
  window.addEventListener("mouseup", () => {
    drawing = false;
    last = null;
  });
  surface.addEventListener("wheel", (event) => {
    event.preventDefault();
    state.zoom = Math.min(8, Math.max(0.25, state.zoom * (event.deltaY < 0 ? 1.25 : 0.8)));
    sizeCanvases();
    drawScene();
  });

  el<HTMLInputElement>("brush-size").addEventListener("input", (event) => {
    state.brushRadius = Number((event.target as HTMLInputElement).value);
  });
  el<HTMLInputElement>("erase-toggle").addEventListener("change", (event) => {
    state.erasing = (event.target as HTMLInputElement).checked;
  });
  el<HTMLButtonElement>("clear-mask").addEventListener("click", () => {
    state.mask?.clear();
    state.regions = [];
    updateGenerateButton();
    drawScene();
  });
  el<HTMLButtonElement>("submit-mask").addEventListener("click", () => void submitMask());
  el<HTMLButtonElement>("generate").addEventListener("click", () => void generate());
  el<HTMLButtonElement>("accept-selection").addEventListener("click", () => void acceptSelection());
  el<HTMLSelectElement>("flag-filter").addEventListener("change", (event) => {
    const value = (event.target as HTMLSelectElement).value;
    state.flagFilter = value === "all" ? null : value;
    state.page = 0;
    renderReview();
  });
  el<HTMLButtonElement>("prev-page").addEventListener("click", () => {
    state.page = Math.max(0, state.page - 1);
    renderReview();
  });
  el<HTMLButtonElement>("next-page").addEventListener("click", () => {
    const filtered = filterByFlag(state.items, state.flagFilter);
    state.page = Math.min(pageCount(filtered.length) - 1, state.page + 1);
    renderReview();
  });
}

async function submitMask(): Promise<void> {
  if (!state.session || !state.mask) return;
  try {
    state.regions = await api.submitMask(state.session.id, state.mask);
    updateGenerateButton();
    drawScene();
    const infeasible = state.regions.filter((r) => !r.feasible).length;
    setStatus(
      `${state.regions.length} region(s)` +
        (infeasible ? `, ${infeasible} outside the 15-30% coverage band` : ""),
    );
  } catch (error) {
    setStatus(String(error), true);
  }
}

function updateGenerateButton(): void {
  el<HTMLButtonElement>("generate").disabled = !canGenerate(state.regions);
}

async function generate(): Promise<void> {
  if (!state.session) return;
  try {
    const job = await api.startGeneration(state.session.id);
    setStatus(`job ${job.id} queued`);
    const poller = pollJob(
      (id) => api.getJob(id),
      job.id,
      (snapshot) => {
        state.job = snapshot;
        setStatus(`job ${snapshot.id}: ${snapshot.state} ${snapshot.progress.done}/${snapshot.progress.total}`);
      },
    );
    const done = await poller.promise;
    state.job = done;
    state.items = buildReviewItems(done.results);
    await restoreFromManifest();
    state.page = 0;
    renderReview();
    setStatus(
      `job ${done.id} done: ${done.results.length} variations, ` +
        `${done.total_combinations ?? "?"} realizable combinations`,
    );
  } catch (error) {
    setStatus(String(error), true);
  }
}

async function restoreFromManifest(): Promise<void> {
  if (!state.session) return;
  const manifest = await api.getManifest(TASK_ID);
  state.items = restoreDecisions(state.items, manifest, state.session.base_image_id);
  el<HTMLSpanElement>("manifest-count").textContent = String(manifest.samples.length);
}

async function refreshManifestCount(): Promise<void> {
  const manifest = await api.getManifest(TASK_ID);
  el<HTMLSpanElement>("manifest-count").textContent = String(manifest.samples.length);
}

function renderReview(): void {
  const grid = el<HTMLDivElement>("review-grid");
  grid.innerHTML = "";
  const filtered = filterByFlag(state.items, state.flagFilter);
  el<HTMLSpanElement>("page-label").textContent = `${state.page + 1}/${pageCount(filtered.length)}`;
  for (const item of paginate(filtered, state.page, PAGE_SIZE)) {
    grid.appendChild(reviewCard(item));
  }
  renderSelection();
}

function reviewCard(item: ReviewItem): HTMLElement {
  const card = document.createElement("div");
  card.className = `card ${item.decision}`;
  const img = document.createElement("img");
  img.src = `data:image/png;base64,${item.previewPng}`;
  img.alt = `region ${item.regionIndex} variation ${item.variationIndex}`;
  card.appendChild(img);

  const caption = document.createElement("div");
  caption.className = "caption";
  caption.textContent =
    `r${item.regionIndex}/v${item.variationIndex} sim ${item.similarity.toFixed(3)} ` +
    `(ref ${item.referenceIndex}, ${item.attemptsUsed} attempt(s))`;
  card.appendChild(caption);

  for (const flag of item.flags) {
    const ribbon = document.createElement("div");
    ribbon.className = "ribbon";
    ribbon.textContent = flag;
    card.appendChild(ribbon);
  }

  const actions = document.createElement("div");
  actions.className = "actions";
  const select = document.createElement("button");
  const selected = state.selection.get(item.regionIndex) === item.variationIndex;
  select.textContent = selected ? "selected" : "select";
  select.disabled = item.decision === "rejected";
  select.addEventListener("click", () => {
    if (selected) {
      state.selection.delete(item.regionIndex);
    } else {
      state.selection.set(item.regionIndex, item.variationIndex);
    }
    renderReview();
  });
  actions.appendChild(select);

  const reject = document.createElement("button");
  reject.textContent = item.decision === "rejected" ? "rejected" : "reject";
  reject.disabled = item.decision !== "undecided";
  reject.addEventListener("click", () => void rejectItem(item));
  actions.appendChild(reject);

  card.appendChild(actions);
  return card;
}

async function rejectItem(item: ReviewItem): Promise<void> {
  if (!state.job) return;
  try {
    await api.rejectVariation(state.job.id, item.regionIndex, item.variationIndex);
    state.items = markDecision(state.items, item.regionIndex, item.variationIndex, "rejected");
    if (state.selection.get(item.regionIndex) === item.variationIndex) {
      state.selection.delete(item.regionIndex);
    }
    renderReview();
  } catch (error) {
    setStatus(String(error), true);
  }
}

function renderSelection(): void {
  const label = el<HTMLSpanElement>("selection-label");
  const pairs = [...state.selection.entries()].sort((a, b) => a[0] - b[0]);
  label.textContent = pairs.length
    ? pairs.map(([r, v]) => `r${r}:v${v}`).join(" ")
    : "none";
  el<HTMLButtonElement>("accept-selection").disabled = pairs.length === 0;
}

async function acceptSelection(): Promise<void> {
  if (!state.job || state.selection.size === 0) return;
  try {
    const key = keyForSelection([...state.selection.entries()]);
    const result = await api.acceptCombination(state.job.id, key);
    for (const [region, choice] of state.selection.entries()) {
      state.items = markDecision(state.items, region, choice, "accepted");
    }
    state.selection.clear();
    await restoreFromManifest();
    renderReview();
    setStatus(
      result.created
        ? `accepted ${key} as ${result.accepted}`
        : `${key} was already accepted (${result.accepted})`,
    );
  } catch (error) {
    setStatus(String(error), true);
  }
}

function setStatus(message: string, isError = false): void {
  const status = el<HTMLDivElement>("status");
  status.textContent = message;
  status.className = isError ? "error" : "";
}

boot().catch((error) => setStatus(String(error), true));
