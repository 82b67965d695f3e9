/**
 * Typed client for the pipeline service. All studio state changes go through
 * these routes; nothing is recomputed client-side.
 */
import { base64ToBytes, bytesToBase64 } from "./base64.js";
import { MaskBuffer } from "./maskBuffer.js";
import { decodePng, encodeGrayPng, firstChannel } from "./png.js";
import type {
  DecisionResult,
  JobSnapshot,
  ManifestPayload,
  RegionSummary,
  SessionInfo,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

export class StudioApi {
  constructor(
    private readonly baseUrl = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    if (!response.ok) {
      let detail = text;
      try {
        const parsed = JSON.parse(text);
        detail = parsed.detail ?? parsed.message ?? text;
      } catch {
        // plain-text error body
      }
      throw new ApiError(`${method} ${path}: ${detail}`, response.status);
    }
    return JSON.parse(text) as T;
  }

  createSession(baseImageId: string, config?: Record<string, unknown>): Promise<SessionInfo> {
    return this.request("POST", "/sessions", { base_image_id: baseImageId, config });
  }

  async submitMask(sessionId: string, mask: MaskBuffer): Promise<RegionSummary[]> {
    const png = await encodeGrayPng(mask.width, mask.height, mask.toGray());
    const body = { mask_png: bytesToBase64(png) };
    const result = await this.request<{ regions: RegionSummary[] }>(
      "PUT",
      `/sessions/${sessionId}/mask`,
      body,
    );
    return result.regions;
  }

  startGeneration(sessionId: string): Promise<JobSnapshot> {
    return this.request("POST", `/sessions/${sessionId}/generate`);
  }

  getJob(jobId: string): Promise<JobSnapshot> {
    return this.request("GET", `/jobs/${jobId}`);
  }

  acceptCombination(jobId: string, key: string): Promise<DecisionResult> {
    return this.request("POST", `/jobs/${jobId}/decisions`, { accept: true, key });
  }

  rejectVariation(jobId: string, regionIndex: number, variationIndex: number): Promise<DecisionResult> {
    return this.request("POST", `/jobs/${jobId}/decisions`, {
      accept: false,
      region_index: regionIndex,
      variation_index: variationIndex,
    });
  }

  getManifest(taskId: string): Promise<ManifestPayload> {
    return this.request("GET", `/tasks/${taskId}/manifest`);
  }
}

/** Decode a base64 PNG payload from the server into a mask buffer. */
export async function maskFromPayload(payload: string): Promise<MaskBuffer> {
  const decoded = await decodePng(base64ToBytes(payload));
  return MaskBuffer.fromGray(decoded.width, decoded.height, firstChannel(decoded));
}
