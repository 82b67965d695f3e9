/**
 * Payload types for the pipeline service routes. Field names mirror the
 * server's JSON exactly; the UI never recomputes any of these values.
 */

export interface RectPayload {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface RegionSummary {
  index: number;
  rect: RectPayload;
  coverage: number;
  feasible: boolean;
}

export interface SessionInfo {
  id: string;
  base_image_id: string;
  width: number;
  height: number;
  image_png: string;
  config: Record<string, unknown>;
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface VariationResult {
  region_index: number;
  variation_index: number;
  similarity: number;
  reference_index: number;
  attempts_used: number;
  flags: string[];
  preview_png: string;
  refined_mask_png: string;
}

export interface JobSnapshot {
  id: string;
  session_id: string;
  state: JobState;
  progress: { done: number; total: number };
  error: string | null;
  results: VariationResult[];
  regions?: RegionSummary[];
  total_combinations?: number;
}

export interface SampleRecordPayload {
  id: string;
  image: string;
  mask: string;
  origin: "annotated" | "generated" | "copy_paste";
  combination_key: string | null;
  scores: number[];
  base_image_id?: string;
  job_id?: string;
}

export interface Tombstone {
  base_image_id: string;
  job_id: string;
  region_index: number;
  variation_index: number;
}

export interface ManifestPayload {
  schema_version: number;
  task: {
    class_name: string;
    support: { image: string; mask: string }[];
    base_pool: { id: string; image: string; mask: string | null }[];
  };
  samples: SampleRecordPayload[];
  provenance: { tombstones?: Tombstone[]; [key: string]: unknown };
}

export interface DecisionResult {
  accepted?: string;
  created?: boolean;
  rejected?: Tombstone;
  manifest_count: number;
}
