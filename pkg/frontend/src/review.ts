/**
 * Review-grid model: similarity-sorted variation candidates, pagination,
 * flag filters, and the accept/reject decision state. Decision transitions
 * are user-initiated only; reloads restore them from the manifest.
 */
import type { ManifestPayload, VariationResult } from "./types.js";

export type Decision = "undecided" | "accepted" | "rejected";

export interface ReviewItem {
  regionIndex: number;
  variationIndex: number;
  similarity: number;
  referenceIndex: number;
  attemptsUsed: number;
  flags: string[];
  previewPng: string;
  decision: Decision;
}

export const PAGE_SIZE = 24;

export function buildReviewItems(results: VariationResult[]): ReviewItem[] {
  const items = results.map((r) => ({
    regionIndex: r.region_index,
    variationIndex: r.variation_index,
    similarity: r.similarity,
    referenceIndex: r.reference_index,
    attemptsUsed: r.attempts_used,
    flags: [...r.flags],
    previewPng: r.preview_png,
    decision: "undecided" as Decision,
  }));
  // similarity descending; stable tiebreak on (region, variation)
  items.sort(
    (a, b) =>
      b.similarity - a.similarity ||
      a.regionIndex - b.regionIndex ||
      a.variationIndex - b.variationIndex,
  );
  return items;
}

export function pageCount(total: number, pageSize = PAGE_SIZE): number {
  return Math.max(1, Math.ceil(total / pageSize));
}

export function paginate<T>(items: T[], page: number, pageSize = PAGE_SIZE): T[] {
  const start = page * pageSize;
  return items.slice(start, start + pageSize);
}

export function filterByFlag(items: ReviewItem[], flag: string | null): ReviewItem[] {
  if (!flag) return items;
  return items.filter((item) => item.flags.includes(flag));
}

export function markDecision(
  items: ReviewItem[],
  regionIndex: number,
  variationIndex: number,
  decision: Decision,
): ReviewItem[] {
  return items.map((item) =>
    item.regionIndex === regionIndex && item.variationIndex === variationIndex
      ? { ...item, decision }
      : item,
  );
}

/** (region, choice) pairs -> the manifest's combination-key syntax. */
export function keyForSelection(pairs: [number, number][]): string {
  if (pairs.length === 0) throw new Error("a combination needs at least one region");
  const sorted = [...pairs].sort((a, b) => a[0] - b[0]);
  let bits = 0;
  for (const [region] of sorted) {
    if (bits & (1 << region)) throw new Error(`region ${region} selected twice`);
    bits |= 1 << region;
  }
  const choices = sorted.map(([, choice]) => choice).join(",");
  return `0b${bits.toString(2)}:${choices}`;
}

export function parseKey(key: string): [number, number][] {
  const match = /^0b([01]+):([0-9,]+)$/.exec(key);
  if (!match) throw new Error(`unparseable combination key ${key}`);
  const bits = parseInt(match[1], 2);
  const choices = match[2].split(",").map(Number);
  const pairs: [number, number][] = [];
  let next = 0;
  for (let region = 0; bits >> region; region++) {
    if ((bits >> region) & 1) {
      pairs.push([region, choices[next]]);
      next += 1;
    }
  }
  if (next !== choices.length) throw new Error(`choice count mismatch in ${key}`);
  return pairs;
}

/**
 * Rebuild decision state after a page reload: rejected variations come from
 * the manifest's tombstones, accepted ones from the accepted combination keys
 * recorded for this base image.
 */
export function restoreDecisions(
  items: ReviewItem[],
  manifest: ManifestPayload,
  baseImageId: string,
): ReviewItem[] {
  const rejected = new Set<string>();
  for (const stone of manifest.provenance.tombstones ?? []) {
    if (stone.base_image_id === baseImageId) {
      rejected.add(`${stone.region_index}:${stone.variation_index}`);
    }
  }
  const accepted = new Set<string>();
  for (const sample of manifest.samples) {
    if (sample.origin === "generated" && sample.combination_key && sample.base_image_id === baseImageId) {
      for (const [region, choice] of parseKey(sample.combination_key)) {
        accepted.add(`${region}:${choice}`);
      }
    }
  }
  return items.map((item) => {
    const id = `${item.regionIndex}:${item.variationIndex}`;
    if (rejected.has(id)) return { ...item, decision: "rejected" as Decision };
    if (accepted.has(id)) return { ...item, decision: "accepted" as Decision };
    return item;
  });
}
