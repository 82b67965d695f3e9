/**
 * Presentation model for the server-computed region summaries. The numbers
 * (coverage, feasibility) come straight from the payload; the UI only decides
 * how to show them.
 */
import type { RegionSummary } from "./types.js";

export type FeasibilityLevel = "ok" | "warn";

export interface OverlayBox {
  index: number;
  x: number;
  y: number;
  w: number;
  h: number;
  label: string;
  level: FeasibilityLevel;
}

export function feasibilityLevel(region: RegionSummary): FeasibilityLevel {
  return region.feasible ? "ok" : "warn";
}

export function coverageBadge(region: RegionSummary): string {
  return `${(region.coverage * 100).toFixed(1)}%`;
}

export function canGenerate(regions: RegionSummary[]): boolean {
  return regions.length > 0;
}

/** Screen-space boxes for the overlay canvas at the given zoom scale. */
export function overlayBoxes(regions: RegionSummary[], scale: number): OverlayBox[] {
  return regions.map((region) => ({
    index: region.index,
    x: region.rect.x * scale,
    y: region.rect.y * scale,
    w: region.rect.w * scale,
    h: region.rect.h * scale,
    label: `r${region.index} ${coverageBadge(region)}`,
    level: feasibilityLevel(region),
  }));
}
