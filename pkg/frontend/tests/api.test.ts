import { describe, expect, it } from "vitest";

import { ApiError, StudioApi } from "../src/api.js";
import { MaskBuffer } from "../src/maskBuffer.js";
import { FakeServer } from "./fakeServer.js";

describe("StudioApi", () => {
  it("creates sessions and carries the base image payload", async () => {
    const server = new FakeServer();
    const api = new StudioApi("", server.fetch);
    const session = await api.createSession("b0");
    expect(session.id).toBe("session_1");
    expect(session.width).toBe(64);
    expect(session.image_png.length).toBeGreaterThan(0);
  });

  it("submits masks as base64 PNG and returns region summaries", async () => {
    const server = new FakeServer();
    const api = new StudioApi("", server.fetch);
    const session = await api.createSession("b0");
    const mask = new MaskBuffer(64, 64);
    mask.brush(16, 16, 6);
    const regions = await api.submitMask(session.id, mask);
    expect(regions.length).toBe(1);
    expect(regions[0].rect.w).toBeGreaterThan(0);
  });

  it("surfaces server error details", async () => {
    const server = new FakeServer();
    const api = new StudioApi("", server.fetch);
    const session = await api.createSession("b0");
    const wrong = new MaskBuffer(32, 32);
    wrong.brush(5, 5, 2);
    await expect(api.submitMask(session.id, wrong)).rejects.toThrow(
      /mask dimensions do not match/,
    );
    await expect(api.getJob("missing")).rejects.toBeInstanceOf(ApiError);
  });

  it("generate on an empty session conflicts", async () => {
    const server = new FakeServer();
    const api = new StudioApi("", server.fetch);
    const session = await api.createSession("b0");
    await expect(api.startGeneration(session.id)).rejects.toThrow(/no regions/);
  });
});
