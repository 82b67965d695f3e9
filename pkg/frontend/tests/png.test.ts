import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { decodePng, encodeGrayPng, encodeRgbPng, firstChannel } from "../src/png.js";

const fixture = (name: string) =>
  new Uint8Array(readFileSync(join(__dirname, "fixtures", name)));

describe("png codec", () => {
  it("round-trips grayscale pixels exactly", async () => {
    const gray = new Uint8Array(16 * 9);
    for (let i = 0; i < gray.length; i++) gray[i] = (i * 37) % 256;
    const png = await encodeGrayPng(16, 9, gray);
    const decoded = await decodePng(png);
    expect(decoded.width).toBe(16);
    expect(decoded.height).toBe(9);
    expect(decoded.channels).toBe(1);
    expect(Array.from(decoded.data)).toEqual(Array.from(gray));
  });

  it("round-trips rgb pixels exactly", async () => {
    const rgb = new Uint8Array(8 * 6 * 3);
    for (let i = 0; i < rgb.length; i++) rgb[i] = (i * 11 + 3) % 256;
    const decoded = await decodePng(await encodeRgbPng(8, 6, rgb));
    expect(decoded.channels).toBe(3);
    expect(Array.from(decoded.data)).toEqual(Array.from(rgb));
  });

  it("decodes a server-written rgb png (filtered rows)", async () => {
    const decoded = await decodePng(fixture("gradient.png"));
    expect(decoded.width).toBe(32);
    expect(decoded.height).toBe(24);
    expect(decoded.channels).toBe(3);
    for (let y = 0; y < 24; y++) {
      for (let x = 0; x < 32; x++) {
        const i = (y * 32 + x) * 3;
        expect(decoded.data[i]).toBe((x * 7) % 256);
        expect(decoded.data[i + 1]).toBe((y * 5) % 256);
        expect(decoded.data[i + 2]).toBe((x + y) % 256);
      }
    }
  });

  it("decodes a server-written mask png", async () => {
    const decoded = await decodePng(fixture("mask.png"));
    expect(decoded.width).toBe(20);
    expect(decoded.channels).toBe(1);
    const gray = firstChannel(decoded);
    for (let y = 0; y < 20; y++) {
      for (let x = 0; x < 20; x++) {
        const expected = x >= 4 && x < 12 && y >= 6 && y < 16 ? 255 : 0;
        expect(gray[y * 20 + x]).toBe(expected);
      }
    }
  });

  it("rejects garbage", async () => {
    await expect(decodePng(new Uint8Array([1, 2, 3, 4]))).rejects.toThrow("not a PNG");
  });

  it("rejects length mismatches on encode", async () => {
    await expect(encodeGrayPng(4, 4, new Uint8Array(3))).rejects.toThrow("buffer length");
  });
});
