/**
 * The placement-mask layer the brush paints into. Always lives at native
 * image resolution; zooming the canvas never resamples mask pixels, so the
 * exported PNG is pixel-exact against the server contract.
 */

export class MaskBuffer {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array; // one byte per pixel, 0 or 1

  constructor(width: number, height: number, data?: Uint8Array) {
    if (width < 1 || height < 1) {
      throw new Error(`mask must be at least 1x1, got ${width}x${height}`);
    }
    if (data && data.length !== width * height) {
      throw new Error(`data length ${data.length} != ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    this.data = data ?? new Uint8Array(width * height);
  }

  static fromGray(width: number, height: number, gray: Uint8Array): MaskBuffer {
    const data = new Uint8Array(width * height);
    for (let i = 0; i < data.length; i++) {
      data[i] = gray[i] ? 1 : 0;
    }
    return new MaskBuffer(width, height, data);
  }

  /** Stamp a filled circle at native-resolution coordinates. */
  brush(cx: number, cy: number, radius: number, erase = false): void {
    const value = erase ? 0 : 1;
    const r2 = radius * radius;
    const x0 = Math.max(0, Math.floor(cx - radius));
    const x1 = Math.min(this.width - 1, Math.ceil(cx + radius));
    const y0 = Math.max(0, Math.floor(cy - radius));
    const y1 = Math.min(this.height - 1, Math.ceil(cy + radius));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy <= r2) {
          this.data[y * this.width + x] = value;
        }
      }
    }
  }

  /** Stamp along a drag segment so fast strokes leave no gaps. */
  stroke(x0: number, y0: number, x1: number, y1: number, radius: number, erase = false): void {
    const steps = Math.max(1, Math.ceil(Math.hypot(x1 - x0, y1 - y0)));
    for (let i = 0; i <= steps; i++) {
      const t = i / steps;
      this.brush(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, radius, erase);
    }
  }

  countSet(): number {
    let n = 0;
    for (let i = 0; i < this.data.length; i++) {
      n += this.data[i];
    }
    return n;
  }

  isEmpty(): boolean {
    return this.countSet() === 0;
  }

  clear(): void {
    this.data.fill(0);
  }

  /** Grayscale bytes for PNG export: 0 stays 0, set pixels become 255. */
  toGray(): Uint8Array {
    const out = new Uint8Array(this.data.length);
    for (let i = 0; i < out.length; i++) {
      out[i] = this.data[i] ? 255 : 0;
    }
    return out;
  }

  equals(other: MaskBuffer): boolean {
    if (other.width !== this.width || other.height !== this.height) return false;
    for (let i = 0; i < this.data.length; i++) {
      if (this.data[i] !== other.data[i]) return false;
    }
    return true;
  }

  clone(): MaskBuffer {
    return new MaskBuffer(this.width, this.height, this.data.slice());
  }
}
