/**
 * Minimal PNG codec for the wire protocol's payloads: 8-bit grayscale and
 * RGB(A), no palette, no interlace. Compression runs through the Web
 * Compression Streams API, so the same code works in browsers and node.
 *
 * Masks travel as grayscale with 0 = clear and 255 = set; the server
 * normalizes any nonzero byte to set, and this codec writes strict {0, 255}.
 */

export interface DecodedImage {
  width: number;
  height: number;
  channels: number; // 1 gray, 2 gray+alpha, 3 rgb, 4 rgba
  data: Uint8Array; // interleaved, row-major
}

const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

async function pipe(data: Uint8Array, stream: CompressionStream | DecompressionStream): Promise<Uint8Array> {
  const piped = new Blob([data as BlobPart]).stream().pipeThrough(stream as ReadableWritablePair<Uint8Array, Uint8Array>);
  return new Uint8Array(await new Response(piped).arrayBuffer());
}

const deflate = (data: Uint8Array) => pipe(data, new CompressionStream("deflate"));
const inflate = (data: Uint8Array) => pipe(data, new DecompressionStream("deflate"));

function chunk(type: string, body: Uint8Array): Uint8Array {
  const out = new Uint8Array(8 + body.length + 4);
  const view = new DataView(out.buffer);
  view.setUint32(0, body.length);
  for (let i = 0; i < 4; i++) {
    out[4 + i] = type.charCodeAt(i);
  }
  out.set(body, 8);
  view.setUint32(8 + body.length, crc32(out.subarray(4, 8 + body.length)));
  return out;
}

function concat(parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let offset = 0;
  for (const p of parts) {
    out.set(p, offset);
    offset += p.length;
  }
  return out;
}

async function encode(width: number, height: number, channels: 1 | 3, pixels: Uint8Array): Promise<Uint8Array> {
  if (pixels.length !== width * height * channels) {
    throw new Error(`pixel buffer length ${pixels.length} != ${width}x${height}x${channels}`);
  }
  const ihdr = new Uint8Array(13);
  const view = new DataView(ihdr.buffer);
  view.setUint32(0, width);
  view.setUint32(4, height);
  ihdr[8] = 8; // bit depth
  ihdr[9] = channels === 1 ? 0 : 2; // color type: gray / rgb
  // compression, filter, interlace all 0

  const stride = width * channels;
  const raw = new Uint8Array((stride + 1) * height);
  for (let y = 0; y < height; y++) {
    raw[y * (stride + 1)] = 0; // filter: None
    raw.set(pixels.subarray(y * stride, (y + 1) * stride), y * (stride + 1) + 1);
  }
  const idat = await deflate(raw);
  return concat([
    new Uint8Array(SIGNATURE),
    chunk("IHDR", ihdr),
    chunk("IDAT", idat),
    chunk("IEND", new Uint8Array(0)),
  ]);
}

export function encodeGrayPng(width: number, height: number, gray: Uint8Array): Promise<Uint8Array> {
  return encode(width, height, 1, gray);
}

export function encodeRgbPng(width: number, height: number, rgb: Uint8Array): Promise<Uint8Array> {
  return encode(width, height, 3, rgb);
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

export async function decodePng(bytes: Uint8Array): Promise<DecodedImage> {
  for (let i = 0; i < 8; i++) {
    if (bytes[i] !== SIGNATURE[i]) throw new Error("not a PNG file");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  let offset = 8;
  let width = 0;
  let height = 0;
  let channels = 0;
  const idatParts: Uint8Array[] = [];
  while (offset < bytes.length) {
    const length = view.getUint32(offset);
    const type = String.fromCharCode(...bytes.subarray(offset + 4, offset + 8));
    const body = bytes.subarray(offset + 8, offset + 8 + length);
    if (type === "IHDR") {
      const ihdr = new DataView(bytes.buffer, bytes.byteOffset + offset + 8, length);
      width = ihdr.getUint32(0);
      height = ihdr.getUint32(4);
      const bitDepth = body[8];
      const colorType = body[9];
      if (bitDepth !== 8) throw new Error(`unsupported bit depth ${bitDepth}`);
      if (body[12] !== 0) throw new Error("interlaced PNG not supported");
      const byColorType: Record<number, number> = { 0: 1, 2: 3, 4: 2, 6: 4 };
      if (!(colorType in byColorType)) throw new Error(`unsupported color type ${colorType}`);
      channels = byColorType[colorType];
    } else if (type === "IDAT") {
      idatParts.push(body);
    } else if (type === "IEND") {
      break;
    }
    offset += 12 + length;
  }
  if (!width || !height || !channels) throw new Error("missing IHDR");

  const raw = await inflate(concat(idatParts));
  const stride = width * channels;
  if (raw.length < (stride + 1) * height) throw new Error("truncated PNG data");
  const out = new Uint8Array(stride * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const line = out.subarray(y * stride, (y + 1) * stride);
    const prev = y > 0 ? out.subarray((y - 1) * stride, y * stride) : null;
    for (let x = 0; x < stride; x++) {
      const a = x >= channels ? line[x - channels] : 0;
      const b = prev ? prev[x] : 0;
      const c = x >= channels && prev ? prev[x - channels] : 0;
      let value = row[x];
      switch (filter) {
        case 0:
          break;
        case 1:
          value = (value + a) & 0xff;
          break;
        case 2:
          value = (value + b) & 0xff;
          break;
        case 3:
          value = (value + ((a + b) >> 1)) & 0xff;
          break;
        case 4:
          value = (value + paeth(a, b, c)) & 0xff;
          break;
        default:
          throw new Error(`unknown filter ${filter} on row ${y}`);
      }
      line[x] = value;
    }
  }
  return { width, height, channels, data: out };
}

/** First channel of a decoded image, e.g. to read a grayscale mask. */
export function firstChannel(image: DecodedImage): Uint8Array {
  if (image.channels === 1) return image.data;
  const out = new Uint8Array(image.width * image.height);
  for (let i = 0; i < out.length; i++) {
    out[i] = image.data[i * image.channels];
  }
  return out;
}
