/** Minimal PNG reader for the engine's own renders: 8-bit RGB, filter 0
 * scanlines, one or more IDAT chunks. Used by tests to compare pixels;
 * the viewport itself just displays the bytes as a blob. Inflate is
 * injected so the module works both under node (zlib) and in a browser
 * (DecompressionStream), without bundling either. */

export interface DecodedImage {
  width: number;
  height: number;
  /** Row-major RGB, 3 bytes per pixel. */
  pixels: Uint8Array;
}

export type InflateFn = (data: Uint8Array) => Uint8Array;

const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

function readU32(b: Uint8Array, at: number): number {
  return ((b[at] << 24) | (b[at + 1] << 16) | (b[at + 2] << 8) | b[at + 3]) >>> 0;
}

export function decodePng(data: Uint8Array, inflate: InflateFn): DecodedImage {
  for (let i = 0; i < 8; i++) {
    if (data[i] !== SIGNATURE[i]) throw new Error("not a PNG");
  }
  let width = 0;
  let height = 0;
  const idat: Uint8Array[] = [];
  let at = 8;
  while (at + 8 <= data.length) {
    const length = readU32(data, at);
    const tag = String.fromCharCode(data[at + 4], data[at + 5], data[at + 6], data[at + 7]);
    const payload = data.subarray(at + 8, at + 8 + length);
    if (payload.length < length) throw new Error("truncated PNG chunk");
    if (tag === "IHDR") {
      width = readU32(payload, 0);
      height = readU32(payload, 4);
      const [depth, color] = [payload[8], payload[9]];
      if (depth !== 8 || color !== 2) {
        throw new Error(`unsupported PNG layout: depth ${depth}, color type ${color}`);
      }
      if (payload[12] !== 0) throw new Error("interlaced PNG not supported");
    } else if (tag === "IDAT") {
      idat.push(payload);
    } else if (tag === "IEND") {
      break;
    }
    at += 12 + length; // length + tag + payload + crc
  }
  if (width === 0 || height === 0) throw new Error("missing IHDR");

  const compressed = new Uint8Array(idat.reduce((n, c) => n + c.length, 0));
  let off = 0;
  for (const c of idat) {
    compressed.set(c, off);
    off += c.length;
  }
  const raw = inflate(compressed);

  const stride = width * 3;
  if (raw.length !== height * (stride + 1)) {
    throw new Error(`bad scanline data: ${raw.length} bytes for ${width}x${height}`);
  }
  const pixels = new Uint8Array(height * stride);
  for (let row = 0; row < height; row++) {
    const filter = raw[row * (stride + 1)];
    if (filter !== 0) throw new Error(`scanline filter ${filter} not supported`);
    pixels.set(raw.subarray(row * (stride + 1) + 1, (row + 1) * (stride + 1)), row * stride);
  }
  return { width, height, pixels };
}

/** Positions where two equal-size images differ, as flat pixel indices. */
export function changedPixels(a: DecodedImage, b: DecodedImage): number[] {
  if (a.width !== b.width || a.height !== b.height) {
    throw new Error("image size mismatch");
  }
  const out: number[] = [];
  const n = a.width * a.height;
  for (let i = 0; i < n; i++) {
    const at = i * 3;
    if (
      a.pixels[at] !== b.pixels[at] ||
      a.pixels[at + 1] !== b.pixels[at + 1] ||
      a.pixels[at + 2] !== b.pixels[at + 2]
    ) {
      out.push(i);
    }
  }
  return out;
}
