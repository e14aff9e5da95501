// Binary PPM (P6) decoding, enough to put a server-rendered image on a canvas.

export interface RasterImage {
  width: number;
  height: number;
  pixels: Uint8Array; // row-major RGB
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d || byte === 0x0c;
}

// Reads the next whitespace-delimited token, skipping `#` comments.
function nextToken(bytes: Uint8Array, pos: number): { token: string; pos: number } {
  let i = pos;
  for (;;) {
    while (i < bytes.length && isSpace(bytes[i])) i++;
    if (i < bytes.length && bytes[i] === 0x23) {
      while (i < bytes.length && bytes[i] !== 0x0a) i++;
      continue;
    }
    break;
  }
  const start = i;
  while (i < bytes.length && !isSpace(bytes[i])) i++;
  if (start === i) {
    throw new Error("truncated PPM header");
  }
  return { token: new TextDecoder().decode(bytes.subarray(start, i)), pos: i };
}

export function decodePpm(bytes: Uint8Array): RasterImage {
  const magic = nextToken(bytes, 0);
  if (magic.token !== "P6") {
    throw new Error(`not a binary PPM: magic ${magic.token}`);
  }
  const w = nextToken(bytes, magic.pos);
  const h = nextToken(bytes, w.pos);
  const maxval = nextToken(bytes, h.pos);
  const width = Number.parseInt(w.token, 10);
  const height = Number.parseInt(h.token, 10);
  if (!Number.isInteger(width) || !Number.isInteger(height) || width <= 0 || height <= 0) {
    throw new Error(`bad PPM dimensions ${w.token} x ${h.token}`);
  }
  if (maxval.token !== "255") {
    throw new Error(`unsupported PPM maxval ${maxval.token}`);
  }
  const dataStart = maxval.pos + 1; // exactly one whitespace byte after maxval
  const expected = width * height * 3;
  const pixels = bytes.subarray(dataStart, dataStart + expected);
  if (pixels.length !== expected) {
    throw new Error(`PPM payload is ${pixels.length} bytes, expected ${expected}`);
  }
  return { width, height, pixels: new Uint8Array(pixels) };
}

// RGB to RGBA, the layout canvas ImageData wants.
export function toRgba(image: RasterImage): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(image.width * image.height * 4);
  for (let i = 0, j = 0; i < image.pixels.length; i += 3, j += 4) {
    out[j] = image.pixels[i];
    out[j + 1] = image.pixels[i + 1];
    out[j + 2] = image.pixels[i + 2];
    out[j + 3] = 255;
  }
  return out;
}
