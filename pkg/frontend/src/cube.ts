// Just enough cube-text parsing to preview a reduced volume locally. The
// server's reduced payload is canonical output, but token handling stays
// whitespace-tolerant so hand-made fixtures work too.

import type { RasterImage } from "./ppm.js";

export interface CubeVolume {
  comments: [string, string];
  natoms: number;
  nval: number;
  dims: [number, number, number];
  origin: [number, number, number];
  axes: number[][]; // 3 x 3, row per axis
  values: Float64Array; // axis-3 fastest, then components
}

function parseNumber(token: string): number {
  let v = Number(token);
  if (Number.isNaN(v) && /[dD]/.test(token)) {
    v = Number(token.replace(/[dD]/, "E"));
  }
  if (Number.isNaN(v)) {
    throw new Error(`bad numeric token ${JSON.stringify(token)}`);
  }
  return v;
}

export function parseCubeText(text: string): CubeVolume {
  const lines = text.split(/\r?\n/);
  if (lines.length < 7) {
    throw new Error("cube text is too short for a header");
  }
  const row = (n: number): string[] => lines[n].trim().split(/\s+/).filter((t) => t.length > 0);

  const head = row(2);
  if (head.length < 4) {
    throw new Error("header line needs NATOMS and the origin");
  }
  const natoms = Math.trunc(parseNumber(head[0]));
  const origin: [number, number, number] = [
    parseNumber(head[1]),
    parseNumber(head[2]),
    parseNumber(head[3]),
  ];
  let nval = head.length >= 5 ? Math.trunc(parseNumber(head[4])) : 1;

  const dims: number[] = [];
  const axes: number[][] = [];
  for (let a = 0; a < 3; a++) {
    const t = row(3 + a);
    if (t.length < 4) {
      throw new Error(`axis line ${a + 1} needs a count and a vector`);
    }
    dims.push(Math.abs(Math.trunc(parseNumber(t[0]))));
    axes.push([parseNumber(t[1]), parseNumber(t[2]), parseNumber(t[3])]);
  }

  let line = 6 + Math.abs(natoms);
  const tail: string[] = [];
  for (let n = line; n < lines.length; n++) {
    const t = row(n);
    for (const tok of t) tail.push(tok);
  }
  let cursor = 0;
  if (natoms < 0) {
    const m = Math.trunc(parseNumber(tail[0]));
    cursor = 1 + m;
    nval = head.length >= 5 ? nval : m;
  }

  const count = dims[0] * dims[1] * dims[2] * nval;
  if (tail.length - cursor !== count) {
    throw new Error(`expected ${count} values, found ${tail.length - cursor}`);
  }
  const values = new Float64Array(count);
  for (let i = 0; i < count; i++) {
    values[i] = parseNumber(tail[cursor + i]);
  }
  return {
    comments: [lines[0] ?? "", lines[1] ?? ""],
    natoms,
    nval,
    dims: [dims[0], dims[1], dims[2]],
    origin,
    axes,
    values,
  };
}

export function valueAt(volume: CubeVolume, i: number, j: number, k: number, c = 0): number {
  const [, n2, n3] = volume.dims;
  return volume.values[((i * n2 + j) * n3 + k) * volume.nval + c];
}

// Grayscale mid-stack slice: rows run along axis 1, columns along axis 2, at
// the middle index of axis 3. This is the client-local preview; the server
// render is the high-fidelity view.
export function slicePreview(volume: CubeVolume, opts: { k?: number; component?: number } = {}): RasterImage {
  const [n1, n2, n3] = volume.dims;
  const k = opts.k ?? Math.floor(n3 / 2);
  const c = opts.component ?? 0;
  if (k < 0 || k >= n3 || c < 0 || c >= volume.nval) {
    throw new Error(`slice k=${k} component=${c} is outside ${volume.dims} x ${volume.nval}`);
  }
  let lo = Infinity;
  let hi = -Infinity;
  for (let i = 0; i < n1; i++) {
    for (let j = 0; j < n2; j++) {
      const v = valueAt(volume, i, j, k, c);
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  const span = hi - lo;
  const pixels = new Uint8Array(n1 * n2 * 3);
  for (let i = 0; i < n1; i++) {
    for (let j = 0; j < n2; j++) {
      const v = valueAt(volume, i, j, k, c);
      const g = span > 0 ? Math.round(((v - lo) / span) * 255) : 128;
      const at = (i * n2 + j) * 3;
      pixels[at] = g;
      pixels[at + 1] = g;
      pixels[at + 2] = g;
    }
  }
  return { width: n2, height: n1, pixels };
}
