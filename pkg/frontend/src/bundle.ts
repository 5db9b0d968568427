/** Bundle loading: parse and validate mpi.json, decode plane PNGs, and
 * premultiply into float planes. Decoding is injected so tests can supply
 * a node-side PNG decoder while the browser uses createImageBitmap. */

import { BundleMeta, MpiScene } from "./types";

export function planeFilename(index: number): string {
  return `plane_${String(index).padStart(3, "0")}.png`;
}

export function parseBundleMeta(text: string): BundleMeta {
  let meta: BundleMeta;
  try {
    meta = JSON.parse(text);
  } catch {
    throw new Error("malformed mpi.json");
  }
  if (meta.format !== "mpi-bundle") {
    throw new Error(`not an mpi bundle (format ${JSON.stringify(meta.format)})`);
  }
  if (meta.version !== 1) {
    throw new Error(`unsupported bundle version ${meta.version}`);
  }
  if (
    !Array.isArray(meta.disparities) ||
    meta.disparities.length !== meta.num_planes
  ) {
    throw new Error("plane count does not match disparities");
  }
  return meta;
}

/** Straight-alpha 8-bit RGBA pixels -> premultiplied float plane. */
export function premultiplyPlane(pixels: Uint8Array | Uint8ClampedArray): Float32Array {
  const out = new Float32Array(pixels.length);
  for (let i = 0; i < pixels.length; i += 4) {
    const a = pixels[i + 3] / 255;
    out[i] = (pixels[i] / 255) * a;
    out[i + 1] = (pixels[i + 1] / 255) * a;
    out[i + 2] = (pixels[i + 2] / 255) * a;
    out[i + 3] = a;
  }
  return out;
}

export interface PlaneDecoder {
  (url: string): Promise<{ width: number; height: number; pixels: Uint8Array }>;
}

/** Fetch and decode a bundle from a base URL (directory containing
 * mpi.json). The decoder turns a plane URL into straight-alpha pixels. */
export async function loadBundle(
  baseUrl: string,
  fetchText: (url: string) => Promise<string>,
  decodePlane: PlaneDecoder
): Promise<MpiScene> {
  const root = baseUrl.replace(/\/$/, "");
  const meta = parseBundleMeta(await fetchText(`${root}/mpi.json`));
  const planes: Float32Array[] = [];
  for (let d = 0; d < meta.num_planes; d++) {
    const img = await decodePlane(`${root}/${planeFilename(d)}`);
    if (img.width !== meta.width || img.height !== meta.height) {
      throw new Error(`plane ${d} dimensions do not match mpi.json`);
    }
    planes.push(premultiplyPlane(img.pixels));
  }
  return { meta, planes };
}
