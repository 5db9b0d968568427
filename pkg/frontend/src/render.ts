/** CPU renderer for MPI scenes: per-plane homography warp into the target
 * view followed by back-to-front over-compositing of premultiplied RGBA. */

import { Mat3, mat3Inverse, mat3Mul, mat3Transpose, mat3Vec } from "./math";
import { Camera, MpiScene } from "./types";

/** Homography mapping reference pixels on the fronto-parallel plane at the
 * given disparity (1/depth, 0 = infinity) to target pixels. */
export function planeHomography(
  ref: Camera,
  target: Camera,
  disparity: number
): Mat3 {
  if (disparity < 0) throw new Error("disparity must be >= 0");
  // relative pose target <- reference
  const r = mat3Mul(target.rotation, mat3Transpose(ref.rotation));
  const rtr = mat3Vec(r, ref.translation);
  const t = [
    target.translation[0] - rtr[0],
    target.translation[1] - rtr[1],
    target.translation[2] - rtr[2],
  ];
  // r + outer(t, n) * disparity for the plane normal n = (0, 0, 1)
  const hCam = r.slice();
  hCam[2] += t[0] * disparity;
  hCam[5] += t[1] * disparity;
  hCam[8] += t[2] * disparity;
  return mat3Mul(target.intrinsics, mat3Mul(hCam, mat3Inverse(ref.intrinsics)));
}

/** Bilinear sample of an interleaved RGBA plane, zero outside. */
function sample(
  plane: Float32Array,
  w: number,
  h: number,
  x: number,
  y: number,
  out: number[]
): void {
  out[0] = out[1] = out[2] = out[3] = 0;
  const x0 = Math.floor(x);
  const y0 = Math.floor(y);
  const fx = x - x0;
  const fy = y - y0;
  for (let dy = 0; dy < 2; dy++) {
    const yi = y0 + dy;
    if (yi < 0 || yi >= h) continue;
    const wy = dy === 0 ? 1 - fy : fy;
    for (let dx = 0; dx < 2; dx++) {
      const xi = x0 + dx;
      if (xi < 0 || xi >= w) continue;
      const wgt = wy * (dx === 0 ? 1 - fx : fx);
      const base = (yi * w + xi) * 4;
      out[0] += wgt * plane[base];
      out[1] += wgt * plane[base + 1];
      out[2] += wgt * plane[base + 2];
      out[3] += wgt * plane[base + 3];
    }
  }
}

/**
 * Render the scene into the target camera. Returns interleaved RGB floats
 * in [0, 1], length target.width * target.height * 3.
 */
export function renderMpi(scene: MpiScene, target: Camera): Float32Array {
  const ref = scene.meta.reference;
  const srcW = scene.meta.width;
  const srcH = scene.meta.height;
  const w = target.width;
  const h = target.height;
  const out = new Float32Array(w * h * 3);
  const rgba = [0, 0, 0, 0];
  for (let d = 0; d < scene.planes.length; d++) {
    // back to front: disparities are stored ascending (far first)
    const hInv = mat3Inverse(
      planeHomography(ref, target, scene.meta.disparities[d])
    );
    const plane = scene.planes[d];
    for (let y = 0; y < h; y++) {
      for (let x = 0; x < w; x++) {
        const u = hInv[0] * x + hInv[1] * y + hInv[2];
        const v = hInv[3] * x + hInv[4] * y + hInv[5];
        const wProj = hInv[6] * x + hInv[7] * y + hInv[8];
        if (wProj <= 0) continue; // behind the plane, contributes nothing
        sample(plane, srcW, srcH, u / wProj, v / wProj, rgba);
        const base = (y * w + x) * 3;
        const keep = 1 - rgba[3];
        out[base] = rgba[0] + keep * out[base];
        out[base + 1] = rgba[1] + keep * out[base + 1];
        out[base + 2] = rgba[2] + keep * out[base + 2];
      }
    }
  }
  return out;
}

/** Convert a rendered float frame to 8-bit RGBA for canvas display. */
export function frameToRgba8(frame: Float32Array) {
  const n = frame.length / 3;
  const out = new Uint8ClampedArray(new ArrayBuffer(n * 4));
  for (let i = 0; i < n; i++) {
    out[i * 4] = Math.round(frame[i * 3] * 255);
    out[i * 4 + 1] = Math.round(frame[i * 3 + 1] * 255);
    out[i * 4 + 2] = Math.round(frame[i * 3 + 2] * 255);
    out[i * 4 + 3] = 255;
  }
  return out;
}
