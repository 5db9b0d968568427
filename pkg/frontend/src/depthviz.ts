/** False-color depth mode: plane colors become a far-blue to near-red
 * ramp while alpha is left untouched. */

import { MpiScene } from "./types";

/** Ramp color for plane index i of n (matches the CLI's depth render). */
export function depthRampColor(i: number, n: number): [number, number, number] {
  const t = n > 1 ? i / (n - 1) : 0;
  return [t, 1 - Math.abs(2 * t - 1), 1 - t];
}

/** New scene whose plane colors are the ramp premultiplied by the original
 * alpha; the alpha channel is copied bit-for-bit. */
export function depthVizScene(scene: MpiScene): MpiScene {
  const planes = scene.planes.map((plane, d) => {
    const [r, g, b] = depthRampColor(d, scene.planes.length);
    const out = new Float32Array(plane.length);
    for (let i = 0; i < plane.length; i += 4) {
      const a = plane[i + 3];
      out[i] = r * a;
      out[i + 1] = g * a;
      out[i + 2] = b * a;
      out[i + 3] = a;
    }
    return out;
  });
  return { meta: scene.meta, planes };
}
