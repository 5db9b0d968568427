import { describe, expect, it } from "vitest";

import { depthRampColor, depthVizScene } from "../src/depthviz";
import { loadFixtureBundle } from "./helpers";

describe("depthRampColor", () => {
  it("runs blue (far) to red (near)", () => {
    expect(depthRampColor(0, 5)).toEqual([0, 0, 1]);
    expect(depthRampColor(4, 5)).toEqual([1, 0, 0]);
    expect(depthRampColor(2, 5)).toEqual([0.5, 1, 0.5]);
  });

  it("handles a single plane", () => {
    expect(depthRampColor(0, 1)).toEqual([0, 0, 1]);
  });
});

describe("depthVizScene", () => {
  it("preserves the alpha channel bit-for-bit", async () => {
    const scene = await loadFixtureBundle("bundle_a");
    const viz = depthVizScene(scene);
    for (let d = 0; d < scene.planes.length; d++) {
      for (let i = 3; i < scene.planes[d].length; i += 4) {
        expect(viz.planes[d][i]).toBe(scene.planes[d][i]);
      }
    }
  });

  it("colors each plane with its premultiplied ramp color", async () => {
    const scene = await loadFixtureBundle("bundle_a");
    const viz = depthVizScene(scene);
    const n = scene.planes.length;
    for (let d = 0; d < n; d++) {
      const [r, g, b] = depthRampColor(d, n);
      const plane = viz.planes[d];
      for (let i = 0; i < plane.length; i += 4) {
        const a = plane[i + 3];
        expect(plane[i]).toBeCloseTo(r * a, 6);
        expect(plane[i + 1]).toBeCloseTo(g * a, 6);
        expect(plane[i + 2]).toBeCloseTo(b * a, 6);
      }
    }
  });

  it("does not mutate the source scene", async () => {
    const scene = await loadFixtureBundle("bundle_a");
    const before = scene.planes[0].slice();
    depthVizScene(scene);
    expect(scene.planes[0]).toEqual(before);
  });
});
