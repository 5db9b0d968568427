import { readFileSync } from "node:fs";
import { join } from "node:path";
import { PNG } from "pngjs";

import { loadBundle } from "../src/bundle";
import { MpiScene } from "../src/types";

export const FIXTURES = join(__dirname, "fixtures");

export function readPng(path: string): PNG {
  return PNG.sync.read(readFileSync(path));
}

/** Load a committed fixture bundle through the real loader, with file
 * reads standing in for fetches. */
export function loadFixtureBundle(name: string): Promise<MpiScene> {
  return loadBundle(
    join(FIXTURES, name),
    async (url) => readFileSync(url, "utf-8"),
    async (url) => {
      const png = readPng(url);
      return {
        width: png.width,
        height: png.height,
        pixels: new Uint8Array(png.data),
      };
    }
  );
}
