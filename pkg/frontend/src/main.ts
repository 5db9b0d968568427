/** Browser entry point: load the bundle named by ?bundle=<url>, render it
 * to a canvas with the CPU compositor, and wire up the camera controls. */

import { loadBundle } from "./bundle";
import { ViewerControls } from "./controls";
import { depthVizScene } from "./depthviz";
import { frameToRgba8, renderMpi } from "./render";
import { MpiScene } from "./types";

async function decodePlane(url: string) {
  const response = await fetch(url);
  if (!response.ok) throw new Error(`failed to fetch ${url}`);
  const bitmap = await createImageBitmap(await response.blob());
  const canvas = document.createElement("canvas");
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d", { willReadFrequently: true })!;
  ctx.drawImage(bitmap, 0, 0);
  const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height).data;
  return {
    width: bitmap.width,
    height: bitmap.height,
    pixels: new Uint8Array(data.buffer),
  };
}

function draw(
  canvas: HTMLCanvasElement,
  scene: MpiScene,
  controls: ViewerControls
) {
  const camera = controls.camera();
  const frame = renderMpi(scene, camera);
  const image = new ImageData(
    frameToRgba8(frame),
    camera.width,
    camera.height
  );
  canvas.getContext("2d")!.putImageData(image, 0, 0);
}

async function start() {
  const status = document.getElementById("status")!;
  const url = new URLSearchParams(window.location.search).get("bundle");
  if (!url) {
    status.textContent = "add ?bundle=<url> pointing at an exported mpi bundle";
    return;
  }
  status.textContent = "loading...";
  let scene: MpiScene;
  try {
    scene = await loadBundle(
      url,
      async (u) => {
        const r = await fetch(u);
        if (!r.ok) throw new Error(`failed to fetch ${u}`);
        return r.text();
      },
      decodePlane
    );
  } catch (err) {
    status.textContent = `load failed: ${err}`;
    return;
  }
  status.textContent = "drag: orbit | shift-drag: truck | wheel: dolly | d: depth";

  const canvas = document.getElementById("view") as HTMLCanvasElement;
  canvas.width = scene.meta.reference.width;
  canvas.height = scene.meta.reference.height;
  const controls = new ViewerControls(scene.meta.reference);
  const depthScene = depthVizScene(scene);
  let depthMode = false;

  const redraw = () => draw(canvas, depthMode ? depthScene : scene, controls);

  let dragging = false;
  canvas.addEventListener("pointerdown", () => (dragging = true));
  window.addEventListener("pointerup", () => (dragging = false));
  window.addEventListener("pointermove", (e) => {
    if (!dragging) return;
    if (e.shiftKey) {
      controls.truck(-e.movementX * 0.001, -e.movementY * 0.001);
    } else {
      controls.orbit(e.movementX * 0.005, e.movementY * 0.005);
    }
    redraw();
  });
  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    controls.dolly(e.deltaY * 0.0005);
    redraw();
  });
  window.addEventListener("keydown", (e) => {
    if (e.key === "d") {
      depthMode = !depthMode;
      redraw();
    } else if (e.key === "r") {
      controls.reset();
      redraw();
    }
  });
  redraw();
}

start();
