/** Orbit / truck / dolly camera controls clamped to a small volume around
 * the reference pose, where the MPI reprojects without gaps. */

import { mat3Mul, mat3Transpose, mat3Vec } from "./math";
import { Camera } from "./types";

export interface ControlLimits {
  maxAngle: number; // radians, orbit yaw/pitch clamp
  maxRadius: number; // meters, translation clamp around the reference
  pivotDepth: number; // meters, orbit pivot on the reference optical axis
}

export const DEFAULT_LIMITS: ControlLimits = {
  maxAngle: 0.25,
  maxRadius: 0.1,
  pivotDepth: 2.0,
};

function rotX(a: number): number[] {
  const c = Math.cos(a);
  const s = Math.sin(a);
  return [1, 0, 0, 0, c, -s, 0, s, c];
}

function rotY(a: number): number[] {
  const c = Math.cos(a);
  const s = Math.sin(a);
  return [c, 0, s, 0, 1, 0, -s, 0, c];
}

const clampAbs = (v: number, limit: number) =>
  Math.max(-limit, Math.min(limit, v));

export class ViewerControls {
  yaw = 0;
  pitch = 0;
  offset = [0, 0, 0]; // truck/dolly, reference-camera frame

  constructor(
    readonly reference: Camera,
    readonly limits: ControlLimits = DEFAULT_LIMITS
  ) {}

  orbit(dYaw: number, dPitch: number): void {
    this.yaw = clampAbs(this.yaw + dYaw, this.limits.maxAngle);
    this.pitch = clampAbs(this.pitch + dPitch, this.limits.maxAngle);
  }

  truck(dx: number, dy: number): void {
    this.offset[0] += dx;
    this.offset[1] += dy;
    this.clampOffset();
  }

  dolly(dz: number): void {
    this.offset[2] += dz;
    this.clampOffset();
  }

  reset(): void {
    this.yaw = 0;
    this.pitch = 0;
    this.offset = [0, 0, 0];
  }

  private clampOffset(): void {
    const n = Math.hypot(this.offset[0], this.offset[1], this.offset[2]);
    if (n > this.limits.maxRadius) {
      const s = this.limits.maxRadius / n;
      this.offset = this.offset.map((v) => v * s);
    }
  }

  /** Current virtual camera (same intrinsics as the reference). */
  camera(): Camera {
    const ref = this.reference;
    const a = mat3Mul(rotX(this.pitch), rotY(this.yaw));
    // orbit about the pivot on the reference optical axis, then apply the
    // truck/dolly offset; all in the reference camera frame
    const pd = this.limits.pivotDepth;
    const back = mat3Vec(mat3Transpose(a), [0, 0, pd]);
    const cCam = [
      0 - back[0] + this.offset[0],
      0 - back[1] + this.offset[1],
      pd - back[2] + this.offset[2],
    ];
    const rotation = mat3Mul(a, ref.rotation);
    const refCenter = mat3Vec(mat3Transpose(ref.rotation), ref.translation).map(
      (v) => -v
    );
    const centerDelta = mat3Vec(mat3Transpose(ref.rotation), cCam);
    const center = [
      refCenter[0] + centerDelta[0],
      refCenter[1] + centerDelta[1],
      refCenter[2] + centerDelta[2],
    ];
    const translation = mat3Vec(rotation, center).map((v) => -v);
    return {
      intrinsics: ref.intrinsics.slice(),
      rotation,
      translation,
      width: ref.width,
      height: ref.height,
    };
  }
}
