/** Shared types for the MPI bundle viewer. */

/** Pinhole camera; matrices are row-major flat arrays as in mpi.json. */
export interface Camera {
  intrinsics: number[]; // 9 entries, upper triangular
  rotation: number[]; // 9 entries, world -> camera
  translation: number[]; // 3 entries, meters
  width: number;
  height: number;
}

export interface BundleMeta {
  format: string;
  version: number;
  reference: Camera;
  disparities: number[]; // ascending, back (far) to front (near)
  num_planes: number;
  width: number;
  height: number;
  bit_depth: number;
}

/**
 * A decoded bundle: premultiplied-alpha float planes, back to front.
 * Each plane is RGBA interleaved, length width*height*4.
 */
export interface MpiScene {
  meta: BundleMeta;
  planes: Float32Array[];
}
