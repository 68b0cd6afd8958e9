/** Free-look pose overrides from orbit controls. The scene convention is
 * +z forward and +y toward the ground, so "down" for the look-at basis is
 * world +y and pitch > 0 tilts the view toward the ground. */

import type { CameraOverride, InstanceRow } from "./api";

export type Vec3 = [number, number, number];

const WORLD_DOWN: Vec3 = [0, 1, 0];
const PITCH_LIMIT = 1.45; // keep clear of the degenerate straight-down basis

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function normalize(v: Vec3): Vec3 {
  const n = Math.hypot(v[0], v[1], v[2]);
  if (n === 0) throw new Error("zero-length vector");
  return [v[0] / n, v[1] / n, v[2] / n];
}

/** Convert a camera-to-world basis (columns x, y, z) to a unit quaternion
 * in (w, x, y, z) order. Standard largest-pivot extraction. */
export function basisToQuaternion(x: Vec3, y: Vec3, z: Vec3): [number, number, number, number] {
  const m00 = x[0], m01 = y[0], m02 = z[0];
  const m10 = x[1], m11 = y[1], m12 = z[1];
  const m20 = x[2], m21 = y[2], m22 = z[2];
  const trace = m00 + m11 + m22;
  let w: number, qx: number, qy: number, qz: number;
  if (trace > 0) {
    const s = Math.sqrt(trace + 1) * 2;
    w = s / 4;
    qx = (m21 - m12) / s;
    qy = (m02 - m20) / s;
    qz = (m10 - m01) / s;
  } else if (m00 > m11 && m00 > m22) {
    const s = Math.sqrt(1 + m00 - m11 - m22) * 2;
    w = (m21 - m12) / s;
    qx = s / 4;
    qy = (m01 + m10) / s;
    qz = (m02 + m20) / s;
  } else if (m11 > m22) {
    const s = Math.sqrt(1 + m11 - m00 - m22) * 2;
    w = (m02 - m20) / s;
    qx = (m01 + m10) / s;
    qy = s / 4;
    qz = (m12 + m21) / s;
  } else {
    const s = Math.sqrt(1 + m22 - m00 - m11) * 2;
    w = (m10 - m01) / s;
    qx = (m02 + m20) / s;
    qy = (m12 + m21) / s;
    qz = s / 4;
  }
  const n = Math.hypot(w, qx, qy, qz);
  return [w / n, qx / n, qy / n, qz / n];
}

export interface Intrinsics {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
}

/** Default pinhole intrinsics for a free-look viewport of the scene's
 * native size: moderate field of view, principal point at the center. */
export function defaultIntrinsics(width: number, height: number): Intrinsics {
  return {
    fx: 0.8 * width,
    fy: 0.8 * width,
    cx: (width - 1) / 2,
    cy: (height - 1) / 2,
  };
}

export class OrbitCamera {
  yaw = 0;
  pitch = 0;

  constructor(
    public center: Vec3,
    public distance: number,
    public intrinsics: Intrinsics,
  ) {}

  /** Center the orbit on the union of the catalog's bounding boxes. */
  static aroundInstances(rows: InstanceRow[], intrinsics: Intrinsics): OrbitCamera {
    if (rows.length === 0) return new OrbitCamera([0, 0, 10], 10, intrinsics);
    const lo: Vec3 = [Infinity, Infinity, Infinity];
    const hi: Vec3 = [-Infinity, -Infinity, -Infinity];
    for (const r of rows) {
      for (let i = 0; i < 3; i++) {
        lo[i] = Math.min(lo[i], r.bbox_min[i]);
        hi[i] = Math.max(hi[i], r.bbox_max[i]);
      }
    }
    const center: Vec3 = [(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2];
    const diag = Math.hypot(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]);
    return new OrbitCamera(center, Math.max(2 * diag, 4), intrinsics);
  }

  rotate(dYaw: number, dPitch: number): void {
    this.yaw += dYaw;
    this.pitch = Math.min(PITCH_LIMIT, Math.max(-PITCH_LIMIT, this.pitch + dPitch));
  }

  zoom(factor: number): void {
    this.distance = Math.max(0.5, this.distance * factor);
  }

  /** View direction for the current yaw/pitch; yaw 0 / pitch 0 looks +z. */
  forward(): Vec3 {
    const cp = Math.cos(this.pitch);
    return [Math.sin(this.yaw) * cp, Math.sin(this.pitch), Math.cos(this.yaw) * cp];
  }

  pose(): CameraOverride {
    const f = this.forward();
    const eye = sub(this.center, [f[0] * this.distance, f[1] * this.distance, f[2] * this.distance]);
    const x = normalize(cross(WORLD_DOWN, f));
    const y = cross(f, x);
    return {
      ...this.intrinsics,
      rotation: basisToQuaternion(x, y, f),
      translation: eye,
    };
  }
}
