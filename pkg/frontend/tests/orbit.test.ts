import { describe, expect, it } from "vitest";
import type { InstanceRow } from "../src/api";
import { basisToQuaternion, defaultIntrinsics, OrbitCamera, type Vec3 } from "../src/orbit";

// Reference quaternion application for checking the produced poses: rotate
// a vector by q (w, x, y, z), i.e. the camera-to-world transform.
function rotate(q: [number, number, number, number], v: Vec3): Vec3 {
  const [w, x, y, z] = q;
  const uv: Vec3 = [
    2 * (y * v[2] - z * v[1]),
    2 * (z * v[0] - x * v[2]),
    2 * (x * v[1] - y * v[0]),
  ];
  return [
    v[0] + w * uv[0] + (y * uv[2] - z * uv[1]),
    v[1] + w * uv[1] + (z * uv[0] - x * uv[2]),
    v[2] + w * uv[2] + (x * uv[1] - y * uv[0]),
  ];
}

function expectClose(got: Vec3, want: Vec3, tol = 1e-12): void {
  for (let i = 0; i < 3; i++) {
    expect(Math.abs(got[i] - want[i])).toBeLessThan(tol);
  }
}

describe("basisToQuaternion", () => {
  it("maps the identity basis to the identity quaternion", () => {
    const q = basisToQuaternion([1, 0, 0], [0, 1, 0], [0, 0, 1]);
    expect(q[0]).toBeCloseTo(1, 12);
    expect(Math.hypot(q[1], q[2], q[3])).toBeCloseTo(0, 12);
  });

  it("reproduces each basis as the rotated cardinal axes", () => {
    // 90 degree yaw: camera +z points along world +x
    const x: Vec3 = [0, 0, -1];
    const y: Vec3 = [0, 1, 0];
    const z: Vec3 = [1, 0, 0];
    const q = basisToQuaternion(x, y, z);
    expectClose(rotate(q, [1, 0, 0]), x, 1e-9);
    expectClose(rotate(q, [0, 1, 0]), y, 1e-9);
    expectClose(rotate(q, [0, 0, 1]), z, 1e-9);
  });

  it("handles trace-negative orientations", () => {
    // 180 degree yaw: looking back along -z with x flipped
    const x: Vec3 = [-1, 0, 0];
    const y: Vec3 = [0, 1, 0];
    const z: Vec3 = [0, 0, -1];
    const q = basisToQuaternion(x, y, z);
    expectClose(rotate(q, [0, 0, 1]), z, 1e-9);
    expect(Math.hypot(...q)).toBeCloseTo(1, 12);
  });
});

describe("OrbitCamera", () => {
  const intrinsics = defaultIntrinsics(64, 48);

  it("starts looking +z at the center from the given distance", () => {
    const cam = new OrbitCamera([0, 0, 10], 6, intrinsics);
    const pose = cam.pose();
    expectClose(pose.translation, [0, 0, 4]);
    // camera +z must be the view direction
    expectClose(rotate(pose.rotation, [0, 0, 1]), [0, 0, 1], 1e-9);
  });

  it("keeps the center in view while orbiting", () => {
    const cam = new OrbitCamera([1, 0.5, 8], 5, intrinsics);
    cam.rotate(0.7, 0.3);
    const pose = cam.pose();
    const eye = pose.translation;
    const toCenter: Vec3 = [1 - eye[0], 0.5 - eye[1], 8 - eye[2]];
    const dist = Math.hypot(...toCenter);
    expect(dist).toBeCloseTo(5, 9);
    const forward = rotate(pose.rotation, [0, 0, 1]);
    expectClose(
      forward,
      [toCenter[0] / dist, toCenter[1] / dist, toCenter[2] / dist],
      1e-9,
    );
  });

  it("produces an orthonormal right-handed basis", () => {
    const cam = new OrbitCamera([0, 0, 0], 3, intrinsics);
    cam.rotate(-1.1, 0.8);
    const q = cam.pose().rotation;
    const x = rotate(q, [1, 0, 0]);
    const y = rotate(q, [0, 1, 0]);
    const z = rotate(q, [0, 0, 1]);
    const dot = (a: Vec3, b: Vec3) => a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    expect(Math.abs(dot(x, y))).toBeLessThan(1e-9);
    expect(Math.abs(dot(x, z))).toBeLessThan(1e-9);
    expect(dot(x, x)).toBeCloseTo(1, 9);
    // y = z cross x for a right-handed frame
    expectClose(y, [
      z[1] * x[2] - z[2] * x[1],
      z[2] * x[0] - z[0] * x[2],
      z[0] * x[1] - z[1] * x[0],
    ], 1e-9);
  });

  it("clamps pitch short of straight down and floors the zoom distance", () => {
    const cam = new OrbitCamera([0, 0, 0], 3, intrinsics);
    cam.rotate(0, 99);
    expect(cam.pitch).toBeLessThan(Math.PI / 2);
    cam.pose(); // must not throw at the clamp
    for (let i = 0; i < 50; i++) cam.zoom(0.5);
    expect(cam.distance).toBeGreaterThanOrEqual(0.5);
  });

  it("frames the union of catalog boxes", () => {
    const rows: InstanceRow[] = [
      {
        instance_id: 1,
        total_count: 1,
        dynamic: true,
        inserted: false,
        bbox_min: [-2, 0, 6],
        bbox_max: [0, 1, 8],
      },
      {
        instance_id: 2,
        total_count: 1,
        dynamic: false,
        inserted: false,
        bbox_min: [1, 0, 9],
        bbox_max: [3, 1, 11],
      },
    ];
    const cam = OrbitCamera.aroundInstances(rows, intrinsics);
    expectClose(cam.center, [0.5, 0.5, 8.5]);
    expect(cam.distance).toBeGreaterThan(5);
    const empty = OrbitCamera.aroundInstances([], intrinsics);
    expect(empty.distance).toBe(10);
  });
});
