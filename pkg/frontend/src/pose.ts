/**
 * Camera state and the exact pose convention of the engine service:
 * camera-to-world [R | t], camera looks down +Z, image u right / v down
 * (world Y is down). Poses serialize as row-major 12-number arrays.
 *
 * Yaw rotates about +Y (yaw 0 faces +Z, positive turns toward +X); pitch
 * rotates about the camera's local X axis, positive looking up. WASD
 * moves in the camera's ground plane (yaw only), so looking up or down
 * never changes walking direction.
 */

export interface CameraState {
  x: number;
  y: number;
  z: number;
  yawDeg: number;
  pitchDeg: number;
}

export interface MoveInput {
  forward: number; // +1 = W, -1 = S
  strafe: number;  // +1 = D, -1 = A
  dYawDeg: number;
  dPitchDeg: number;
}

export const PITCH_LIMIT_DEG = 89;

const degToRad = (d: number) => (d * Math.PI) / 180;

export function clampPitch(pitchDeg: number): number {
  return Math.min(PITCH_LIMIT_DEG, Math.max(-PITCH_LIMIT_DEG, pitchDeg));
}

// -0 would lose its sign through JSON (stringify(-0) === "0"), so the
// serialized convention canonicalizes all zeros to +0.
const zeroSafe = (v: number): number => (v === 0 ? 0 : v);

/** 3x3 camera-to-world rotation for yaw/pitch, row-major. */
export function yawPitchRotation(yawDeg: number, pitchDeg: number): number[][] {
  const y = degToRad(yawDeg);
  const p = degToRad(pitchDeg);
  const cy = Math.cos(y), sy = Math.sin(y);
  const cp = Math.cos(p), sp = Math.sin(p);
  // R = R_yaw(+Y) * R_pitch(+X)
  return [
    [cy, sy * sp, sy * cp],
    [0, cp, -sp],
    [-sy, cy * sp, cy * cp],
  ].map((row) => row.map(zeroSafe));
}

/** Row-major 12-number [R | t] array the service expects. */
export function poseToArray12(state: CameraState): number[] {
  const r = yawPitchRotation(state.yawDeg, state.pitchDeg);
  return [
    r[0][0], r[0][1], r[0][2], state.x,
    r[1][0], r[1][1], r[1][2], state.y,
    r[2][0], r[2][1], r[2][2], state.z,
  ];
}

export function poseQueryString(state: CameraState): string {
  return poseToArray12(state).map((v) => v.toPrecision(17)).join(",");
}

/**
 * Apply one input tick. Translation happens in the ground plane spanned
 * by the yaw-only forward/right axes; pitch is clamped to (-89, 89).
 */
export function applyInput(state: CameraState, input: MoveInput,
                           moveStep: number): CameraState {
  const yawAfter = state.yawDeg + input.dYawDeg;
  const y = degToRad(yawAfter);
  const fwd = { x: Math.sin(y), z: Math.cos(y) };
  const right = { x: Math.cos(y), z: -Math.sin(y) };
  return {
    x: state.x + moveStep * (input.forward * fwd.x + input.strafe * right.x),
    y: state.y,
    z: state.z + moveStep * (input.forward * fwd.z + input.strafe * right.z),
    yawDeg: yawAfter,
    pitchDeg: clampPitch(state.pitchDeg + input.dPitchDeg),
  };
}

export function samePose(a: CameraState, b: CameraState): boolean {
  return a.x === b.x && a.y === b.y && a.z === b.z
    && a.yawDeg === b.yawDeg && a.pitchDeg === b.pitchDeg;
}
