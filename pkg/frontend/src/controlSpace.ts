/** Mapping between canvas pixels, control-space angles and controller poses.
 *
 * The canvas shows the interaction cone as a disk: its center is (0, 0) in
 * control space and its rim sits at the cone radius in degrees. The mouse
 * steers the simulated ray, so a cursor position inside the disk becomes the
 * (h, v) deflection of the pointing direction away from straight ahead.
 */

export interface DiskView {
  /** Canvas center in pixels. */
  cx: number;
  cy: number;
  /** Disk radius in pixels. */
  radiusPx: number;
  /** Cone radius in degrees represented by the disk rim. */
  coneRadiusDeg: number;
}

export interface Angles {
  h: number;
  v: number;
}

const DEG = Math.PI / 180;

/** Fixed virtual hand pose used for every synthesized pointer update. */
export const HAND_POSITION: [number, number, number] = [0.2, 1.1, 0.1];
export const HMD_POSITION: [number, number, number] = [0.0, 1.6, 0.0];
export const HMD_FORWARD: [number, number, number] = [0.0, 0.0, 1.0];

/**
 * Canvas pixel position to control-space degrees. Positions outside the
 * disk clamp to the rim, so the angular distance never exceeds the cone
 * radius. Canvas y grows downward while elevation grows upward.
 */
export function pointerToAngles(
  x: number,
  y: number,
  view: DiskView,
): Angles {
  const scale = view.coneRadiusDeg / view.radiusPx;
  let h = (x - view.cx) * scale;
  let v = (view.cy - y) * scale;
  const r = Math.hypot(h, v);
  if (r > view.coneRadiusDeg && r > 0) {
    const shrink = view.coneRadiusDeg / r;
    h *= shrink;
    v *= shrink;
  }
  return { h, v };
}

/** Control-space degrees to canvas pixels (inverse of pointerToAngles). */
export function anglesToCanvas(h: number, v: number, view: DiskView): [number, number] {
  const scale = view.radiusPx / view.coneRadiusDeg;
  return [view.cx + h * scale, view.cy - v * scale];
}

/**
 * Pointing direction for a (h, v) deflection from straight ahead: azimuth h
 * about the vertical axis, then elevation v. The result is unit length.
 */
export function pointingDirection(angles: Angles): [number, number, number] {
  const h = angles.h * DEG;
  const v = angles.v * DEG;
  return [Math.cos(v) * Math.sin(h), Math.sin(v), Math.cos(v) * Math.cos(h)];
}

/** Angular distance in degrees between two control-space points. */
export function angularDistance(a: Angles, b: Angles): number {
  return Math.hypot(a.h - b.h, a.v - b.v);
}
