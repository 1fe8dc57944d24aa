/** Message schema for the session service, protocol version 1. */

export const PROTOCOL_VERSION = 1;

export type Vec2 = [number, number];

export interface TargetOutline {
  id: string;
  outline: Vec2[];
  centroid: Vec2 | null;
  depth: number;
}

export interface ActiveRegion {
  target_id: string;
  region: Vec2[];
  w: number;
  a: number;
  box: [number, number, number, number];
  aim_center: Vec2 | null;
}

export interface ObjectiveScores {
  speed: number;
  accuracy: number;
  comfort: number;
  familiarity: number;
  overall: number;
}

export interface FrameBroadcast {
  v: number;
  type: "frame";
  frame: number;
  timestamp: number;
  technique: string;
  color: string;
  optimal: string;
  switched: boolean;
  margin: number;
  scores: Record<string, ObjectiveScores>;
  highlight: string | null;
  cone_radius: number;
  geometry: {
    outlines: TargetOutline[];
    regions: ActiveRegion[];
    sticky_endpoint: Vec2 | null;
    cursor_depth: number | null;
  };
}

export interface SessionHello {
  v: number;
  type: "session";
  session_id: string;
  scene: string;
  preset: string;
  technique: string;
  color: string;
  techniques: string[];
  targets: number;
  cone_radius: number;
  config_hash: string;
}

export interface Ack {
  v: number;
  type: "ack";
  technique: string;
  color: string;
  scene: string;
  preset: string;
  techniques: string[];
  [extra: string]: unknown;
}

export interface ErrorMessage {
  v: number;
  type: "error";
  message: string;
}

export type ServerMessage = FrameBroadcast | SessionHello | Ack | ErrorMessage;

export interface PointerUpdate {
  v: number;
  type: "pointer_update";
  position: [number, number, number];
  direction: [number, number, number];
  hmd_position: [number, number, number];
  hmd_forward: [number, number, number];
  trigger: boolean;
  trackpad_delta: number;
  timestamp: number;
}

export type ClientMessage =
  | PointerUpdate
  | { v: number; type: "set_preset"; preset: string }
  | { v: number; type: "set_weights"; weights: Record<string, number> }
  | { v: number; type: "load_scene"; name: string }
  | { v: number; type: "reset" };

const SERVER_TYPES = new Set(["frame", "session", "ack", "error"]);

/**
 * Parse one raw socket payload. Returns null for anything that is not a
 * well-formed version-1 server message; callers skip such frames.
 */
export function parseServerMessage(raw: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    return null;
  }
  const msg = doc as Record<string, unknown>;
  if (msg.v !== PROTOCOL_VERSION || !SERVER_TYPES.has(msg.type as string)) {
    return null;
  }
  if (msg.type === "frame") {
    const geometry = msg.geometry as Record<string, unknown> | undefined;
    if (
      typeof msg.technique !== "string" ||
      typeof msg.switched !== "boolean" ||
      typeof msg.scores !== "object" ||
      msg.scores === null ||
      typeof geometry !== "object" ||
      geometry === null ||
      !Array.isArray(geometry.outlines) ||
      !Array.isArray(geometry.regions)
    ) {
      return null;
    }
  }
  if (msg.type === "error" && typeof msg.message !== "string") {
    return null;
  }
  return msg as unknown as ServerMessage;
}
