/** Canvas rendering of one frame broadcast over the angular disk.
 *
 * Drawing is a pure function of (frame, view state, clock): it never talks
 * back to the server, so toggling overlays changes pixels only.
 */

import { anglesToCanvas, type DiskView } from "./controlSpace.js";
import type { FrameBroadcast, ObjectiveScores, Vec2 } from "./protocol.js";

/** Subset of CanvasRenderingContext2D the renderer needs; mockable in tests. */
export interface Draw2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
  font: string;
  textAlign: CanvasTextAlign;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  save(): void;
  restore(): void;
}

export interface OverlayToggles {
  outlines: boolean;
  regions: boolean;
  scorePanel: boolean;
}

export interface Banner {
  text: string;
  color: string;
  untilMs: number;
}

export interface ViewState {
  view: DiskView;
  overlays: OverlayToggles;
  banner: Banner | null;
  width: number;
  height: number;
}

export const BANNER_DURATION_MS = 1500;
const OBJECTIVES: (keyof ObjectiveScores)[] = [
  "speed",
  "accuracy",
  "comfort",
  "familiarity",
];

export function defaultViewState(width: number, height: number, coneRadiusDeg: number): ViewState {
  const radiusPx = Math.min(width, height) * 0.42;
  return {
    view: { cx: width * 0.42, cy: height / 2, radiusPx, coneRadiusDeg },
    overlays: { outlines: true, regions: true, scorePanel: true },
    banner: null,
    width,
    height,
  };
}

/** Record a server switch event as a transient banner. */
export function showSwitchBanner(
  state: ViewState,
  technique: string,
  color: string,
  nowMs: number,
): void {
  state.banner = {
    text: `switched to ${technique}`,
    color,
    untilMs: nowMs + BANNER_DURATION_MS,
  };
}

function tracePolygon(ctx: Draw2D, vertices: Vec2[], view: DiskView): void {
  ctx.beginPath();
  vertices.forEach(([h, v], i) => {
    const [x, y] = anglesToCanvas(h, v, view);
    if (i === 0) {
      ctx.moveTo(x, y);
    } else {
      ctx.lineTo(x, y);
    }
  });
  ctx.closePath();
}

function drawDisk(ctx: Draw2D, state: ViewState): void {
  const { cx, cy, radiusPx, coneRadiusDeg } = state.view;
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, state.width, state.height);
  ctx.beginPath();
  ctx.arc(cx, cy, radiusPx, 0, 2 * Math.PI);
  ctx.fillStyle = "#1a2030";
  ctx.fill();
  ctx.strokeStyle = "#3a4660";
  ctx.lineWidth = 2;
  ctx.stroke();
  ctx.lineWidth = 1;
  ctx.globalAlpha = 0.35;
  for (let deg = 5; deg < coneRadiusDeg; deg += 5) {
    ctx.beginPath();
    ctx.arc(cx, cy, (deg / coneRadiusDeg) * radiusPx, 0, 2 * Math.PI);
    ctx.stroke();
  }
  ctx.globalAlpha = 1;
}

function drawOutlines(ctx: Draw2D, frame: FrameBroadcast, state: ViewState): void {
  for (const target of frame.geometry.outlines) {
    if (target.outline.length < 3) {
      continue;
    }
    const highlighted = target.id === frame.highlight;
    tracePolygon(ctx, target.outline, state.view);
    if (highlighted) {
      ctx.fillStyle = frame.color;
      ctx.globalAlpha = 0.8;
      ctx.fill();
      ctx.globalAlpha = 1;
    }
    ctx.strokeStyle = highlighted ? frame.color : "#8fa0c0";
    ctx.lineWidth = highlighted ? 2 : 1;
    ctx.stroke();
  }
  ctx.lineWidth = 1;
}

function drawRegions(ctx: Draw2D, frame: FrameBroadcast, state: ViewState): void {
  for (const region of frame.geometry.regions) {
    if (region.region.length < 3) {
      continue;
    }
    tracePolygon(ctx, region.region, state.view);
    ctx.fillStyle = frame.color;
    ctx.globalAlpha = region.target_id === frame.highlight ? 0.3 : 0.12;
    ctx.fill();
    ctx.globalAlpha = 1;
    ctx.strokeStyle = frame.color;
    ctx.stroke();
  }
}

function drawStickyRay(ctx: Draw2D, frame: FrameBroadcast, state: ViewState): void {
  const endpoint = frame.geometry.sticky_endpoint;
  if (!endpoint) {
    return;
  }
  const { cx, cy } = state.view;
  const [x, y] = anglesToCanvas(endpoint[0], endpoint[1], state.view);
  ctx.beginPath();
  ctx.moveTo(cx, cy);
  ctx.lineTo(x, y);
  ctx.strokeStyle = frame.color;
  ctx.lineWidth = 2;
  ctx.stroke();
  ctx.lineWidth = 1;
}

function drawScorePanel(ctx: Draw2D, frame: FrameBroadcast, state: ViewState): void {
  const x0 = state.width * 0.78;
  const barW = state.width * 0.18;
  let y = 30;
  ctx.font = "13px sans-serif";
  ctx.textAlign = "left";
  for (const [technique, scores] of Object.entries(frame.scores)) {
    ctx.fillStyle = technique === frame.technique ? frame.color : "#c8d0e0";
    ctx.fillText(
      `${technique}  overall ${scores.overall.toFixed(3)}`,
      x0,
      y,
    );
    y += 8;
    for (const objective of OBJECTIVES) {
      ctx.fillStyle = "#2a3246";
      ctx.fillRect(x0, y, barW, 8);
      ctx.fillStyle = technique === frame.technique ? frame.color : "#6d7ba0";
      ctx.fillRect(x0, y, barW * Math.max(0, Math.min(1, scores[objective])), 8);
      ctx.fillStyle = "#8fa0c0";
      ctx.fillText(objective, x0 + barW + 6, y + 8);
      y += 13;
    }
    y += 14;
  }
}

function drawBanner(ctx: Draw2D, state: ViewState, nowMs: number): void {
  const banner = state.banner;
  if (!banner || nowMs >= banner.untilMs) {
    return;
  }
  ctx.save();
  ctx.fillStyle = banner.color;
  ctx.globalAlpha = 0.9;
  ctx.fillRect(0, 0, state.width, 36);
  ctx.globalAlpha = 1;
  ctx.fillStyle = "#10141c";
  ctx.font = "bold 16px sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(banner.text, state.width / 2, 24);
  ctx.restore();
}

/** Draw one broadcast. Malformed frames are rejected upstream by the client. */
export function renderFrame(
  ctx: Draw2D,
  frame: FrameBroadcast,
  state: ViewState,
  nowMs: number,
): void {
  drawDisk(ctx, state);
  if (state.overlays.regions) {
    drawRegions(ctx, frame, state);
  }
  if (state.overlays.outlines) {
    drawOutlines(ctx, frame, state);
  }
  drawStickyRay(ctx, frame, state);
  if (state.overlays.scorePanel) {
    drawScorePanel(ctx, frame, state);
  }
  ctx.fillStyle = frame.color;
  ctx.font = "14px sans-serif";
  ctx.textAlign = "left";
  ctx.fillText(`technique: ${frame.technique}`, 12, state.height - 14);
  if (frame.geometry.cursor_depth !== null) {
    ctx.fillStyle = "#8fa0c0";
    ctx.fillText(
      `cursor depth ${frame.geometry.cursor_depth.toFixed(2)} m`,
      12,
      state.height - 32,
    );
  }
  drawBanner(ctx, state, nowMs);
}

/** Switch notification tone; silently does nothing without audio support. */
export function createTonePlayer(): () => void {
  const Ctor =
    typeof AudioContext !== "undefined"
      ? AudioContext
      : undefined;
  if (!Ctor) {
    return () => {};
  }
  let audio: AudioContext | null = null;
  return () => {
    audio = audio ?? new Ctor();
    const osc = audio.createOscillator();
    const gain = audio.createGain();
    osc.frequency.value = 880;
    gain.gain.setValueAtTime(0.12, audio.currentTime);
    gain.gain.exponentialRampToValueAtTime(1e-4, audio.currentTime + 0.25);
    osc.connect(gain).connect(audio.destination);
    osc.start();
    osc.stop(audio.currentTime + 0.25);
  };
}
