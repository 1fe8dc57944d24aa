import { describe, expect, it } from "vitest";

import {
  BANNER_DURATION_MS,
  defaultViewState,
  renderFrame,
  showSwitchBanner,
  type Draw2D,
} from "../src/render.js";
import { makeFrame } from "./helpers.js";

/** Records every draw call so tests can assert on what was rendered. */
class RecordingContext implements Draw2D {
  fillStyle: string | CanvasGradient | CanvasPattern = "";
  strokeStyle: string | CanvasGradient | CanvasPattern = "";
  lineWidth = 1;
  globalAlpha = 1;
  font = "";
  textAlign: CanvasTextAlign = "left";
  calls: string[] = [];
  texts: string[] = [];
  polygons = 0;

  beginPath(): void {
    this.calls.push("beginPath");
  }
  moveTo(): void {
    this.calls.push("moveTo");
  }
  lineTo(): void {
    this.calls.push("lineTo");
  }
  closePath(): void {
    this.calls.push("closePath");
    this.polygons += 1;
  }
  arc(): void {
    this.calls.push("arc");
  }
  stroke(): void {
    this.calls.push("stroke");
  }
  fill(): void {
    this.calls.push("fill");
  }
  fillRect(): void {
    this.calls.push("fillRect");
  }
  clearRect(): void {
    this.calls.push("clearRect");
  }
  fillText(text: string): void {
    this.texts.push(text);
  }
  save(): void {
    this.calls.push("save");
  }
  restore(): void {
    this.calls.push("restore");
  }
}

describe("renderFrame", () => {
  it("draws outline and region polygons when overlays are on", () => {
    const ctx = new RecordingContext();
    const state = defaultViewState(960, 640, 20);
    renderFrame(ctx, makeFrame(), state, 0);
    expect(ctx.polygons).toBe(2);
    expect(ctx.texts.some((t) => t.startsWith("technique:"))).toBe(true);
  });

  it("skips overlay geometry when toggled off without any network call", () => {
    const ctx = new RecordingContext();
    const state = defaultViewState(960, 640, 20);
    state.overlays.outlines = false;
    state.overlays.regions = false;
    state.overlays.scorePanel = false;
    renderFrame(ctx, makeFrame(), state, 0);
    expect(ctx.polygons).toBe(0);
    expect(ctx.texts.some((t) => t.includes("overall"))).toBe(false);
  });

  it("renders the score panel with one overall line per technique", () => {
    const ctx = new RecordingContext();
    const state = defaultViewState(960, 640, 20);
    renderFrame(ctx, makeFrame(), state, 0);
    const overalls = ctx.texts.filter((t) => t.includes("overall"));
    expect(overalls).toHaveLength(2);
    expect(overalls[0]).toContain("RayCasting");
    expect(ctx.texts).toContain("familiarity");
  });

  it("shows the switch banner in technique color until it expires", () => {
    const ctx = new RecordingContext();
    const state = defaultViewState(960, 640, 20);
    showSwitchBanner(state, "StickyRay", "#17b890", 100);
    renderFrame(ctx, makeFrame(), state, 100 + BANNER_DURATION_MS - 1);
    expect(ctx.texts).toContain("switched to StickyRay");
    expect(state.banner?.color).toBe("#17b890");

    const after = new RecordingContext();
    renderFrame(after, makeFrame(), state, 100 + BANNER_DURATION_MS);
    expect(after.texts).not.toContain("switched to StickyRay");
  });

  it("renders the depth cursor readout when present", () => {
    const ctx = new RecordingContext();
    const state = defaultViewState(960, 640, 20);
    const frame = makeFrame();
    frame.geometry.cursor_depth = 4.25;
    renderFrame(ctx, frame, state, 0);
    expect(ctx.texts).toContain("cursor depth 4.25 m");
  });
});
