import { describe, expect, it } from "vitest";

import { parseServerMessage } from "../src/protocol.js";
import { makeFrame } from "./helpers.js";

describe("parseServerMessage", () => {
  it("accepts a well-formed frame broadcast", () => {
    const parsed = parseServerMessage(JSON.stringify(makeFrame()));
    expect(parsed).not.toBeNull();
    expect(parsed!.type).toBe("frame");
  });

  it("accepts session, ack and error messages", () => {
    for (const doc of [
      { v: 1, type: "session", session_id: "s0001" },
      { v: 1, type: "ack", technique: "RayCasting" },
      { v: 1, type: "error", message: "unknown scene" },
    ]) {
      expect(parseServerMessage(JSON.stringify(doc))).not.toBeNull();
    }
  });

  it("rejects invalid JSON and non-object payloads", () => {
    expect(parseServerMessage("{not json")).toBeNull();
    expect(parseServerMessage("[1,2,3]")).toBeNull();
    expect(parseServerMessage('"frame"')).toBeNull();
  });

  it("rejects unsupported protocol versions", () => {
    const frame = { ...makeFrame(), v: 2 };
    expect(parseServerMessage(JSON.stringify(frame))).toBeNull();
  });

  it("rejects frames with missing geometry or scores", () => {
    const noGeometry = { ...makeFrame(), geometry: undefined };
    const noScores = { ...makeFrame(), scores: null };
    expect(parseServerMessage(JSON.stringify(noGeometry))).toBeNull();
    expect(parseServerMessage(JSON.stringify(noScores))).toBeNull();
  });

  it("rejects unknown message types", () => {
    expect(parseServerMessage(JSON.stringify({ v: 1, type: "nope" }))).toBeNull();
  });
});
