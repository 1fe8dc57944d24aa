import type { SocketLike } from "../src/client.js";
import type { FrameBroadcast } from "../src/protocol.js";

/** In-memory socket that records outbound payloads for assertions. */
export class FakeSocket implements SocketLike {
  sent: string[] = [];
  closed = false;
  onmessage: ((event: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  receive(message: unknown): void {
    this.onmessage?.({
      data: typeof message === "string" ? message : JSON.stringify(message),
    });
  }
}

export function makeFrame(overrides: Partial<FrameBroadcast> = {}): FrameBroadcast {
  return {
    v: 1,
    type: "frame",
    frame: 1,
    timestamp: 0.0,
    technique: "RayCasting",
    color: "#e4572e",
    optimal: "RayCasting",
    switched: false,
    margin: 0,
    scores: {
      RayCasting: {
        speed: 0.4,
        accuracy: 0.6,
        comfort: 0.9,
        familiarity: 1.0,
        overall: 0.58,
      },
      StickyRay: {
        speed: 0.7,
        accuracy: 0.7,
        comfort: 0.9,
        familiarity: 0.5,
        overall: 0.69,
      },
    },
    highlight: null,
    cone_radius: 20,
    geometry: {
      outlines: [
        {
          id: "t001",
          outline: [
            [-2, -2],
            [2, -2],
            [2, 2],
            [-2, 2],
          ],
          centroid: [0, 0],
          depth: 5,
        },
      ],
      regions: [
        {
          target_id: "t001",
          region: [
            [-4, -4],
            [4, -4],
            [4, 4],
            [-4, 4],
          ],
          w: 4,
          a: 1,
          box: [-4, 4, -4, 4],
          aim_center: [0, 0],
        },
      ],
      sticky_endpoint: null,
      cursor_depth: null,
    },
    ...overrides,
  };
}
