/** Session client: one WebSocket, messages applied strictly in order.
 *
 * The client holds no scoring logic. It forwards pointer input, applies
 * server broadcasts in arrival order and surfaces switch events exactly as
 * the server reported them.
 */

import {
  HAND_POSITION,
  HMD_FORWARD,
  HMD_POSITION,
  pointingDirection,
  type Angles,
} from "./controlSpace.js";
import {
  PROTOCOL_VERSION,
  parseServerMessage,
  type Ack,
  type ClientMessage,
  type FrameBroadcast,
  type SessionHello,
} from "./protocol.js";

/** Minimal socket surface so tests can drive the client without a network. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
}

export interface SwitchEvent {
  frame: number;
  technique: string;
  color: string;
  timestamp: number;
}

export interface ClientCallbacks {
  onHello?: (hello: SessionHello) => void;
  onFrame?: (frame: FrameBroadcast, latencyMs: number | null) => void;
  onSwitch?: (event: SwitchEvent) => void;
  onAck?: (ack: Ack) => void;
  onError?: (message: string) => void;
}

export class SessionClient {
  readonly switches: SwitchEvent[] = [];
  hello: SessionHello | null = null;
  lastFrame: FrameBroadcast | null = null;
  framesReceived = 0;
  framesSkipped = 0;

  private readonly pending = new Map<number, number>();
  private closed = false;

  constructor(
    private readonly socket: SocketLike,
    private readonly callbacks: ClientCallbacks = {},
    private readonly now: () => number = () =>
      typeof performance !== "undefined" ? performance.now() : Date.now(),
    private readonly log: (message: string) => void = (m) => console.warn(m),
  ) {
    socket.onmessage = (event) => this.handleRaw(event.data);
    socket.onclose = () => {
      this.closed = true;
    };
  }

  get isClosed(): boolean {
    return this.closed;
  }

  /** Send a pointer pose synthesized from a control-space deflection. */
  sendPointer(angles: Angles, trackpadDelta = 0, timestamp?: number): void {
    const t = timestamp ?? this.now() / 1000;
    this.pending.set(t, this.now());
    if (this.pending.size > 600) {
      const oldest = this.pending.keys().next().value as number;
      this.pending.delete(oldest);
    }
    this.send({
      v: PROTOCOL_VERSION,
      type: "pointer_update",
      position: HAND_POSITION,
      direction: pointingDirection(angles),
      hmd_position: HMD_POSITION,
      hmd_forward: HMD_FORWARD,
      trigger: false,
      trackpad_delta: trackpadDelta,
      timestamp: t,
    });
  }

  setWeights(weights: Record<string, number>): void {
    this.send({ v: PROTOCOL_VERSION, type: "set_weights", weights });
  }

  setPreset(preset: string): void {
    this.send({ v: PROTOCOL_VERSION, type: "set_preset", preset });
  }

  loadScene(name: string): void {
    this.send({ v: PROTOCOL_VERSION, type: "load_scene", name });
  }

  reset(): void {
    this.send({ v: PROTOCOL_VERSION, type: "reset" });
  }

  close(): void {
    this.closed = true;
    this.socket.close();
  }

  private send(message: ClientMessage): void {
    if (!this.closed) {
      this.socket.send(JSON.stringify(message));
    }
  }

  /** Apply one raw payload; malformed payloads are skipped and logged. */
  handleRaw(raw: string): void {
    const message = parseServerMessage(raw);
    if (message === null) {
      this.framesSkipped += 1;
      this.log("skipping malformed server message");
      return;
    }
    switch (message.type) {
      case "session":
        this.hello = message;
        this.callbacks.onHello?.(message);
        return;
      case "ack":
        this.callbacks.onAck?.(message);
        return;
      case "error":
        this.callbacks.onError?.(message.message);
        return;
      case "frame":
        this.applyFrame(message);
        return;
    }
  }

  private applyFrame(frame: FrameBroadcast): void {
    this.framesReceived += 1;
    this.lastFrame = frame;
    let latencyMs: number | null = null;
    const sentAt = this.pending.get(frame.timestamp);
    if (sentAt !== undefined) {
      latencyMs = this.now() - sentAt;
      this.pending.delete(frame.timestamp);
    }
    if (frame.switched) {
      const event: SwitchEvent = {
        frame: frame.frame,
        technique: frame.technique,
        color: frame.color,
        timestamp: frame.timestamp,
      };
      this.switches.push(event);
      this.callbacks.onSwitch?.(event);
    }
    this.callbacks.onFrame?.(frame, latencyMs);
  }
}

/** Open a real WebSocket session against the serving host. */
export function connect(
  scene: string,
  preset: string,
  callbacks: ClientCallbacks,
): SessionClient {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  const url = `${proto}://${location.host}/session?scene=${encodeURIComponent(
    scene,
  )}&preset=${encodeURIComponent(preset)}`;
  return new SessionClient(new WebSocket(url) as unknown as SocketLike, callbacks);
}
