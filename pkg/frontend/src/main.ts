/** DOM wiring: canvas, overlay toggles, preset and scene controls. */

import { SessionClient, connect } from "./client.js";
import { pointerToAngles, type Angles } from "./controlSpace.js";
import {
  createTonePlayer,
  defaultViewState,
  renderFrame,
  showSwitchBanner,
  type ViewState,
} from "./render.js";
import type { FrameBroadcast } from "./protocol.js";

const SEND_INTERVAL_MS = 1000 / 60;

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

function setStatus(text: string): void {
  byId<HTMLSpanElement>("status").textContent = text;
}

function main(): void {
  const canvas = byId<HTMLCanvasElement>("disk");
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    throw new Error("2d canvas context unavailable");
  }
  const playTone = createTonePlayer();
  let state: ViewState = defaultViewState(canvas.width, canvas.height, 20);
  let client: SessionClient | null = null;
  let latest: FrameBroadcast | null = null;
  let pointer: Angles = { h: 0, v: 0 };
  let trackpadDelta = 0;
  let lastSent = 0;
  let awaitingFrame = false;

  const sceneSelect = byId<HTMLSelectElement>("scene");
  const presetSelect = byId<HTMLSelectElement>("preset");

  function open(): void {
    client?.close();
    latest = null;
    client = connect(sceneSelect.value, presetSelect.value, {
      onHello: (hello) => {
        state = defaultViewState(canvas.width, canvas.height, hello.cone_radius);
        bindToggles();
        setStatus(
          `session ${hello.session_id}: ${hello.scene} (${hello.targets} targets), ` +
            `techniques ${hello.techniques.join(" / ")}`,
        );
      },
      onFrame: (frame, latencyMs) => {
        latest = frame;
        awaitingFrame = false;
        if (latencyMs !== null) {
          byId<HTMLSpanElement>("latency").textContent = `${latencyMs.toFixed(0)} ms`;
        }
      },
      onSwitch: (event) => {
        showSwitchBanner(state, event.technique, event.color, performance.now());
        playTone();
      },
      onAck: () => setStatus(`scene ${sceneSelect.value}, preset ${presetSelect.value}`),
      onError: (message) => setStatus(`server error: ${message}`),
    });
  }

  function bindToggles(): void {
    for (const key of ["outlines", "regions", "scorePanel"] as const) {
      const box = byId<HTMLInputElement>(`toggle-${key}`);
      state.overlays[key] = box.checked;
      box.onchange = () => {
        state.overlays[key] = box.checked;
      };
    }
  }

  canvas.addEventListener("mousemove", (event) => {
    const rect = canvas.getBoundingClientRect();
    pointer = pointerToAngles(
      ((event.clientX - rect.left) * canvas.width) / rect.width,
      ((event.clientY - rect.top) * canvas.height) / rect.height,
      state.view,
    );
  });
  canvas.addEventListener(
    "wheel",
    (event) => {
      event.preventDefault();
      trackpadDelta += event.deltaY < 0 ? 60 : -60;
    },
    { passive: false },
  );

  presetSelect.onchange = () => client?.setPreset(presetSelect.value);
  sceneSelect.onchange = () => client?.loadScene(sceneSelect.value);
  byId<HTMLButtonElement>("reset").onclick = () => client?.reset();
  byId<HTMLButtonElement>("apply-weights").onclick = () => {
    client?.setWeights({
      speed: Number(byId<HTMLInputElement>("w-speed").value),
      accuracy: Number(byId<HTMLInputElement>("w-accuracy").value),
      comfort: Number(byId<HTMLInputElement>("w-comfort").value),
      familiarity: Number(byId<HTMLInputElement>("w-familiarity").value),
    });
  };

  function loop(nowMs: number): void {
    if (
      client &&
      !client.isClosed &&
      !awaitingFrame &&
      nowMs - lastSent >= SEND_INTERVAL_MS
    ) {
      client.sendPointer(pointer, trackpadDelta);
      trackpadDelta = 0;
      lastSent = nowMs;
      awaitingFrame = true;
    }
    if (latest) {
      renderFrame(ctx!, latest, state, nowMs);
    }
    requestAnimationFrame(loop);
  }

  fetch("/scenes")
    .then((res) => res.json())
    .then((scenes: { name: string }[]) => {
      sceneSelect.innerHTML = "";
      for (const { name } of scenes) {
        const option = document.createElement("option");
        option.value = name;
        option.textContent = name;
        sceneSelect.appendChild(option);
      }
      sceneSelect.value = scenes.some((s) => s.name === "sparse")
        ? "sparse"
        : scenes[0]?.name ?? "";
      open();
      requestAnimationFrame(loop);
    })
    .catch(() => setStatus("could not reach the session service"));
}

main();
