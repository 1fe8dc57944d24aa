"""Session service: streams pointer frames in, per-frame decisions out.

Exposes a small HTTP surface (health, bundled scene listing, static UI
assets) plus a WebSocket endpoint where each connection is one isolated
session. The server owns all scoring; clients only render broadcasts.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import __version__
from . import adapter as ad
from . import scene as sc
from . import techniques as tq

PROTOCOL_VERSION = 1
BUNDLED_SCENE_SEED = 42
BUNDLED_TARGET_SIZE = 2.5


def _bundled_scenes() -> dict[str, sc.Scene]:
    from . import simulator as sim

    scenes = {}
    for kind in sim.ENVIRONMENTS:
        spec = sim.environment_spec(kind, BUNDLED_TARGET_SIZE, BUNDLED_SCENE_SEED)
        scenes[kind], _ = sim.generate_environment(spec)
    return scenes


def _ui_directory() -> Path | None:
    override = os.environ.get("ADAPTSEL_UI_DIR")
    if override:
        path = Path(override)
        return path if path.is_dir() else None
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None


def _polygon_coords(poly) -> list[list[float]]:
    return [[float(h), float(v)] for h, v in poly.vertices]


@dataclass
class Session:
    """Isolated per-connection engine state."""

    session_id: str
    scene_name: str
    scene: sc.Scene
    preset: str
    config: ad.AdapterConfig
    adapter_state: ad.AdapterState = None
    tech_states: dict[str, tq.TechniqueState] = field(default_factory=dict)
    cursor_cache: tq.RaycursorCellCache = field(
        default_factory=tq.RaycursorCellCache
    )
    current: str = ""
    frame_no: int = 0

    def __post_init__(self):
        self.reset()

    def reset(self) -> None:
        self.adapter_state = ad.AdapterState.initial(self.config)
        self.tech_states = {
            k: tq.TechniqueState(kind=k) for k in self.config.techniques
        }
        self.cursor_cache = tq.RaycursorCellCache()
        self.current = self.config.initial_technique
        self.frame_no = 0

    def set_preset(self, preset: str) -> None:
        if preset not in ad.PRESETS:
            raise ValueError(f"unknown preset {preset!r}")
        self.preset = preset
        self.config = ad.PRESETS[preset]()
        self.reset()

    def set_weights(self, weights: dict) -> None:
        names = ("speed", "accuracy", "comfort", "familiarity")
        try:
            values = {name: float(weights[name]) for name in names}
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"weights must provide numeric {names}") from exc
        if any(v < 0 for v in values.values()):
            raise ValueError("weights must be non-negative")
        if sum(values.values()) <= 0:
            raise ValueError("weight sum must be positive")
        self.config = replace(
            self.config,
            k_speed=values["speed"],
            k_accuracy=values["accuracy"],
            k_comfort=values["comfort"],
            k_familiarity=values["familiarity"],
        )

    def load_scene(self, name: str, scene: sc.Scene) -> None:
        self.scene_name = name
        self.scene = scene
        self.reset()

    def pointer_update(self, payload: dict) -> dict:
        try:
            position = np.asarray(payload["position"], dtype=float).reshape(3)
            direction = np.asarray(payload["direction"], dtype=float).reshape(3)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError("pointer_update needs 3D position and direction") from exc
        norm = float(np.linalg.norm(direction))
        if not np.isfinite(position).all() or norm < 1e-9:
            raise ValueError("pointer_update fields must be finite and non-zero")
        pointer = sc.PointerState(
            controller_position=position,
            pointing_direction=direction / norm,
            hmd_position=np.asarray(
                payload.get("hmd_position", [0.0, 1.6, 0.0]), dtype=float
            ),
            hmd_forward=np.asarray(
                payload.get("hmd_forward", [0.0, 0.0, 1.0]), dtype=float
            ),
            trigger=bool(payload.get("trigger", False)),
            trackpad_delta=float(payload.get("trackpad_delta", 0.0)),
            timestamp=float(payload.get("timestamp", 0.0)),
        )
        ctx = sc.extract_context(
            self.scene,
            pointer,
            arm=self.config.arm,
            r_c=self.config.r_c,
            dominant=self.config.dominant,
        )
        regions = {
            k: tq.regions_for(
                k, ctx, self.cursor_cache if k == "RayCursor" else None
            )
            for k in self.config.techniques
        }
        decision, self.adapter_state = ad.step(
            ctx, regions, self.config, self.adapter_state
        )
        if decision.switched:
            self.current = decision.new_technique
        state = self.tech_states[self.current]
        hit, self.tech_states[self.current] = tq.highlight(state, ctx, pointer)
        self.frame_no += 1
        return self._broadcast(ctx, regions, decision, hit, pointer)

    def _broadcast(self, ctx, regions, decision, hit, pointer) -> dict:
        active_regions = []
        for region in regions[self.current]:
            active_regions.append(
                {
                    "target_id": region.target_id,
                    "region": _polygon_coords(region.region),
                    "w": region.w,
                    "a": region.a,
                    "box": list(region.box),
                    "aim_center": (
                        [region.aim_center.h, region.aim_center.v]
                        if region.aim_center is not None
                        else None
                    ),
                }
            )
        outlines = [
            {
                "id": t.id,
                "outline": _polygon_coords(t.outline),
                "centroid": [t.centroid.h, t.centroid.v] if t.visible else None,
                "depth": t.depth,
            }
            for t in ctx.targets
        ]
        sticky_endpoint = None
        if self.current == "StickyRay" and hit is not None:
            record = next((t for t in ctx.targets if t.id == hit), None)
            if record is not None and record.visible:
                sticky_endpoint = [record.centroid.h, record.centroid.v]
        message = {
            "v": PROTOCOL_VERSION,
            "type": "frame",
            "frame": self.frame_no,
            "timestamp": pointer.timestamp,
            "technique": self.current,
            "color": tq.TECHNIQUE_COLORS[self.current],
            "optimal": decision.optimal,
            "switched": decision.switched,
            "margin": decision.margin,
            "scores": decision.scores,
            "highlight": hit,
            "cone_radius": self.config.r_c,
            "geometry": {
                "outlines": outlines,
                "regions": active_regions,
                "sticky_endpoint": sticky_endpoint,
                "cursor_depth": (
                    self.tech_states["RayCursor"].cursor_depth
                    if "RayCursor" in self.tech_states
                    else None
                ),
            },
        }
        return message


def create_app(
    default_preset: str = "application",
    extra_scenes: dict[str, sc.Scene] | None = None,
) -> FastAPI:
    """Build the service application with its bundled scene library."""
    if default_preset not in ad.PRESETS:
        raise ValueError(f"unknown preset {default_preset!r}")
    app = FastAPI(title="adaptsel service", version=__version__)
    scenes = _bundled_scenes()
    scenes.update(extra_scenes or {})
    counter = {"next": 0}

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "version": __version__,
            "config_hash": ad.PRESETS[default_preset]().hash(),
            "preset": default_preset,
        }

    @app.get("/scenes")
    def list_scenes():
        return [
            {"name": name, "targets": len(scene.targets)}
            for name, scene in sorted(scenes.items())
        ]

    @app.get("/scenes/{name}")
    def get_scene(name: str):
        if name not in scenes:
            return {"error": f"unknown scene {name!r}"}
        return sc.scene_to_dict(scenes[name])

    @app.websocket("/session")
    async def session_socket(ws: WebSocket):
        await ws.accept()
        params = ws.query_params
        scene_name = params.get("scene", "sparse")
        preset = params.get("preset", default_preset)
        if scene_name not in scenes or preset not in ad.PRESETS:
            await ws.send_json(
                {
                    "v": PROTOCOL_VERSION,
                    "type": "error",
                    "message": f"unknown scene {scene_name!r} or preset {preset!r}",
                }
            )
            await ws.close()
            return
        counter["next"] += 1
        session = Session(
            session_id=f"s{counter['next']:04d}",
            scene_name=scene_name,
            scene=scenes[scene_name],
            preset=preset,
            config=ad.PRESETS[preset](),
        )
        await ws.send_json(
            {
                "v": PROTOCOL_VERSION,
                "type": "session",
                "session_id": session.session_id,
                "scene": scene_name,
                "preset": preset,
                "technique": session.current,
                "color": tq.TECHNIQUE_COLORS[session.current],
                "techniques": list(session.config.techniques),
                "targets": len(session.scene.targets),
                "cone_radius": session.config.r_c,
                "config_hash": session.config.hash(),
            }
        )
        try:
            while True:
                try:
                    message = await ws.receive_json()
                except WebSocketDisconnect:
                    raise
                except Exception:
                    await ws.send_json(
                        {
                            "v": PROTOCOL_VERSION,
                            "type": "error",
                            "message": "malformed message: expected JSON object",
                        }
                    )
                    continue
                reply = _handle_message(session, scenes, message)
                await ws.send_json(reply)
        except WebSocketDisconnect:
            return

    ui_dir = _ui_directory()
    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app


def _handle_message(
    session: Session, scenes: dict[str, sc.Scene], message
) -> dict:
    """Apply one client message to the session; always returns a reply."""

    def error(text: str) -> dict:
        return {"v": PROTOCOL_VERSION, "type": "error", "message": text}

    def ack(**extra) -> dict:
        reply = {
            "v": PROTOCOL_VERSION,
            "type": "ack",
            "technique": session.current,
            "color": tq.TECHNIQUE_COLORS[session.current],
            "scene": session.scene_name,
            "preset": session.preset,
            "techniques": list(session.config.techniques),
        }
        reply.update(extra)
        return reply

    if not isinstance(message, dict):
        return error("malformed message: expected JSON object")
    kind = message.get("type")
    if message.get("v") != PROTOCOL_VERSION:
        return error(f"unsupported protocol version {message.get('v')!r}")
    try:
        if kind == "pointer_update":
            return session.pointer_update(message)
        if kind == "set_preset":
            session.set_preset(message.get("preset", ""))
            return ack()
        if kind == "set_weights":
            session.set_weights(message.get("weights") or {})
            return ack(weights=session.config.weights)
        if kind == "load_scene":
            name = message.get("name", "")
            if name not in scenes:
                return error(f"unknown scene {name!r}")
            session.load_scene(name, scenes[name])
            return ack(targets=len(session.scene.targets))
        if kind == "reset":
            session.reset()
            return ack()
    except ValueError as exc:
        return error(str(exc))
    return error(f"unknown message type {kind!r}")
