"""Seeded environment generation, scripted trials, and batch runs.

The simulator reproduces the four study environments at desk scale and
drives a scripted pointer through selection trials, either with a fixed
technique or with the adaptive engine in the loop.  Every run is fully
determined by its seed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import adapter as ad
from . import geometry as geo
from . import scene as sc
from . import techniques as tq

FRAME_RATE = 90.0
TRIAL_TIMEOUT = 15.0
HMD_POSITION = (0.0, 1.6, 0.0)
HMD_FORWARD = (0.0, 0.0, 1.0)
CONTROLLER_POSITION = (0.2, 1.1, 0.1)

# Placement margins for the designated target within the spawn region.
TARGET_BOUNDARY_MARGIN = 0.4  # m
TARGET_CENTER_MARGIN = 0.2  # m
DISTRACTOR_SIZE_RANGE = (2.0, 4.0)  # degrees of visual angle
PLACEMENT_ATTEMPTS = 2000


class GenerationError(RuntimeError):
    """Raised when object placement cannot satisfy the constraints."""


@dataclass(frozen=True)
class EnvironmentSpec:
    """One of the four study environments plus its generation knobs."""

    kind: str
    region_size: tuple[float, float, float]
    distance: float
    object_count: int
    target_size: float  # degrees of visual angle
    seed: int = 0
    distractor_size_range: tuple[float, float] = DISTRACTOR_SIZE_RANGE

    def __post_init__(self):
        if self.object_count < 1:
            raise ValueError("object_count must be at least 1")
        if not all(s > 0 for s in self.region_size):
            raise ValueError("region dimensions must be positive")
        if self.target_size <= 0:
            raise ValueError("target_size must be positive")


ENVIRONMENTS = {
    "sparse": dict(region_size=(3.0, 3.0, 3.0), distance=2.0, object_count=10),
    "dense": dict(region_size=(3.0, 3.0, 3.0), distance=2.0, object_count=240),
    "flat": dict(region_size=(3.0, 3.0, 1.0), distance=2.0, object_count=30),
    "deep": dict(region_size=(1.5, 1.5, 4.0), distance=2.0, object_count=30),
}

DISTRACTOR_SHAPES = ("box", "sphere", "cylinder", "capsule")


def environment_spec(kind: str, target_size: float, seed: int) -> EnvironmentSpec:
    try:
        base = ENVIRONMENTS[kind.lower()]
    except KeyError:
        raise ValueError(
            f"unknown environment {kind!r}; expected one of {sorted(ENVIRONMENTS)}"
        ) from None
    return EnvironmentSpec(kind=kind.lower(), target_size=target_size, seed=seed, **base)


def _region_bounds(spec: EnvironmentSpec) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned spawn region; its near face sits `distance` ahead of the user."""
    w, h, d = spec.region_size
    eye = np.asarray(HMD_POSITION)
    lo = np.array([eye[0] - w / 2, eye[1] - h / 2, eye[2] + spec.distance])
    hi = lo + np.array([w, h, d])
    return lo, hi


def _angular_to_radius(angle_deg: float, distance: float) -> float:
    """Metric radius subtending the given visual angle at the given distance."""
    return distance * math.tan(math.radians(angle_deg) / 2.0)


def _random_quaternion(rng: np.random.Generator) -> tuple[float, float, float, float]:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return tuple(float(x) for x in q)


def generate_environment(spec: EnvironmentSpec) -> tuple[sc.Scene, str]:
    """Seeded scene satisfying the placement constraints, plus the target id.

    The designated target is a sphere kept away from the region boundary and
    center; distractors are mixed primitives with random rotations, sized by
    visual angle at their spawn distance, pairwise non-intersecting under a
    bounding-sphere check.
    """
    rng = np.random.default_rng(spec.seed)
    lo, hi = _region_bounds(spec)
    eye = np.asarray(HMD_POSITION)
    center = (lo + hi) / 2.0

    placed: list[tuple[np.ndarray, float]] = []
    targets: list[sc.Target] = []

    t_lo = lo + TARGET_BOUNDARY_MARGIN
    t_hi = hi - TARGET_BOUNDARY_MARGIN
    if np.any(t_lo >= t_hi):
        raise GenerationError("region too small for the target boundary margin")
    for _ in range(PLACEMENT_ATTEMPTS):
        pos = rng.uniform(t_lo, t_hi)
        if np.linalg.norm(pos - center) < TARGET_CENTER_MARGIN:
            continue
        radius = _angular_to_radius(spec.target_size, float(np.linalg.norm(pos - eye)))
        extent = 2.0 * radius  # primitive scales are full extents
        target = sc.Target(
            id="target",
            shape="sphere",
            position=tuple(float(x) for x in pos),
            rotation=(1.0, 0.0, 0.0, 0.0),
            scale=(extent, extent, extent),
            selectable=True,
        )
        placed.append((pos, target.bounding_radius()))
        targets.append(target)
        break
    else:
        raise GenerationError("could not place the designated target")

    for i in range(spec.object_count - 1):
        for _ in range(PLACEMENT_ATTEMPTS):
            pos = rng.uniform(lo, hi)
            size = rng.uniform(*spec.distractor_size_range)
            radius = _angular_to_radius(size, float(np.linalg.norm(pos - eye)))
            extent = 2.0 * radius
            shape = DISTRACTOR_SHAPES[int(rng.integers(len(DISTRACTOR_SHAPES)))]
            distractor = sc.Target(
                id=f"d{i:03d}",
                shape=shape,
                position=tuple(float(x) for x in pos),
                rotation=_random_quaternion(rng),
                scale=(extent, extent, extent),
                selectable=True,
            )
            r = distractor.bounding_radius()
            if all(
                np.linalg.norm(pos - q) > r + qr for q, qr in placed
            ):
                placed.append((pos, r))
                targets.append(distractor)
                break
        else:
            raise GenerationError(
                f"could not place distractor {i} after {PLACEMENT_ATTEMPTS} attempts"
            )
    return sc.Scene(targets=tuple(targets)), "target"


@dataclass(frozen=True)
class TrajectoryParams:
    """Scripted pointer model: constant-rate rotation with Gaussian tremor."""

    angular_speed: float = 90.0  # deg/s
    tremor_sigma: float = 0.2  # degrees per frame
    dwell: float = 0.15  # s of steady highlight before the trigger
    frame_rate: float = FRAME_RATE
    depth_speed: float = 4.0  # m/s of simulated trackpad swiping
    reaction_delay: float = 0.3  # s of holding the ready direction first

    def __post_init__(self):
        for name in ("angular_speed", "dwell", "frame_rate", "depth_speed"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.tremor_sigma < 0 or self.reaction_delay < 0:
            raise ValueError("tremor_sigma and reaction_delay must be non-negative")


@dataclass(frozen=True)
class TrialResult:
    success: bool
    selection_time: float
    translational_movement: float
    rotational_movement: float
    error_count: int
    switches: tuple[tuple[float, str, str], ...]
    final_technique: str
    timeout: bool
    frames: int


def _rotate_toward(
    direction: np.ndarray, goal: np.ndarray, max_deg: float
) -> np.ndarray:
    """Rotate a unit vector toward another by at most max_deg degrees."""
    dot = float(np.clip(np.dot(direction, goal), -1.0, 1.0))
    angle = math.degrees(math.acos(dot))
    if angle <= max_deg or angle < 1e-9:
        return goal
    t = max_deg / angle
    theta = math.radians(angle)
    s = math.sin(theta)
    return (math.sin((1 - t) * theta) * direction + math.sin(t * theta) * goal) / s


def _perturb(direction: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Small random angular perturbation of a unit vector (tremor)."""
    if sigma <= 0:
        return direction
    ref = np.array([0.0, 1.0, 0.0])
    if abs(float(np.dot(direction, ref))) > 0.99:
        ref = np.array([1.0, 0.0, 0.0])
    u = geo.normalize(np.cross(direction, ref))
    v = np.cross(direction, u)
    dh, dv = rng.normal(0.0, math.radians(sigma), size=2)
    return geo.normalize(direction + dh * u + dv * v)


def _aim_direction(
    ctx: sc.ContextFrame,
    regions: list[tq.ActivationRegion],
    target: sc.Target,
) -> np.ndarray:
    """World direction toward the target's aim center, or its 3D center."""
    region = next((r for r in regions if r.target_id == target.id), None)
    if region is not None and region.selectable:
        c = region.aim_center
        return geo.normalize(geo.angular_to_direction(ctx.frame, c.h, c.v))
    return geo.normalize(np.asarray(target.position) - ctx.frame.position)


@dataclass
class _TraceSink:
    """Collects JSON-lines trace records for one trial."""

    lines: list[str] = field(default_factory=list)

    def write(self, record: dict) -> None:
        self.lines.append(json.dumps(record, sort_keys=True))

    def dump(self) -> str:
        return "\n".join(self.lines) + "\n"


def run_trial(
    scene: sc.Scene,
    target_id: str,
    mode: str,
    traj: TrajectoryParams,
    config: ad.AdapterConfig,
    seed: int,
    trace: _TraceSink | None = None,
) -> TrialResult:
    """One scripted selection trial; mode is 'adaptive' or a technique name.

    The pointer starts aimed at the scene center (the ready direction) and
    rotates toward the active technique's aim point for the designated
    target at constant angular speed with additive tremor, triggering after
    the dwell period of continuous correct highlight.
    """
    target = scene.by_id(target_id)
    if not target.selectable:
        raise ValueError(f"target {target_id!r} is not selectable")
    if mode != "adaptive" and mode not in config.techniques:
        raise ValueError(f"mode must be 'adaptive' or one of {config.techniques}")

    rng = np.random.default_rng(seed)
    dt = 1.0 / traj.frame_rate
    controller = np.asarray(CONTROLLER_POSITION, dtype=float)
    hmd = np.asarray(HMD_POSITION, dtype=float)
    positions = np.array([t.position for t in scene.targets])
    ready = geo.normalize(positions.mean(axis=0) - controller)
    direction = ready.copy()

    adapter_state = ad.AdapterState.initial(config)
    current = config.initial_technique if mode == "adaptive" else mode
    tech_states = {k: tq.TechniqueState(kind=k) for k in config.techniques}
    cursor_cache = tq.RaycursorCellCache()

    rotational = 0.0
    translational = 0.0
    errors = 0
    switches: list[tuple[float, str, str]] = []
    highlight_since: float | None = None
    # Lateral repositioning bookkeeping for occluded fixed-technique trials.
    reposition_step = 0
    # Set once the pointer sits on the aim center without the highlight
    # landing on the target; the pointer then re-aims at the target itself.
    corrective = False

    frames = int(TRIAL_TIMEOUT * traj.frame_rate)
    t = 0.0
    for frame_no in range(frames):
        t = frame_no * dt
        tremored = _perturb(direction, traj.tremor_sigma, rng)
        trackpad_delta = 0.0
        pointer = sc.PointerState(
            controller_position=controller.copy(),
            pointing_direction=tremored,
            hmd_position=hmd.copy(),
            hmd_forward=np.asarray(HMD_FORWARD, dtype=float),
            trigger=False,
            trackpad_delta=0.0,
            timestamp=t,
        )
        ctx = sc.extract_context(
            scene, pointer, arm=config.arm, r_c=config.r_c, dominant=config.dominant
        )
        regions = {
            k: tq.regions_for(k, ctx, cursor_cache if k == "RayCursor" else None)
            for k in config.techniques
        }

        decision = None
        if mode == "adaptive":
            decision, adapter_state = ad.step(ctx, regions, config, adapter_state)
            if decision.switched:
                switches.append((t, current, decision.new_technique))
                current = decision.new_technique
                corrective = False
        state = tech_states[current]

        # RayCursor depth control: swipe toward the designated target's depth.
        if current == "RayCursor":
            record = next((r for r in ctx.targets if r.id == target_id), None)
            if record is not None:
                gap = float(record.depth) - state.cursor_depth
                step_m = min(abs(gap), traj.depth_speed * dt)
                if abs(gap) > 1e-3:
                    trackpad_delta = math.copysign(step_m, gap) / 0.5
                    pointer = replace(pointer, trackpad_delta=trackpad_delta)

        hit, tech_states[current] = tq.highlight(state, ctx, pointer)

        if trace is not None:
            rec = {
                "type": "frame",
                "t": t,
                "pointer": {
                    "position": [float(x) for x in controller],
                    "direction": [float(x) for x in tremored],
                    "trackpad_delta": float(trackpad_delta),
                },
                "current": current,
                "highlight": hit,
            }
            if decision is not None:
                rec["optimal"] = decision.optimal
                rec["switched"] = decision.switched
                rec["scores"] = {
                    k: round(v["overall"], 12) for k, v in decision.scores.items()
                }
            trace.write(rec)

        if hit == target_id:
            if highlight_since is None:
                highlight_since = t
            elif t - highlight_since >= traj.dwell:
                return TrialResult(
                    success=True,
                    selection_time=t + dt,
                    translational_movement=translational,
                    rotational_movement=rotational,
                    error_count=errors,
                    switches=tuple(switches),
                    final_technique=current,
                    timeout=False,
                    frames=frame_no + 1,
                )
        else:
            if highlight_since is not None and t - highlight_since >= traj.dwell:
                # The dwell elapsed but the highlight slipped off: a missed
                # trigger on whatever is highlighted now.
                errors += 1
            highlight_since = None

        goal = _aim_direction(ctx, regions[current], target)
        if not corrective and hit != target_id:
            gap_deg = math.degrees(
                math.acos(float(np.clip(np.dot(direction, goal), -1.0, 1.0)))
            )
            if gap_deg < 1.0 and t >= traj.reaction_delay:
                corrective = True
        if corrective:
            goal = geo.normalize(np.asarray(target.position) - controller)
        visible = any(
            r.id == target_id and r.visible for r in ctx.targets
        )
        if (
            mode != "adaptive"
            and current in ("RayCasting", "StickyRay")
            and not visible
        ):
            # Fixed-technique trials cannot switch away from an occluded
            # target; mimic the user stepping sideways until it reappears.
            reposition_step += 1
            offset = 0.3 * dt * (1 if reposition_step % 400 < 200 else -1)
            controller = controller + np.array([offset, 0.0, 0.0])
            hmd = hmd + np.array([offset, 0.0, 0.0])
            translational += abs(offset)
        if t >= traj.reaction_delay:
            new_dir = _rotate_toward(direction, goal, traj.angular_speed * dt)
            rotational += math.degrees(
                math.acos(float(np.clip(np.dot(new_dir, direction), -1.0, 1.0)))
            )
            direction = new_dir

    return TrialResult(
        success=False,
        selection_time=TRIAL_TIMEOUT,
        translational_movement=translational,
        rotational_movement=rotational,
        error_count=errors,
        switches=tuple(switches),
        final_technique=current,
        timeout=True,
        frames=frames,
    )


# --- batches ----------------------------------------------------------------

SUMMARY_COLUMNS = (
    "trial",
    "environment",
    "target_size",
    "repetition",
    "mode",
    "seed",
    "success",
    "timeout",
    "selection_time",
    "rotational_movement",
    "translational_movement",
    "error_count",
    "switch_count",
    "final_technique",
)


@dataclass(frozen=True)
class BatchConfig:
    environments: tuple[str, ...] = ("sparse", "dense", "flat", "deep")
    target_sizes: tuple[float, ...] = (2.5, 0.5)
    repetitions: int = 8
    modes: tuple[str, ...] = ("adaptive",)
    base_seed: int = 0
    preset: str = "study"
    trajectory: TrajectoryParams = field(default_factory=TrajectoryParams)

    @staticmethod
    def from_dict(doc: dict) -> "BatchConfig":
        kwargs = {}
        plain = {
            "environments": tuple,
            "target_sizes": tuple,
            "repetitions": int,
            "modes": tuple,
            "base_seed": int,
            "preset": str,
        }
        for key, cast in plain.items():
            if key in doc:
                kwargs[key] = cast(doc[key])
        if "trajectory" in doc:
            kwargs["trajectory"] = TrajectoryParams(**doc["trajectory"])
        unknown = set(doc) - set(plain) - {"trajectory"}
        if unknown:
            raise ValueError(f"unknown batch config keys: {sorted(unknown)}")
        return BatchConfig(**kwargs)


def trace_header(
    trial_id: str,
    config: ad.AdapterConfig,
    *,
    preset: str,
    scene: sc.Scene,
    target_id: str,
    mode: str,
    seed: int,
    traj: TrajectoryParams,
) -> dict:
    """Header record identifying a trace and everything needed to replay it."""
    return {
        "type": "header",
        "v": 1,
        "trial": trial_id,
        "config_hash": config.hash(),
        "preset": preset,
        "scene": sc.scene_to_dict(scene),
        "target_id": target_id,
        "mode": mode,
        "seed": seed,
        "trajectory": {
            "angular_speed": traj.angular_speed,
            "tremor_sigma": traj.tremor_sigma,
            "dwell": traj.dwell,
            "frame_rate": traj.frame_rate,
            "depth_speed": traj.depth_speed,
        },
    }


def _trial_seed(base: int, env: str, size: float, rep: int, mode: str) -> int:
    """Stable per-trial seed derived from the batch coordinates."""
    key = f"{base}|{env}|{size}|{rep}|{mode}"
    digest = hashlib.sha256(key.encode()).digest()
    return int.from_bytes(digest[:4], "big") % (2**31)


def run_batch(
    batch: BatchConfig, config: ad.AdapterConfig, out_dir=None
) -> list[dict]:
    """Every (environment, size, repetition, mode) trial; optionally persisted.

    Returns summary rows; when out_dir is given, writes summary.csv, one
    JSONL trace per trial under traces/, and the scene snapshots.
    """
    from pathlib import Path

    rows: list[dict] = []
    traces: dict[str, str] = {}
    scenes: dict[str, sc.Scene] = {}
    trial_no = 0
    for env in batch.environments:
        for size in batch.target_sizes:
            for rep in range(batch.repetitions):
                seed = _trial_seed(batch.base_seed, env, size, rep, "scene")
                spec = environment_spec(env, size, seed)
                scene, target_id = generate_environment(spec)
                scene_key = f"{env}_{size}_{rep}"
                scenes[scene_key] = scene
                for mode in batch.modes:
                    trial_id = f"trial_{trial_no:04d}"
                    trial_no += 1
                    tseed = _trial_seed(batch.base_seed, env, size, rep, mode)
                    sink = _TraceSink()
                    sink.write(
                        trace_header(
                            trial_id,
                            config,
                            preset=batch.preset,
                            scene=scene,
                            target_id=target_id,
                            mode=mode,
                            seed=tseed,
                            traj=batch.trajectory,
                        )
                    )
                    result = run_trial(
                        scene, target_id, mode, batch.trajectory, config, tseed, sink
                    )
                    traces[trial_id] = sink.dump()
                    rows.append(
                        {
                            "trial": trial_id,
                            "environment": env,
                            "target_size": size,
                            "repetition": rep,
                            "mode": mode,
                            "seed": tseed,
                            "success": int(result.success),
                            "timeout": int(result.timeout),
                            "selection_time": round(result.selection_time, 6),
                            "rotational_movement": round(result.rotational_movement, 4),
                            "translational_movement": round(
                                result.translational_movement, 4
                            ),
                            "error_count": result.error_count,
                            "switch_count": len(result.switches),
                            "final_technique": result.final_technique,
                        }
                    )
    rows.sort(key=lambda r: r["trial"])
    if out_dir is not None:
        out = Path(out_dir)
        (out / "traces").mkdir(parents=True, exist_ok=True)
        (out / "scenes").mkdir(parents=True, exist_ok=True)
        with open(out / "summary.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
        for trial_id, payload in traces.items():
            (out / "traces" / f"{trial_id}.jsonl").write_text(payload)
        for key, scene in scenes.items():
            sc.save_scene(scene, out / "scenes" / f"{key}.json")
    return rows


def summary_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS)
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
