"""Scene model, interaction-cone filtering and per-frame context extraction."""

from __future__ import annotations

import json
import math
import weakref
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from . import geometry as geo
from .geometry import AngularPoint, Frame, GeometryError, Polygon2D

SCENE_VERSION = 1

GRAVITY = np.array([0.0, -9.81, 0.0])


class SceneFormatError(ValueError):
    """Scene document violates the schema; message carries the JSON path."""


@dataclass(frozen=True)
class Target:
    """A selectable primitive in the scene."""

    id: str
    shape: str
    position: np.ndarray  # (3,) meters
    rotation: np.ndarray  # (4,) quaternion (w, x, y, z)
    scale: np.ndarray  # (3,) positive
    selectable: bool = True

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=float))

    def bounding_radius(self) -> float:
        return geo.bounding_radius(self.shape, self.scale)


@dataclass(frozen=True)
class Scene:
    targets: tuple[Target, ...]

    def __post_init__(self):
        ids = [t.id for t in self.targets]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise SceneFormatError(f"duplicate target id(s): {', '.join(dup)}")

    def by_id(self, target_id: str) -> Target:
        for t in self.targets:
            if t.id == target_id:
                return t
        raise KeyError(target_id)


@dataclass(frozen=True)
class PointerState:
    """Controller + head pose for one frame."""

    controller_position: np.ndarray
    pointing_direction: np.ndarray
    hmd_position: np.ndarray
    hmd_forward: np.ndarray
    trigger: bool = False
    trackpad_delta: float = 0.0
    timestamp: float = 0.0

    def __post_init__(self):
        for name in ("controller_position", "pointing_direction", "hmd_position", "hmd_forward"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        for name in ("pointing_direction", "hmd_forward"):
            v = getattr(self, name)
            if abs(np.linalg.norm(v) - 1.0) > 1e-6:
                object.__setattr__(self, name, geo.normalize(v))

    def frame(self) -> Frame:
        return geo.controller_frame(self.controller_position, self.pointing_direction)


@dataclass(frozen=True)
class ArmSegment:
    length: float  # m
    mass: float  # kg
    com_offset: float  # m from proximal joint

    def __post_init__(self):
        if not (0 < self.com_offset <= self.length):
            raise ValueError("com_offset must be in (0, length]")


@dataclass(frozen=True)
class ArmModel:
    """Average-adult arm segment data used by the comfort model."""

    upper_arm: ArmSegment = field(default_factory=lambda: ArmSegment(0.33, 2.1, 0.132))
    forearm: ArmSegment = field(default_factory=lambda: ArmSegment(0.269, 1.2, 0.117))
    hand: ArmSegment = field(default_factory=lambda: ArmSegment(0.191, 0.4, 0.07))

    @property
    def total_mass(self) -> float:
        return self.upper_arm.mass + self.forearm.mass + self.hand.mass

    @property
    def reach(self) -> float:
        return self.upper_arm.length + self.forearm.length


@dataclass(frozen=True)
class ArmPosture:
    shoulder: np.ndarray
    elbow: np.ndarray
    hand: np.ndarray
    clamped: bool = False


@dataclass(frozen=True)
class TargetContext:
    """Per-target extraction result for one frame."""

    id: str
    outline: Polygon2D  # occlusion- and cone-clipped
    centroid: AngularPoint | None  # None when the outline is empty
    position_3d: np.ndarray  # controller-relative meters
    angular_distance: float  # degrees from pointing axis to the centroid
    depth: float  # meters from controller to target center

    @property
    def visible(self) -> bool:
        return self.centroid is not None


@dataclass(frozen=True)
class ContextFrame:
    targets: tuple[TargetContext, ...]
    posture: ArmPosture
    pointer: PointerState
    frame: Frame
    cone_radius: float


# --- scene document --------------------------------------------------------


def _expect(doc, key, types, path):
    if key not in doc:
        raise SceneFormatError(f"{path}.{key}: missing")
    val = doc[key]
    if not isinstance(val, types):
        raise SceneFormatError(f"{path}.{key}: expected {types}, got {type(val).__name__}")
    return val


def _vector(doc, key, length, path):
    val = _expect(doc, key, list, path)
    if len(val) != length or not all(isinstance(x, (int, float)) for x in val):
        raise SceneFormatError(f"{path}.{key}: expected {length} numbers")
    return np.asarray(val, dtype=float)


def scene_from_dict(doc: dict) -> Scene:
    if not isinstance(doc, dict):
        raise SceneFormatError("$: expected an object")
    version = _expect(doc, "version", int, "$")
    if version != SCENE_VERSION:
        raise SceneFormatError(f"$.version: unsupported version {version}")
    raw_targets = _expect(doc, "targets", list, "$")
    targets = []
    for i, t in enumerate(raw_targets):
        path = f"$.targets[{i}]"
        if not isinstance(t, dict):
            raise SceneFormatError(f"{path}: expected an object")
        tid = _expect(t, "id", str, path)
        shape = _expect(t, "shape", str, path)
        if shape not in geo.SHAPES:
            raise SceneFormatError(f"{path}.shape: unknown shape {shape!r}")
        position = _vector(t, "position", 3, path)
        rotation = _vector(t, "rotation_quaternion", 4, path)
        scale = _vector(t, "scale", 3, path)
        if np.any(scale <= 0):
            raise SceneFormatError(f"{path}.scale: components must be > 0")
        selectable = bool(t.get("selectable", True))
        targets.append(
            Target(id=tid, shape=shape, position=position, rotation=rotation,
                   scale=scale, selectable=selectable)
        )
    return Scene(targets=tuple(targets))


def scene_to_dict(scene: Scene) -> dict:
    return {
        "version": SCENE_VERSION,
        "targets": [
            {
                "id": t.id,
                "shape": t.shape,
                "position": list(t.position),
                "rotation_quaternion": list(t.rotation),
                "scale": list(t.scale),
                "selectable": t.selectable,
            }
            for t in scene.targets
        ],
    }


def load_scene(path_or_file) -> Scene:
    if hasattr(path_or_file, "read"):
        doc = json.load(path_or_file)
    else:
        with open(path_or_file) as fh:
            doc = json.load(fh)
    return scene_from_dict(doc)


def save_scene(scene: Scene, path) -> None:
    with open(path, "w") as fh:
        json.dump(scene_to_dict(scene), fh, indent=1)
        fh.write("\n")


# --- posture ---------------------------------------------------------------

SHOULDER_DROP = 0.22  # m below the HMD
SHOULDER_LATERAL = 0.19  # m toward the dominant hand


def estimate_posture(
    pointer: PointerState, arm: ArmModel, dominant: str = "right"
) -> ArmPosture:
    """Closed-form two-link arm posture from HMD and controller poses.

    The shoulder sits at a fixed offset from the HMD; the elbow is the
    two-link solution with the hinge plane vertical and the elbow on the
    lower branch.  An out-of-reach controller clamps the hand onto the reach
    sphere and flags the posture.
    """
    head_fwd = pointer.hmd_forward - np.dot(pointer.hmd_forward, geo.WORLD_UP) * geo.WORLD_UP
    if np.linalg.norm(head_fwd) < geo.EPS:
        head_fwd = np.array([0.0, 0.0, 1.0])
    head_fwd = geo.normalize(head_fwd)
    lateral = np.cross(head_fwd, geo.WORLD_UP)  # +x when facing +z: right side
    lateral = -lateral if dominant == "right" else lateral
    # cross(z-forward, y-up) = -x, so negate for the right hand.
    shoulder = (
        pointer.hmd_position
        - SHOULDER_DROP * geo.WORLD_UP
        + SHOULDER_LATERAL * lateral
    )

    hand = pointer.controller_position.copy()
    l1, l2 = arm.upper_arm.length, arm.forearm.length
    d_vec = hand - shoulder
    d = float(np.linalg.norm(d_vec))
    clamped = False
    if d < geo.EPS:
        hand = shoulder + np.array([0.0, 0.0, abs(l1 - l2) + 1e-6])
        d_vec = hand - shoulder
        d = float(np.linalg.norm(d_vec))
        clamped = True
    if d > l1 + l2:
        hand = shoulder + d_vec * ((l1 + l2) / d)
        d_vec = hand - shoulder
        d = l1 + l2
        clamped = True
    elif d < abs(l1 - l2):
        hand = shoulder + d_vec * (abs(l1 - l2) / d)
        d_vec = hand - shoulder
        d = abs(l1 - l2)
        clamped = True

    u = d_vec / d
    # Hinge plane: vertical plane through shoulder and hand.
    n = np.cross(u, geo.WORLD_UP)
    if np.linalg.norm(n) < 1e-6:
        n = np.cross(u, np.array([0.0, 0.0, 1.0]))
    n = geo.normalize(n)
    w = np.cross(n, u)
    if np.dot(w, geo.WORLD_UP) > 0:
        w = -w  # elbow drops below the shoulder-hand line
    cos_a = (l1 * l1 + d * d - l2 * l2) / (2.0 * l1 * d)
    cos_a = min(1.0, max(-1.0, cos_a))
    sin_a = math.sqrt(max(0.0, 1.0 - cos_a * cos_a))
    elbow = shoulder + l1 * (cos_a * u + sin_a * w)
    return ArmPosture(shoulder=shoulder, elbow=elbow, hand=hand, clamped=clamped)


# --- context extraction ----------------------------------------------------


def _outline_intersects_disk(outline: Polygon2D, r_c: float) -> bool:
    """True when the projected outline touches the cone disk around the origin."""
    verts = outline.vertices
    if len(verts) == 0:
        return False
    if _kernels.HAVE_NUMBA:
        if _kernels.distance_to_boundary(verts) <= r_c:
            return True
        return len(verts) >= 3 and bool(_kernels.point_in_polygon_k(0.0, 0.0, verts))
    radii = np.linalg.norm(verts, axis=1)
    if np.min(radii) <= r_c:
        return True
    if len(verts) >= 3 and geo.point_in_polygon((0.0, 0.0), outline):
        return True
    # Edge may pass through the disk even with all vertices outside.
    a = verts
    b = np.roll(verts, -1, axis=0)
    e = b - a
    ee = np.einsum("ij,ij->i", e, e)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.clip(-np.einsum("ij,ij->i", a, e) / ee, 0.0, 1.0)
    t[~np.isfinite(t)] = 0.0
    closest = a + t[:, None] * e
    return bool(np.min(np.linalg.norm(closest, axis=1)) <= r_c)


def raw_outlines(scene: Scene, frame: Frame) -> dict[str, Polygon2D]:
    """Unclipped silhouette outline per target (empty when behind)."""
    return {
        t.id: geo.project_primitive(t.shape, t.position, t.rotation, t.scale, frame)
        for t in scene.targets
    }


def filter_interaction_space(
    scene: Scene, pointer: PointerState, r_c: float,
    outlines: dict[str, Polygon2D] | None = None,
) -> list[Target]:
    """Targets whose projected outline intersects the cone disk."""
    if not 0 < r_c < 90:
        raise ValueError("r_c must lie in (0, 90) degrees")
    frame = pointer.frame()
    if outlines is None:
        outlines = raw_outlines(scene, frame)
    return [
        t for t in scene.targets
        if not outlines[t.id].is_empty and _outline_intersects_disk(outlines[t.id], r_c)
    ]


def _relevant_targets(
    scene: Scene, frame: Frame, r_c: float
) -> tuple[np.ndarray, np.ndarray]:
    """Conservative cull masks: (cone candidates, candidates plus occluders).

    A target is a cone candidate when its bounding cone can reach the disk;
    anything else matters only if its bounding cone overlaps a candidate's,
    since occlusion clipping needs overlapping silhouettes.  Bounds use
    great-circle angles, which never exceed the control-space distance.
    """
    pos = np.array([t.position for t in scene.targets])
    rel = pos - frame.position
    d = np.linalg.norm(rel, axis=1)
    rad = np.array([t.bounding_radius() for t in scene.targets])
    safe_d = np.maximum(d, geo.EPS)
    dirs = rel / safe_d[:, None]
    ang = np.degrees(np.arccos(np.clip(dirs @ frame.forward, -1.0, 1.0)))
    ang_r = np.degrees(np.arcsin(np.clip(rad / safe_d, 0.0, 1.0)))
    ang_r[rad >= d] = 180.0
    cand = ang - ang_r <= r_c + 0.5
    keep = cand.copy()
    rest = np.flatnonzero(~cand)
    if cand.any() and len(rest):
        sep = np.degrees(
            np.arccos(np.clip(dirs[rest] @ dirs[cand].T, -1.0, 1.0))
        )
        overlaps = (sep <= ang_r[rest][:, None] + ang_r[cand][None, :] + 0.5).any(axis=1)
        keep[rest[overlaps]] = True
    return cand, keep


_scene_mesh_cache: dict[int, tuple] = {}


def _scene_world_meshes(scene: Scene) -> dict[str, tuple[dict[str, int], np.ndarray]]:
    """World-space mesh vertices per shape group, cached per scene.

    The transform to world space depends only on the static scene, so it is
    computed once and reused across frames.  Entries evict when the scene is
    garbage collected.
    """
    key = id(scene)
    entry = _scene_mesh_cache.get(key)
    if entry is not None and entry[0]() is scene:
        return entry[1]
    by_shape: dict[str, list[Target]] = {}
    for t in scene.targets:
        by_shape.setdefault(t.shape, []).append(t)
    groups: dict[str, tuple[dict[str, int], np.ndarray]] = {}
    for shape, ts in by_shape.items():
        mesh = geo.unit_mesh(shape)
        scales = np.array([t.scale for t in ts])
        rots = np.stack([geo.quat_to_matrix(t.rotation) for t in ts])
        pos = np.array([t.position for t in ts])
        scaled = mesh[None, :, :] * scales[:, None, :]
        world = np.einsum("kmj,kij->kmi", scaled, rots) + pos[:, None, :]
        groups[shape] = ({t.id: k for k, t in enumerate(ts)}, world)
    ref = weakref.ref(scene, lambda _r, _k=key: _scene_mesh_cache.pop(_k, None))
    _scene_mesh_cache[key] = (ref, groups)
    return groups


def _batched_outlines(
    targets: list[Target],
    frame: Frame,
    world_meshes: dict[str, tuple[dict[str, int], np.ndarray]] | None = None,
) -> dict[str, Polygon2D]:
    """Silhouette outlines for many targets with shared projection math.

    Matches project_primitive per target, but transforms and projects each
    shape group in one vectorized pass before hulling.
    """
    out: dict[str, Polygon2D] = {}
    by_shape: dict[str, list[Target]] = {}
    for t in targets:
        by_shape.setdefault(t.shape, []).append(t)
    basis = np.column_stack([frame.right, frame.up, frame.forward])
    for shape, ts in by_shape.items():
        if world_meshes is not None:
            id_to_row, world_all = world_meshes[shape]
            world = world_all[[id_to_row[t.id] for t in ts]]
        else:
            mesh = geo.unit_mesh(shape)
            scales = np.array([t.scale for t in ts])
            rots = np.stack([geo.quat_to_matrix(t.rotation) for t in ts])
            pos = np.array([t.position for t in ts])
            scaled = mesh[None, :, :] * scales[:, None, :]
            world = np.einsum("kmj,kij->kmi", scaled, rots) + pos[:, None, :]
        local = (world - frame.position) @ basis
        x = local[..., 0]
        y = local[..., 1]
        z = local[..., 2]
        hp = np.hypot(x, z)
        if np.any(np.hypot(hp, y) < geo.EPS):
            raise geo.GeometryError("point coincides with controller origin")
        h = np.degrees(np.arctan2(x, z))
        v = np.degrees(np.arctan2(y, hp))
        valid = z > geo.EPS
        all_valid = valid.all(axis=1)
        if _kernels.HAVE_NUMBA and all_valid.any():
            rows = np.nonzero(all_valid)[0]
            order = np.argsort(h[rows] + v[rows] * 1j, axis=1)
            spts = np.empty((len(rows), h.shape[1], 2))
            spts[..., 0] = np.take_along_axis(h[rows], order, axis=1)
            spts[..., 1] = np.take_along_axis(v[rows], order, axis=1)
            flat, offsets = _kernels.hulls_batch(spts)
            for j, k in enumerate(rows):
                idx = flat[offsets[j] : offsets[j + 1]]
                if len(idx) == 0:
                    out[ts[k].id] = Polygon2D(spts[j][:1])
                else:
                    out[ts[k].id] = Polygon2D(spts[j][idx])
        for k, t in enumerate(ts):
            if _kernels.HAVE_NUMBA and all_valid[k]:
                continue
            vk = valid[k]
            if not vk.any():
                out[t.id] = Polygon2D.empty()
                continue
            pts = np.column_stack([h[k][vk], v[k][vk]]) if not vk.all() else (
                np.column_stack([h[k], v[k]])
            )
            out[t.id] = geo.convex_hull(pts)
    return out


def extract_context(
    scene: Scene,
    pointer: PointerState,
    arm: ArmModel | None = None,
    r_c: float = 20.0,
    dominant: str = "right",
) -> ContextFrame:
    """Full per-frame extraction: project, occlusion-clip, cone-clip, posture.

    Occluders are targets whose center is strictly nearer to the controller,
    including targets outside the cone; ties break by target id.  Fully
    occluded targets keep an empty outline but retain their 3D position.
    """
    import shapely
    from shapely import STRtree

    if not 0 < r_c < 90:
        raise ValueError("r_c must lie in (0, 90) degrees")
    arm = arm or ArmModel()
    frame = pointer.frame()
    if scene.targets:
        cand_mask, keep_mask = _relevant_targets(scene, frame, r_c)
    else:
        cand_mask = keep_mask = np.zeros(0, dtype=bool)
    kept = [t for t, k in zip(scene.targets, keep_mask) if k]
    outlines = _batched_outlines(kept, frame, _scene_world_meshes(scene))
    in_cone = [
        t
        for t, c in zip(scene.targets, cand_mask)
        if c and not outlines[t.id].is_empty
        and _outline_intersects_disk(outlines[t.id], r_c)
    ]
    if kept:
        kept_depths = np.linalg.norm(
            np.array([t.position for t in kept]) - frame.position, axis=1
        )
    else:
        kept_depths = np.zeros(0)
    depths = {t.id: float(d) for t, d in zip(kept, kept_depths)}
    order_key = {t.id: (depths[t.id], t.id) for t in kept}
    solid = [t for t in kept if not outlines[t.id].is_empty]
    if solid:
        ring_coords = [outlines[t.id].vertices for t in solid]
        ring_idx = np.repeat(
            np.arange(len(solid)), [len(r) for r in ring_coords]
        )
        sh_polys = shapely.polygons(
            shapely.linearrings(np.concatenate(ring_coords), indices=ring_idx)
        )
    else:
        sh_polys = np.empty(0, dtype=object)
    sh_outlines = {t.id: sh_polys[i] for i, t in enumerate(solid)}
    tree = STRtree(sh_polys)
    in_cone_solid = [t for t in in_cone if t.id in sh_outlines]
    subject_polys = np.array([sh_outlines[t.id] for t in in_cone_solid], dtype=object)
    occluder_lists: dict[str, list] = {t.id: [] for t in in_cone}
    if len(subject_polys):
        areas = shapely.area(sh_polys)
        qi, ti = tree.query(subject_polys, predicate="intersects")
        for a, b in zip(qi, ti):
            subject_t = in_cone_solid[a]
            other = solid[b]
            if other.id != subject_t.id and order_key[other.id] < order_key[subject_t.id]:
                occluder_lists[subject_t.id].append((-areas[b], other.id, sh_outlines[other.id]))
        # Largest occluders first so fully covered subjects empty early.
        for lst in occluder_lists.values():
            lst.sort(key=lambda e: e[:2])
            lst[:] = [e[2] for e in lst]
    needs_disk = {}
    complex_ids = []
    if in_cone:
        vert_lists = [outlines[t.id].vertices for t in in_cone]
        all_verts = np.concatenate(vert_lists)
        r_sq = np.einsum("ij,ij->i", all_verts, all_verts)
        offsets = np.concatenate(
            [[0], np.cumsum([len(v) for v in vert_lists])[:-1]]
        )
        max_r_sq = np.maximum.reduceat(r_sq, offsets)
        for t, m in zip(in_cone, max_r_sq):
            nd = bool(m > r_c * r_c)
            needs_disk[t.id] = nd
            if nd or occluder_lists[t.id]:
                complex_ids.append(t.id)
    clipped_by_id = {t.id: outlines[t.id] for t in in_cone}
    if complex_ids:
        arr = np.array([sh_outlines[i] for i in complex_ids], dtype=object)
        occ = [occluder_lists[i] for i in complex_ids]
        counts = np.array([len(o) for o in occ])
        alive = counts > 0
        for k in range(int(counts.max(initial=0))):
            mask = (counts > k) & alive
            rows = np.flatnonzero(mask)
            if not len(rows):
                break
            others = np.array([occ[j][k] for j in rows], dtype=object)
            res = shapely.difference(arr[rows], others)
            arr[rows] = res
            emptied = shapely.is_empty(res)
            if emptied.any():
                alive[rows[emptied]] = False
        dmask = np.array([needs_disk[i] for i in complex_ids])
        if dmask.any():
            disk_sh = geo.to_shapely(geo.disk_polygon(r_c))
            arr[dmask] = shapely.intersection(arr[dmask], disk_sh)
        for i, poly in zip(complex_ids, geo.from_shapely_batch(arr)):
            clipped_by_id[i] = poly
    records = []
    basis = np.column_stack([frame.right, frame.up, frame.forward])
    for t in in_cone:
        clipped = clipped_by_id[t.id]
        if clipped.is_empty:
            cen, ang = None, float("inf")
            clipped = Polygon2D.empty()
        else:
            cen = geo.centroid(clipped)
            ang = cen.radius()
        rel = (t.position - frame.position) @ basis
        records.append(
            TargetContext(
                id=t.id,
                outline=clipped,
                centroid=cen,
                position_3d=rel,
                angular_distance=ang,
                depth=depths[t.id],
            )
        )
    posture = estimate_posture(pointer, arm, dominant)
    return ContextFrame(
        targets=tuple(records),
        posture=posture,
        pointer=pointer,
        frame=frame,
        cone_radius=r_c,
    )
