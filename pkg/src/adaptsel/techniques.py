"""Per-technique activation regions (W, A, box) and runtime highlighting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from . import geometry as geo
from .geometry import AngularPoint, Polygon2D
from .scene import ContextFrame, PointerState

TECHNIQUES = ("RayCasting", "StickyRay", "RayCursor")

TECHNIQUE_COLORS = {
    "RayCasting": "#8a8a8a",
    "StickyRay": "#2b6fd4",
    "RayCursor": "#d43f3f",
}

# RayCursor interaction box: near plane and padding beyond the deepest target.
RAYCURSOR_NEAR = 0.1  # m
RAYCURSOR_DEPTH_PAD = 1.0  # m
RAYCURSOR_LATERAL_PAD = 0.25  # m
SNAP_REENABLE_DELAY = 1.0  # s
CURSOR_SPEED_CAP = 90.0  # deg/s, velocity-scaled transfer cap


@dataclass(frozen=True)
class ActivationRegion:
    """Effective selection region of one target under one technique."""

    target_id: str
    region: Polygon2D
    w: float  # degrees along the pointing path
    a: float  # degrees to the aim center
    box: tuple[float, float, float, float]  # (x1, x2, y1, y2), aim-centered
    aim_center: AngularPoint | None

    @property
    def selectable(self) -> bool:
        return self.aim_center is not None and self.w > 0


def _empty_region(target_id: str) -> ActivationRegion:
    return ActivationRegion(
        target_id=target_id,
        region=Polygon2D.empty(),
        w=0.0,
        a=0.0,
        box=(0.0, 0.0, 0.0, 0.0),
        aim_center=None,
    )


def _movement_axes(aim: AngularPoint) -> tuple[np.ndarray, np.ndarray]:
    """Unit x-axis along origin->aim and the perpendicular y-axis."""
    a = aim.radius()
    if a < 1e-12:
        u = np.array([1.0, 0.0])  # pointer already at the aim center
    else:
        u = aim.as_array() / a
    return u, np.array([-u[1], u[0]])


def _line_hits(
    verts: np.ndarray, ox: float, oy: float, dx: float, dy: float
) -> tuple[float, float] | None:
    """First/last crossing parameters of one line with the region boundary."""
    if _kernels.HAVE_NUMBA:
        lo, hi, count = _kernels.line_span(ox, oy, dx, dy, verts)
        if count < 2 or hi - lo <= 1e-7:
            return None
        return float(lo), float(hi)
    a = verts - np.array([ox, oy])
    e = np.concatenate([a[1:], a[:1]]) - a
    denom = dx * e[:, 1] - dy * e[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (a[:, 0] * e[:, 1] - a[:, 1] * e[:, 0]) / denom
        s = (a[:, 0] * dy - a[:, 1] * dx) / denom
    ok = (np.abs(denom) > geo.EPS) & (s >= -1e-12) & (s < 1.0 - 1e-12) & np.isfinite(t)
    if np.count_nonzero(ok) < 2:
        return None
    tok = t[ok]
    lo, hi = float(tok.min()), float(tok.max())
    if hi - lo <= 1e-7:
        return None
    return lo, hi


def _region_from_polygon(target_id: str, region: Polygon2D) -> ActivationRegion:
    """W, A and the movement-aligned box from a region polygon."""
    if region.is_empty:
        return _empty_region(target_id)
    try:
        aim = geo.centroid(region)
    except geo.GeometryError:
        return _empty_region(target_id)
    a = aim.radius()
    u, v = _movement_axes(aim)
    verts = region.vertices
    hit = _line_hits(verts, 0.0, 0.0, u[0], u[1])
    if hit is not None:
        x1, x2 = hit[0] - a, hit[1] - a
    else:
        # Thin sliver missed by the movement line: fall back to the parallel
        # line through the aim center.
        hit = _line_hits(verts, aim.h, aim.v, u[0], u[1])
        if hit is None:
            return _empty_region(target_id)
        x1, x2 = hit
    hit = _line_hits(verts, aim.h, aim.v, v[0], v[1])
    if hit is not None:
        y2, y1 = hit
    else:
        y1 = y2 = 0.0
    return ActivationRegion(
        target_id=target_id,
        region=region,
        w=x2 - x1,
        a=a,
        box=(x1, x2, y1, y2),
        aim_center=aim,
    )


def _regions_from_polygons(
    ids: list[str], regions: list[Polygon2D]
) -> list[ActivationRegion]:
    """Batched _region_from_polygon over parallel id/region lists."""
    if not _kernels.HAVE_NUMBA or not ids:
        return [_region_from_polygon(i, r) for i, r in zip(ids, regions)]
    counts = [len(r.vertices) for r in regions]
    offsets = np.concatenate([[0], np.cumsum(counts)])
    if offsets[-1] == 0:
        return [_empty_region(i) for i in ids]
    flat = np.concatenate([r.vertices for r in regions if len(r.vertices)])
    vals, ok = _kernels.region_metrics(
        np.ascontiguousarray(flat, dtype=float), offsets.astype(np.int64)
    )
    out = []
    for k, (tid, region) in enumerate(zip(ids, regions)):
        if not ok[k]:
            out.append(_empty_region(tid))
            continue
        a, x1, x2, y1, y2, cx, cy = (float(v) for v in vals[k])
        out.append(
            ActivationRegion(
                target_id=tid,
                region=region,
                w=x2 - x1,
                a=a,
                box=(x1, x2, y1, y2),
                aim_center=AngularPoint(cx, cy),
            )
        )
    return out


def raycast_regions(ctx: ContextFrame) -> list[ActivationRegion]:
    """RayCasting: the occlusion-clipped outline itself is the region."""
    return _regions_from_polygons(
        [t.id for t in ctx.targets], [t.outline for t in ctx.targets]
    )


def stickyray_regions(ctx: ContextFrame) -> list[ActivationRegion]:
    """StickyRay: 2D Voronoi cells of the visible outline centroids."""
    visible = [t for t in ctx.targets if t.visible]
    out: dict[str, ActivationRegion] = {t.id: _empty_region(t.id) for t in ctx.targets}
    if visible:
        sites = [t.centroid for t in visible]
        cells = geo.voronoi_cells_2d(sites, ctx.cone_radius)
        for reg in _regions_from_polygons([t.id for t in visible], cells):
            out[reg.target_id] = reg
    return [out[t.id] for t in ctx.targets]


def raycursor_box(ctx: ContextFrame) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned controller-local box bounding the depth-cursor workspace.

    Depth runs from just past the controller to the farthest target plus a
    pad. Laterally the box is the cone-enclosing extent intersected with the
    padded extent of the targets themselves, so cells stay anchored to the
    occupied space instead of ballooning toward the cone walls.
    """
    depth = max((float(t.position_3d[2]) for t in ctx.targets), default=RAYCURSOR_NEAR)
    far = max(depth + RAYCURSOR_DEPTH_PAD, RAYCURSOR_NEAR + RAYCURSOR_DEPTH_PAD)
    r = math.tan(math.radians(ctx.cone_radius)) * far
    lo = np.array([-r, -r, RAYCURSOR_NEAR])
    hi = np.array([r, r, far])
    if ctx.targets:
        pos = np.array([t.position_3d for t in ctx.targets])
        lo[:2] = np.maximum(lo[:2], pos[:, :2].min(axis=0) - RAYCURSOR_LATERAL_PAD)
        hi[:2] = np.minimum(hi[:2], pos[:, :2].max(axis=0) + RAYCURSOR_LATERAL_PAD)
        lo = np.minimum(lo, pos.min(axis=0) - 1e-3)
        hi = np.maximum(hi, pos.max(axis=0) + 1e-3)
    return lo, hi


def _project_local(vertices: np.ndarray) -> Polygon2D:
    """Project controller-local points to control space and hull them."""
    z = vertices[:, 2]
    keep = z > geo.EPS
    if not keep.any():
        return Polygon2D.empty()
    v = vertices[keep]
    h = np.degrees(np.arctan2(v[:, 0], v[:, 2]))
    el = np.degrees(np.arctan2(v[:, 1], np.hypot(v[:, 0], v[:, 2])))
    return geo.convex_hull(np.column_stack([h, el]))


class RaycursorCellCache:
    """Caches controller-local 3D Voronoi cells while the scene layout holds.

    Cells depend only on the target positions relative to the controller and
    the clip box; rotation-only pointer motion reuses the cache.
    """

    def __init__(self):
        self._key = None
        self._cells: list[geo.Polyhedron3D] | None = None
        self._adj_key = None
        self._adjacency: tuple[np.ndarray, np.ndarray] | None = None

    def _layout_adjacency(
        self, ids: tuple[str, ...], sites: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray] | None:
        """Delaunay adjacency memoized on the rigid layout of the sites.

        Keyed by the rounded pairwise distance matrix, which is invariant
        under the frame rotation that re-expresses the same world layout, so
        rotation-only pointer motion skips the triangulation rebuild.
        """
        diff = sites[:, None, :] - sites[None, :, :]
        d2 = np.round(np.einsum("ijk,ijk->ij", diff, diff), 6)
        akey = (ids, d2.tobytes())
        if akey != self._adj_key:
            self._adjacency = geo.delaunay_adjacency(sites)
            self._adj_key = akey
        return self._adjacency

    def cells(self, ctx: ContextFrame) -> list[geo.Polyhedron3D]:
        ids = tuple(t.id for t in ctx.targets)
        positions = np.array([t.position_3d for t in ctx.targets])
        lo, hi = raycursor_box(ctx)
        key = (ids, positions.tobytes(), lo.tobytes(), hi.tobytes())
        if key != self._key:
            sites = np.clip(positions, lo + 1e-6, hi - 1e-6)
            adjacency = self._layout_adjacency(ids, sites)
            self._cells = geo.voronoi_cells_3d(sites, lo, hi, adjacency=adjacency)
            self._key = key
        return self._cells


def raycursor_regions(
    ctx: ContextFrame, cache: RaycursorCellCache | None = None
) -> list[ActivationRegion]:
    """RayCursor: projected 3D Voronoi cells over target centers, occlusion-free."""
    if not ctx.targets:
        return []
    cells = (cache or RaycursorCellCache()).cells(ctx)
    counts = np.array([0 if c.is_empty else len(c.vertices) for c in cells])
    offsets = np.concatenate([[0], np.cumsum(counts)])
    if offsets[-1] == 0:
        return [_empty_region(t.id) for t in ctx.targets]
    allv = np.concatenate([c.vertices for c in cells if not c.is_empty])
    x, y, z = allv[:, 0], allv[:, 1], allv[:, 2]
    h = np.degrees(np.arctan2(x, z))
    el = np.degrees(np.arctan2(y, np.hypot(x, z)))
    pts = np.column_stack([h, el])
    valid = z > geo.EPS
    ids, polys = [], []
    empties = {}
    if _kernels.HAVE_NUMBA:
        seg = np.repeat(np.arange(len(counts)), counts)
        keep = valid
        seg_k, pts_k = seg[keep], pts[keep]
        order = np.lexsort((pts_k[:, 1], pts_k[:, 0], seg_k))
        seg_k, pts_k = seg_k[order], np.ascontiguousarray(pts_k[order])
        kept_counts = np.bincount(seg_k, minlength=len(counts))
        kept_offsets = np.concatenate([[0], np.cumsum(kept_counts)])
        live = np.flatnonzero(kept_counts)
        run_offsets = np.concatenate([[0], np.cumsum(kept_counts[live])]).astype(np.int64)
        flat_idx, hull_off = _kernels.hulls_var(pts_k, run_offsets)
        hull_of = {}
        for j, cell_i in enumerate(live):
            base = kept_offsets[cell_i]
            idx = flat_idx[hull_off[j] : hull_off[j + 1]]
            if len(idx) == 0:
                hull_of[cell_i] = Polygon2D(pts_k[base : base + 1])
            else:
                hull_of[cell_i] = Polygon2D(pts_k[base + idx])
        for i, t in enumerate(ctx.targets):
            if i in hull_of:
                ids.append(t.id)
                polys.append(hull_of[i])
            else:
                empties[t.id] = _empty_region(t.id)
    else:
        for t, cell, a, b in zip(ctx.targets, cells, offsets, offsets[1:]):
            keep = valid[a:b]
            if a == b or not keep.any():
                empties[t.id] = _empty_region(t.id)
                continue
            ids.append(t.id)
            polys.append(geo.convex_hull(pts[a:b][keep]))
    made = {r.target_id: r for r in _regions_from_polygons(ids, polys)}
    return [empties.get(t.id) or made[t.id] for t in ctx.targets]


# --- runtime highlight -----------------------------------------------------


@dataclass(frozen=True)
class TechniqueState:
    """Per-session mutable technique state (returned updated, never mutated)."""

    kind: str
    cursor_depth: float = 2.0
    last_trackpad_activity: float = -math.inf
    last_forward: np.ndarray | None = None
    last_time: float | None = None


def _distance_to_outline(outline: Polygon2D) -> float:
    """Angular distance from the origin to the outline (0 when inside)."""
    if geo.point_in_polygon((0.0, 0.0), outline):
        return 0.0
    verts = outline.vertices
    if _kernels.HAVE_NUMBA:
        return float(_kernels.distance_to_boundary(verts))
    a = verts
    b = np.roll(verts, -1, axis=0)
    e = b - a
    ee = np.einsum("ij,ij->i", e, e)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.clip(-np.einsum("ij,ij->i", a, e) / ee, 0.0, 1.0)
    t[~np.isfinite(t)] = 0.0
    closest = a + t[:, None] * e
    return float(np.min(np.linalg.norm(closest, axis=1)))


def _raycast_hit(ctx: ContextFrame) -> str | None:
    """Target whose clipped outline contains the pointing axis; nearest wins."""
    hits = [
        t for t in ctx.targets
        if not t.outline.is_empty and geo.point_in_polygon((0.0, 0.0), t.outline)
    ]
    if not hits:
        return None
    return min(hits, key=lambda t: (t.depth, t.id)).id


def _cursor_transfer(delta: float, angular_speed: float) -> float:
    """Depth change (m) for one swipe unit, gain scaled by controller speed."""
    gain = 0.5 + 2.0 * min(abs(angular_speed), CURSOR_SPEED_CAP) / CURSOR_SPEED_CAP
    return delta * gain


def highlight(
    state: TechniqueState, ctx: ContextFrame, pointer: PointerState
) -> tuple[str | None, TechniqueState]:
    """Highlighted target id under the state's technique, plus updated state."""
    if state.kind == "RayCasting":
        return _raycast_hit(ctx), state
    if state.kind == "StickyRay":
        candidates = [t for t in ctx.targets if not t.outline.is_empty]
        if not candidates:
            return None, state
        best = min(
            candidates, key=lambda t: (_distance_to_outline(t.outline), t.id)
        )
        return best.id, state
    if state.kind != "RayCursor":
        raise ValueError(f"unknown technique {state.kind!r}")

    now = pointer.timestamp
    angular_speed = 0.0
    if state.last_forward is not None and state.last_time is not None:
        dt = now - state.last_time
        if dt > 1e-9:
            dot = float(
                np.clip(np.dot(state.last_forward, pointer.pointing_direction), -1, 1)
            )
            angular_speed = math.degrees(math.acos(dot)) / dt
    depth = state.cursor_depth
    last_activity = state.last_trackpad_activity
    if pointer.trackpad_delta != 0.0:
        depth = max(RAYCURSOR_NEAR, depth + _cursor_transfer(pointer.trackpad_delta, angular_speed))
        last_activity = now
    elif now - last_activity > SNAP_REENABLE_DELAY:
        hit = _raycast_hit(ctx)
        if hit is not None:
            t = next(t for t in ctx.targets if t.id == hit)
            depth = max(RAYCURSOR_NEAR, t.depth)
    cursor = np.array([0.0, 0.0, depth])  # controller-local, on the ray
    best = None
    if ctx.targets:
        best = min(
            ctx.targets,
            key=lambda t: (float(np.linalg.norm(t.position_3d - cursor)), t.id),
        ).id
    new_state = replace(
        state,
        cursor_depth=depth,
        last_trackpad_activity=last_activity,
        last_forward=pointer.pointing_direction,
        last_time=now,
    )
    return best, new_state


def regions_for(
    technique: str, ctx: ContextFrame, cache: RaycursorCellCache | None = None
) -> list[ActivationRegion]:
    if technique == "RayCasting":
        return raycast_regions(ctx)
    if technique == "StickyRay":
        return stickyray_regions(ctx)
    if technique == "RayCursor":
        return raycursor_regions(ctx, cache)
    raise ValueError(f"unknown technique {technique!r}")
