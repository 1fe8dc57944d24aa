"""Angular projection, polygon algebra and Voronoi constructions.

All 2D quantities live in the "control space": the plane of azimuth/elevation
angles (degrees) around the controller's pointing axis.  3D quantities are in
meters.  Every function here is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
import shapely
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, Delaunay, HalfspaceIntersection, QhullError
from shapely.geometry import MultiPolygon, Polygon as ShPolygon
from shapely.ops import unary_union

from . import _kernels

EPS = 1e-9
SLIVER_AREA_EPS = 1e-6  # square degrees
DISK_SEGMENTS = 128

WORLD_UP = np.array([0.0, 1.0, 0.0])


class GeometryError(ValueError):
    """Raised for degenerate geometric inputs (zero-length directions etc.)."""


@dataclass(frozen=True)
class AngularPoint:
    """A point in control space: signed azimuth/elevation in degrees."""

    h: float
    v: float

    def radius(self) -> float:
        return math.hypot(self.h, self.v)

    def as_array(self) -> np.ndarray:
        return np.array([self.h, self.v])


@dataclass(frozen=True)
class Polygon2D:
    """Simple CCW polygon in control space; empty polygon has no vertices."""

    vertices: np.ndarray  # (N, 2) degrees

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "_area", None)

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) < 3 or self.area <= SLIVER_AREA_EPS

    @property
    def area(self) -> float:
        if self._area is None:
            object.__setattr__(self, "_area", shoelace_area(self.vertices))
        return self._area

    @staticmethod
    def empty() -> "Polygon2D":
        return Polygon2D(np.zeros((0, 2)))


@dataclass(frozen=True)
class Polyhedron3D:
    """Convex polyhedron: vertices plus the bounding half-spaces that cut it.

    Half-spaces are rows (a, b, c, d) meaning a*x + b*y + c*z + d <= 0.
    """

    vertices: np.ndarray  # (N, 3) meters
    halfspaces: np.ndarray  # (M, 4)
    degenerate: bool = False

    @property
    def is_empty(self) -> bool:
        return self.degenerate or len(self.vertices) < 4


@dataclass(frozen=True)
class Frame:
    """Orthonormal controller frame: origin plus forward/right/up axes."""

    position: np.ndarray
    forward: np.ndarray
    right: np.ndarray
    up: np.ndarray


def normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n < EPS:
        raise GeometryError("cannot normalize zero-length vector")
    return v / n


def controller_frame(position: Sequence[float], forward: Sequence[float]) -> Frame:
    """Build the controller frame used for all control-space projections.

    The frame's up vector is world-up projected onto the plane perpendicular
    to forward; when forward is within 1 degree of world-up, world-z is
    substituted as the tie-break.
    """
    position = np.asarray(position, dtype=float)
    f = normalize(np.asarray(forward, dtype=float))
    up_hint = WORLD_UP
    if abs(float(np.dot(f, WORLD_UP))) > math.cos(math.radians(1.0)):
        up_hint = np.array([0.0, 0.0, 1.0])
    up = up_hint - np.dot(up_hint, f) * f
    up = normalize(up)
    right = np.cross(up, f)
    return Frame(position=position, forward=f, right=right, up=up)


def project_points(frame: Frame, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project world points to (h, v) degrees in the controller frame.

    Returns (angles (N,2), valid (N,) bool).  Points behind the controller
    (non-positive forward component) are marked invalid.  A point coincident
    with the controller origin raises GeometryError.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    d = points - frame.position
    norms = np.linalg.norm(d, axis=1)
    if np.any(norms < EPS):
        raise GeometryError("point coincides with controller origin")
    x = d @ frame.right
    y = d @ frame.up
    z = d @ frame.forward
    valid = z > EPS
    h = np.degrees(np.arctan2(x, z))
    v = np.degrees(np.arctan2(y, np.hypot(x, z)))
    return np.column_stack([h, v]), valid


def project_point(frame: Frame, point: Sequence[float]) -> AngularPoint:
    """Project a single world point; raises GeometryError if it is behind."""
    angles, valid = project_points(frame, np.asarray(point, dtype=float))
    if not valid[0]:
        raise GeometryError("point is behind the controller")
    return AngularPoint(float(angles[0, 0]), float(angles[0, 1]))


def angular_to_direction(frame: Frame, h: float, v: float) -> np.ndarray:
    """Inverse of project_point: world unit direction for (h, v) degrees."""
    hr, vr = math.radians(h), math.radians(v)
    y = math.sin(vr)
    horiz = math.cos(vr)
    x = horiz * math.sin(hr)
    z = horiz * math.cos(hr)
    return x * frame.right + y * frame.up + z * frame.forward


def shoelace_area(vertices: np.ndarray) -> float:
    """Unsigned area of a CCW polygon (signed shoelace, non-negative by invariant)."""
    return signed_area(vertices)


def signed_area(vertices: np.ndarray) -> float:
    if len(vertices) < 3:
        return 0.0
    if _kernels.HAVE_NUMBA and isinstance(vertices, np.ndarray):
        return float(_kernels.centroid_area(vertices)[2])
    x = vertices[:, 0]
    y = vertices[:, 1]
    xn = np.concatenate([x[1:], x[:1]])
    yn = np.concatenate([y[1:], y[:1]])
    return 0.5 * float(np.dot(x, yn) - np.dot(y, xn))


def ensure_ccw(vertices: np.ndarray) -> np.ndarray:
    if signed_area(vertices) < 0:
        return vertices[::-1].copy()
    return vertices


def convex_hull(points: Iterable) -> Polygon2D:
    """CCW convex hull via monotone chain; collinear interior points removed.

    Fewer than 3 distinct points yield a degenerate zero-area polygon that is
    reported as empty.
    """
    pts = _as_point_array(points)
    if len(pts) == 0:
        return Polygon2D.empty()
    if _kernels.HAVE_NUMBA:
        order = np.argsort(pts[:, 0] + pts[:, 1] * 1j)  # complex sort is (x, y)-lex
        spts = np.ascontiguousarray(pts[order])
        idx = _kernels.hull_indices(spts)
        if len(idx) == 0:  # a single distinct point
            return Polygon2D(spts[:1])
        return Polygon2D(spts[idx])
    if len(pts) >= 8:
        try:
            hull = ConvexHull(pts)
            return Polygon2D(pts[hull.vertices])  # qhull orders 2D hulls CCW
        except QhullError:
            pass
    pts = np.unique(pts, axis=0)
    if len(pts) <= 2:
        return Polygon2D(pts)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def build(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 0.0:
                out.pop()
            out.append(p)
        return out

    lower = build(pts)
    upper = build(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3:
        return Polygon2D(hull)
    return Polygon2D(hull)


def _as_point_array(points: Iterable) -> np.ndarray:
    if isinstance(points, np.ndarray):
        return points.reshape(-1, 2).astype(float, copy=False)
    rows = []
    for p in points:
        if isinstance(p, AngularPoint):
            rows.append([p.h, p.v])
        else:
            rows.append([float(p[0]), float(p[1])])
    if not rows:
        return np.zeros((0, 2))
    return np.asarray(rows, dtype=float)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def to_shapely(poly: Polygon2D) -> ShPolygon:
    if len(poly.vertices) < 3:
        return ShPolygon()
    return ShPolygon(poly.vertices)


def from_shapely(geom) -> Polygon2D:
    """Largest polygonal piece of a shapely geometry as a CCW Polygon2D."""
    if geom.is_empty:
        return Polygon2D.empty()
    if isinstance(geom, MultiPolygon):
        geom = max(geom.geoms, key=lambda g: g.area)
    elif not isinstance(geom, ShPolygon):
        polys = [g for g in getattr(geom, "geoms", []) if isinstance(g, ShPolygon)]
        if not polys:
            return Polygon2D.empty()
        geom = max(polys, key=lambda g: g.area)
    if shapely.area(geom) <= SLIVER_AREA_EPS:
        return Polygon2D.empty()
    verts = shapely.get_coordinates(shapely.get_exterior_ring(geom))[:-1]
    if signed_area(np.ascontiguousarray(verts)) < 0:
        verts = verts[::-1]
    return Polygon2D(np.ascontiguousarray(verts))


def from_shapely_batch(geoms: np.ndarray) -> list[Polygon2D]:
    """from_shapely over an object array of geometries.

    Hole-free polygons take a vectorized path; anything else (multi-part
    results, collections, polygons with holes) falls back to from_shapely.
    """
    out: list[Polygon2D] = [Polygon2D.empty()] * len(geoms)
    if not len(geoms):
        return out
    type_ids = shapely.get_type_id(geoms)
    simple = (
        (type_ids == 3)
        & ~shapely.is_empty(geoms)
        & (shapely.get_num_interior_rings(geoms) == 0)
    )
    for i in np.nonzero(~simple)[0]:
        out[i] = from_shapely(geoms[i])
    idx = np.nonzero(simple)[0]
    if len(idx):
        rings = shapely.get_exterior_ring(geoms[idx])
        counts = shapely.get_num_coordinates(rings)
        coords = shapely.get_coordinates(rings)
        pieces = np.split(coords, np.cumsum(counts)[:-1])
        for i, ring in zip(idx, pieces):
            verts = np.ascontiguousarray(ring[:-1])
            if len(verts) < 3:
                continue
            a = signed_area(verts)
            if abs(a) <= SLIVER_AREA_EPS:
                continue
            if a < 0:
                verts = np.ascontiguousarray(verts[::-1])
            out[i] = Polygon2D(verts)
    return out


def polygon_difference(subject: Polygon2D, clips: Sequence[Polygon2D]) -> Polygon2D:
    """Subject minus the union of clips; largest remaining piece.

    Sliver pieces below the area epsilon are dropped; a fully covered subject
    yields the empty polygon.
    """
    if subject.is_empty:
        return Polygon2D.empty()
    sh_subject = to_shapely(subject)
    sh_clips = [to_shapely(c) for c in clips if not c.is_empty]
    if not sh_clips:
        return from_shapely(sh_subject)
    result = sh_subject.difference(unary_union(sh_clips))
    return from_shapely(result)


def polygon_intersection(a: Polygon2D, b: Polygon2D) -> Polygon2D:
    if a.is_empty or b.is_empty:
        return Polygon2D.empty()
    return from_shapely(to_shapely(a).intersection(to_shapely(b)))


def centroid(polygon: Polygon2D) -> AngularPoint:
    """Area centroid; raises GeometryError on (near-)zero-area polygons."""
    v = polygon.vertices
    if len(v) < 3:
        raise GeometryError("centroid of a degenerate polygon")
    if _kernels.HAVE_NUMBA:
        cx, cy, a = _kernels.centroid_area(v)
        if abs(a) <= SLIVER_AREA_EPS:
            raise GeometryError("centroid of a zero-area polygon")
        return AngularPoint(float(cx), float(cy))
    x = v[:, 0]
    y = v[:, 1]
    xn = np.concatenate([x[1:], x[:1]])
    yn = np.concatenate([y[1:], y[:1]])
    cross = x * yn - xn * y
    a = 0.5 * float(np.sum(cross))
    if abs(a) <= SLIVER_AREA_EPS:
        raise GeometryError("centroid of a zero-area polygon")
    cx = float(np.sum((x + xn) * cross)) / (6.0 * a)
    cy = float(np.sum((y + yn) * cross)) / (6.0 * a)
    return AngularPoint(cx, cy)


def line_region_intersections(
    origin: Sequence[float], direction: Sequence[float], polygon: Polygon2D
) -> list[float]:
    """Signed parameters t where origin + t*direction crosses the boundary.

    Sorted ascending; tangential grazes are deduplicated.  Missing the polygon
    yields an empty list.
    """
    if len(polygon.vertices) < 3:
        return []
    o = np.asarray(
        [origin.h, origin.v] if isinstance(origin, AngularPoint) else origin,
        dtype=float,
    )
    d = np.asarray(direction, dtype=float)
    verts = polygon.vertices
    a = verts
    b = np.roll(verts, -1, axis=0)
    e = b - a
    # Solve o + t*d = a + s*e for each edge.
    denom = d[0] * e[:, 1] - d[1] * e[:, 0]
    rel = a - o
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (rel[:, 0] * e[:, 1] - rel[:, 1] * e[:, 0]) / denom
        s = (rel[:, 0] * d[1] - rel[:, 1] * d[0]) / denom
    ok = (np.abs(denom) > EPS) & (s >= -1e-12) & (s < 1.0 - 1e-12) & np.isfinite(t)
    ts = np.sort(t[ok])
    out: list[float] = []
    for val in ts:
        if not out or val - out[-1] > 1e-7:
            out.append(float(val))
    return out


def point_in_polygon(point: Sequence[float], polygon: Polygon2D) -> bool:
    """Even-odd membership test; boundary points count as inside."""
    if len(polygon.vertices) < 3:
        return False
    px, py = (
        (point.h, point.v) if isinstance(point, AngularPoint) else (point[0], point[1])
    )
    verts = polygon.vertices
    if _kernels.HAVE_NUMBA:
        return bool(_kernels.point_in_polygon_k(float(px), float(py), verts))
    x = verts[:, 0]
    y = verts[:, 1]
    x2 = np.concatenate([x[1:], x[:1]])
    y2 = np.concatenate([y[1:], y[:1]])
    ex = x2 - x
    ey = y2 - y
    # Boundary points count as inside.
    cross = ex * (py - y) - ey * (px - x)
    dot = (px - x) * ex + (py - y) * ey
    on_edge = (np.abs(cross) <= 1e-9) & (dot >= -1e-9) & (dot <= ex * ex + ey * ey + 1e-9)
    if bool(on_edge.any()):
        return True
    straddle = (y > py) != (y2 > py)
    if not straddle.any():
        return False
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x + (py - y) * ex / ey
    crossings = int(np.count_nonzero(straddle & (px < xint)))
    return crossings % 2 == 1


def _on_segment(a, b, p, tol=1e-9) -> bool:
    cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    if abs(cross) > tol:
        return False
    dot = (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])
    if dot < -tol:
        return False
    return dot <= (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2 + tol


def disk_polygon(radius: float, segments: int = DISK_SEGMENTS) -> Polygon2D:
    """Regular inscribed polygon approximating the disk of given radius."""
    ang = np.linspace(0.0, 2.0 * math.pi, segments, endpoint=False)
    return Polygon2D(np.column_stack([radius * np.cos(ang), radius * np.sin(ang)]))


def clip_convex_halfplane(
    vertices: np.ndarray, normal: np.ndarray, offset: float
) -> np.ndarray:
    """Clip a convex CCW polygon to the half-plane normal . x <= offset.

    A convex polygon crosses a line at most twice, so the clip reduces to
    locating the entry/exit edges and splicing in the two intersections.
    """
    if _kernels.HAVE_NUMBA:
        return _kernels.clip_halfplane_k(
            np.ascontiguousarray(vertices, dtype=float),
            float(normal[0]),
            float(normal[1]),
            float(offset),
        )
    n = len(vertices)
    if n == 0:
        return vertices
    dist = vertices @ normal - offset
    inside = dist <= EPS
    if inside.all():
        return vertices
    if not inside.any():
        return np.zeros((0, 2))
    nxt = np.concatenate([np.arange(1, n), [0]])
    trans = np.nonzero(inside != inside[nxt])[0]

    def crossing(i):
        j = nxt[i]
        t = dist[i] / (dist[i] - dist[j])
        return vertices[i] + t * (vertices[j] - vertices[i])

    if len(trans) != 2:
        # Numerically ambiguous multi-crossing: fall back to edge-wise build.
        out = []
        for i in range(n):
            j = nxt[i]
            if inside[i]:
                out.append(vertices[i])
            if inside[i] != inside[j]:
                out.append(crossing(i))
        return np.asarray(out)
    e1, e2 = trans
    if inside[nxt[e1]]:
        entry, exit_ = e1, e2  # inside run spans (e1+1 .. e2)
    else:
        entry, exit_ = e2, e1
    lo, hi = nxt[entry], exit_
    if lo <= hi:
        run = vertices[lo : hi + 1]
    else:
        run = np.vstack([vertices[lo:], vertices[: hi + 1]])
    return np.vstack([crossing(entry), run, crossing(exit_)])


def _dedupe_sites(sites: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Return (unique sites, index of representative for each input site)."""
    n = len(sites)
    rep = np.arange(n)
    if n >= 2:
        diff = sites[:, None, :] - sites[None, :, :]
        if np.min(
            np.einsum("ijk,ijk->ij", diff, diff)[np.triu_indices(n, 1)]
        ) > tol * tol:
            return sites, rep
    for i in range(n):
        if rep[i] != i:
            continue
        d = np.linalg.norm(sites[i + 1 :] - sites[i], axis=1)
        dup = np.nonzero(d <= tol)[0] + i + 1
        for j in dup:
            if rep[j] == j:
                rep[j] = i
    return sites[np.unique(rep)], rep


def voronoi_cells_2d(sites_in: Iterable, clip_disk_radius: float) -> list[Polygon2D]:
    """One Voronoi cell per site, clipped to the disk around the origin.

    Duplicate sites (within epsilon) share their cell: the lower-index site
    keeps it, later duplicates get an empty cell.  Cells tile the disk.
    Each cell is the disk cut by the bisector half-planes of the site's
    Delaunay neighbors, a superset of its Voronoi neighbors, so the clipped
    cells are exact.
    """
    sites = _as_point_array(sites_in)
    if len(sites) == 0:
        return []
    _, rep = _dedupe_sites(sites)
    unique_idx = [i for i in range(len(sites)) if rep[i] == i]
    usites = sites[unique_idx]
    cells: list[Polygon2D] = [Polygon2D.empty()] * len(sites)
    disk = disk_polygon(clip_disk_radius).vertices
    neighbors = _planar_neighbors(usites)
    if _kernels.HAVE_NUMBA:
        # Bisector half-planes for every (site, neighbor) pair in one pass.
        counts = np.array([len(nb) for nb in neighbors], dtype=np.int64)
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        if indptr[-1]:
            nbr = np.concatenate(neighbors)
            owner = np.repeat(np.arange(len(usites)), counts)
            nrm = usites[nbr] - usites[owner]
            sq = np.einsum("ij,ij->i", usites, usites)
            off = 0.5 * (sq[nbr] - sq[owner])
            planes = np.column_stack([nrm, off])
        else:
            planes = np.zeros((0, 3))
        safe_r = clip_disk_radius * math.cos(math.pi / DISK_SEGMENTS) * (1.0 - 1e-12)
        flat, offsets = _kernels.clip_cells_2d(
            np.ascontiguousarray(disk), safe_r * safe_r, planes, indptr
        )
        for k, i in enumerate(unique_idx):
            cell = flat[offsets[k] : offsets[k + 1]]
            cells[i] = (
                Polygon2D(ensure_ccw(cell.copy()))
                if len(cell) >= 3
                else Polygon2D.empty()
            )
        return cells
    for k, i in enumerate(unique_idx):
        cell = disk
        si = sites[i]
        for m in neighbors[k]:
            sj = usites[m]
            # Bisector half-plane: points at least as close to si as to sj.
            nrm = sj - si
            off = 0.5 * (float(sj @ sj) - float(si @ si))
            cell = clip_convex_halfplane(cell, nrm, off)
            if len(cell) == 0:
                break
        cells[i] = Polygon2D(ensure_ccw(cell)) if len(cell) >= 3 else Polygon2D.empty()
    return cells


def _planar_neighbors(sites: np.ndarray) -> list[np.ndarray]:
    """Candidate Voronoi neighbors per site (Delaunay when possible, else all)."""
    n = len(sites)
    everyone = [np.array([j for j in range(n) if j != i]) for i in range(n)]
    if n < 5:
        return everyone
    try:
        tri = Delaunay(sites)
    except QhullError:
        return everyone
    indptr, indices = tri.vertex_neighbor_vertices
    return [indices[indptr[i] : indptr[i + 1]] for i in range(n)]


def _box_halfspaces(box_min: np.ndarray, box_max: np.ndarray) -> np.ndarray:
    rows = []
    for axis in range(3):
        pos = np.zeros(4)
        pos[axis] = 1.0
        pos[3] = -box_max[axis]
        neg = np.zeros(4)
        neg[axis] = -1.0
        neg[3] = box_min[axis]
        rows.extend([pos, neg])
    return np.asarray(rows)


def _bisector_halfspaces(site: np.ndarray, others: np.ndarray) -> np.ndarray:
    if len(others) == 0:
        return np.zeros((0, 4))
    nrm = others - site
    off = 0.5 * (np.einsum("ij,ij->i", others, others) - float(site @ site))
    return np.column_stack([nrm, -off])


def _halfspace_vertices(halfspaces: np.ndarray, interior: np.ndarray) -> np.ndarray | None:
    try:
        hs = HalfspaceIntersection(halfspaces, interior)
        return hs.intersections
    except QhullError:
        pass
    center = _chebyshev_center(halfspaces)
    if center is None:
        return None
    try:
        hs = HalfspaceIntersection(halfspaces, center)
        return hs.intersections
    except QhullError:
        return None


def _chebyshev_center(halfspaces: np.ndarray) -> np.ndarray | None:
    a = halfspaces[:, :-1]
    b = -halfspaces[:, -1]
    norms = np.linalg.norm(a, axis=1, keepdims=True)
    res = linprog(
        c=np.r_[np.zeros(a.shape[1]), -1.0],
        A_ub=np.hstack([a, norms]),
        b_ub=b,
        bounds=[(None, None)] * a.shape[1] + [(0, None)],
        method="highs",
    )
    if not res.success or res.x[-1] <= 1e-12:
        return None
    return res.x[:-1]


def voronoi_cell_3d(
    site: Sequence[float],
    other_sites: Iterable,
    box_min: Sequence[float],
    box_max: Sequence[float],
) -> Polyhedron3D:
    """3D Voronoi cell of a site: the clip box cut by all bisector half-spaces."""
    site = np.asarray(site, dtype=float)
    others = np.asarray(list(other_sites), dtype=float).reshape(-1, 3)
    box_min = np.asarray(box_min, dtype=float)
    box_max = np.asarray(box_max, dtype=float)
    if np.any(site < box_min) or np.any(site > box_max):
        raise GeometryError("site outside the clip box")
    if len(others) and np.min(np.linalg.norm(others - site, axis=1)) <= 1e-9:
        return Polyhedron3D(np.zeros((0, 3)), np.zeros((0, 4)), degenerate=True)
    halfspaces = np.vstack(
        [_box_halfspaces(box_min, box_max), _bisector_halfspaces(site, others)]
    )
    verts = _halfspace_vertices(halfspaces, _interior_guess(site, box_min, box_max))
    if verts is None or len(verts) < 4:
        return Polyhedron3D(np.zeros((0, 3)), halfspaces, degenerate=True)
    return Polyhedron3D(verts, halfspaces)


def _interior_guess(site: np.ndarray, box_min: np.ndarray, box_max: np.ndarray) -> np.ndarray:
    # Site is strictly interior to its own cell; nudge off box faces.
    return np.clip(site, box_min + 1e-9, box_max - 1e-9)


def delaunay_adjacency(sites: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """(indptr, indices) Delaunay neighbors, or None for degenerate layouts.

    The adjacency depends only on the relative layout of the sites, so it is
    invariant under rigid motion of the whole set and can be reused while the
    layout holds.
    """
    from scipy.spatial import cKDTree

    if len(sites) < 6 or cKDTree(sites).query_pairs(1e-9):
        return None
    try:
        tri = Delaunay(sites)
    except QhullError:
        return None
    indptr, indices = tri.vertex_neighbor_vertices
    return indptr, indices


def voronoi_cells_3d(
    sites: np.ndarray,
    box_min: Sequence[float],
    box_max: Sequence[float],
    adjacency: tuple[np.ndarray, np.ndarray] | None = None,
) -> list[Polyhedron3D]:
    """Batch 3D Voronoi cells with Delaunay-neighbor pruning.

    Equivalent to calling voronoi_cell_3d per site, but intersects only the
    bisectors of Delaunay neighbors (a superset of Voronoi neighbors), which
    keeps dense scenes fast.  A precomputed delaunay_adjacency for these
    sites can be passed to skip rebuilding the triangulation.
    """
    sites = np.asarray(sites, dtype=float).reshape(-1, 3)
    box_min = np.asarray(box_min, dtype=float)
    box_max = np.asarray(box_max, dtype=float)
    n = len(sites)
    if n == 1:
        return [voronoi_cell_3d(sites[0], [], box_min, box_max)]
    if n >= 6 and _kernels.HAVE_NUMBA:
        fast = _voronoi_cells_3d_fast(sites, box_min, box_max, adjacency)
        if fast is not None:
            return fast
    neighbors: list[np.ndarray] | None = None
    if n >= 6:
        try:
            tri = Delaunay(sites)
            indptr, indices = tri.vertex_neighbor_vertices
            neighbors = [indices[indptr[i] : indptr[i + 1]] for i in range(n)]
        except QhullError:
            neighbors = None
    cells = []
    for i in range(n):
        idx = neighbors[i] if neighbors is not None else [j for j in range(n) if j != i]
        cells.append(voronoi_cell_3d(sites[i], sites[idx], box_min, box_max))
    return cells


_BOX_FACE_PTR = np.arange(0, 28, 4, dtype=np.int64)
_BOX_FACE_IDX = np.array(
    [0, 1, 3, 2, 4, 5, 7, 6, 0, 1, 5, 4, 2, 3, 7, 6, 0, 2, 6, 4, 1, 3, 7, 5],
    dtype=np.int64,
)


def _box_polytope(box_min: np.ndarray, box_max: np.ndarray) -> np.ndarray:
    """Corner vertices indexed by the bit pattern (x high, y, z low)."""
    return np.array(
        [
            [x, y, z]
            for x in (box_min[0], box_max[0])
            for y in (box_min[1], box_max[1])
            for z in (box_min[2], box_max[2])
        ]
    )


def _voronoi_cells_3d_fast(
    sites: np.ndarray,
    box_min: np.ndarray,
    box_max: np.ndarray,
    adjacency: tuple[np.ndarray, np.ndarray] | None = None,
) -> list[Polyhedron3D] | None:
    """Cells via compiled polytope clipping of the box by neighbor bisectors.

    Neighbor candidates come from the Delaunay adjacency (a superset of the
    Voronoi adjacency, so the clipped cells are exact).  Returns None when
    the configuration needs the slower per-site construction (duplicates,
    degenerate triangulation).
    """
    n = len(sites)
    outside = np.any(sites < box_min, axis=1) | np.any(sites > box_max, axis=1)
    if outside.any():
        raise GeometryError("site outside the clip box")
    if adjacency is None:
        adjacency = delaunay_adjacency(sites)
        if adjacency is None:
            return None
    indptr, indices = adjacency
    box_hs = _box_halfspaces(box_min, box_max)
    base_verts = _box_polytope(box_min, box_max)
    # All bisector planes in one vectorized pass, sliced per cell below.
    owner = np.repeat(np.arange(n), np.diff(indptr))
    nrm = sites[indices] - sites[owner]
    # Nearest bisectors first: they do most of the cutting, so later planes
    # hit the unchanged fast path of the clipper.
    order = np.lexsort((np.einsum("ij,ij->i", nrm, nrm), owner))
    indices = indices[order]
    nrm = nrm[order]
    sq = np.einsum("ij,ij->i", sites, sites)
    off = 0.5 * (sq[indices] - sq[owner])
    planes = np.column_stack([nrm, -off])
    flat, offsets, statuses = _kernels.clip_cells(
        base_verts, _BOX_FACE_PTR, _BOX_FACE_IDX, planes, indptr.astype(np.int64)
    )
    # One allocation for every cell's (box + bisectors) half-space stack.
    counts = np.diff(indptr)
    hs_off = np.concatenate([[0], np.cumsum(counts + len(box_hs))])
    hs_all = np.empty((hs_off[-1], 4))
    box_rows = (hs_off[:-1, None] + np.arange(len(box_hs))).ravel()
    hs_all[box_rows] = np.tile(box_hs, (n, 1))
    plane_mask = np.ones(hs_off[-1], dtype=bool)
    plane_mask[box_rows] = False
    hs_all[plane_mask] = planes
    cells: list[Polyhedron3D] = []
    for i in range(n):
        hs = hs_all[hs_off[i] : hs_off[i + 1]]
        if statuses[i] == -1:
            nbrs = indices[indptr[i] : indptr[i + 1]]
            cells.append(voronoi_cell_3d(sites[i], sites[nbrs], box_min, box_max))
            continue
        v = flat[offsets[i] : offsets[i + 1]]
        if len(v) < 4:
            cells.append(Polyhedron3D(np.zeros((0, 3)), hs, degenerate=True))
        else:
            cells.append(Polyhedron3D(v, hs))
    return cells


def project_polyhedron(poly: Polyhedron3D, frame: Frame) -> Polygon2D:
    """Convex hull of the projected polyhedron vertices; behind-vertices culled."""
    if len(poly.vertices) == 0:
        return Polygon2D.empty()
    angles, valid = project_points(frame, poly.vertices)
    if not valid.any():
        return Polygon2D.empty()
    return convex_hull(angles[valid])


def polyhedron_volume(poly: Polyhedron3D) -> float:
    if poly.is_empty:
        return 0.0
    from scipy.spatial import ConvexHull

    return float(ConvexHull(poly.vertices).volume)


# --- primitive shapes ------------------------------------------------------

SHAPES = ("sphere", "box", "cylinder", "capsule")
_RING_SEGMENTS = 32
_MESH_CACHE: dict[str, np.ndarray] = {}


def quat_to_matrix(q: Sequence[float]) -> np.ndarray:
    """Rotation matrix from a unit quaternion given as (w, x, y, z)."""
    w, x, y, z = (float(c) for c in q)
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if n < EPS:
        raise GeometryError("zero-length quaternion")
    w, x, y, z = w / n, x / n, y / n, z / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def _icosphere(subdivisions: int = 2) -> np.ndarray:
    """Unit-radius icosphere vertices (162 vertices at 2 subdivisions)."""
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(normalize(np.array(v, dtype=float))) for v in verts]
    for _ in range(subdivisions):
        midpoint: dict[tuple[int, int], int] = {}
        new_faces = []

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in midpoint:
                m = normalize((np.array(verts[i]) + np.array(verts[j])) / 2.0)
                verts.append(tuple(m))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return np.asarray(verts)


def unit_mesh(shape: str) -> np.ndarray:
    """Tessellation vertices of the unit primitive centered at the origin.

    Unit sphere: radius 0.5; unit box: side 1; cylinder/capsule: radius 0.5,
    total height 1 along local y.  Scale multiplies these.
    """
    if shape in _MESH_CACHE:
        return _MESH_CACHE[shape]
    if shape == "sphere":
        mesh = 0.5 * _icosphere(2)
    elif shape == "box":
        mesh = 0.5 * np.array(
            [
                [sx, sy, sz]
                for sx in (-1, 1)
                for sy in (-1, 1)
                for sz in (-1, 1)
            ],
            dtype=float,
        )
    elif shape == "cylinder":
        ang = np.linspace(0, 2 * math.pi, _RING_SEGMENTS, endpoint=False)
        ring = np.column_stack([0.5 * np.cos(ang), np.zeros(_RING_SEGMENTS), 0.5 * np.sin(ang)])
        mesh = np.vstack([ring + [0, 0.5, 0], ring + [0, -0.5, 0]])
    elif shape == "capsule":
        ang = np.linspace(0, 2 * math.pi, _RING_SEGMENTS, endpoint=False)
        rings = []
        # Cylindrical body rings at the cap equators plus cap latitude rings.
        for lat in (0.0, 0.35, 0.7):
            r = 0.5 * math.cos(lat * math.pi / 2)
            y = 0.25 + 0.25 * math.sin(lat * math.pi / 2)
            ring = np.column_stack([r * np.cos(ang), np.full(_RING_SEGMENTS, y), r * np.sin(ang)])
            rings += [ring, ring * [1, -1, 1]]
        rings.append(np.array([[0, 0.5, 0], [0, -0.5, 0]]))
        mesh = np.vstack(rings)
    else:
        raise GeometryError(f"unknown shape {shape!r}")
    _MESH_CACHE[shape] = mesh
    return mesh


def primitive_vertices(
    shape: str,
    position: Sequence[float],
    rotation: Sequence[float],
    scale: Sequence[float],
) -> np.ndarray:
    """World-space tessellation vertices of a posed primitive."""
    mesh = unit_mesh(shape)
    rot = quat_to_matrix(rotation)
    scaled = mesh * np.asarray(scale, dtype=float)
    return scaled @ rot.T + np.asarray(position, dtype=float)


def bounding_radius(shape: str, scale: Sequence[float]) -> float:
    """Radius of the bounding sphere of a posed unit primitive."""
    return _bounding_radius_cached(shape, (float(scale[0]), float(scale[1]), float(scale[2])))


@lru_cache(maxsize=4096)
def _bounding_radius_cached(shape: str, scale: tuple[float, float, float]) -> float:
    if shape == "sphere":
        return 0.5 * max(scale)
    mesh = unit_mesh(shape)
    return float(np.max(np.linalg.norm(mesh * np.asarray(scale), axis=1)))


def project_primitive(
    shape: str,
    position: Sequence[float],
    rotation: Sequence[float],
    scale: Sequence[float],
    frame: Frame,
) -> Polygon2D:
    """Silhouette outline: convex hull of the projected tessellation vertices.

    Vertices behind the controller are culled; a primitive entirely behind
    projects to the empty polygon.
    """
    verts = primitive_vertices(shape, position, rotation, scale)
    angles, valid = project_points(frame, verts)
    if not valid.any():
        return Polygon2D.empty()
    return convex_hull(angles[valid])
