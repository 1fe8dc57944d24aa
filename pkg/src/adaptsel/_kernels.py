"""Compiled inner loops for small-polygon geometry.

Each kernel mirrors the reference numpy implementation in geometry.py; the
public functions there dispatch here when numba is importable and fall back
to the numpy path otherwise.  Kernels are cached to disk after first compile.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not (args and callable(args[0])) else args[0]


@njit(cache=True)
def hull_indices(pts: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull over lexsorted points.

    Input must be sorted by (x, y); exact duplicates are skipped inline.
    Returns vertex indices in CCW order with collinear interior points
    dropped; fewer than 3 indices mean a degenerate hull.
    """
    n = pts.shape[0]
    out = np.empty(2 * n, dtype=np.int64)
    k = 0
    for i in range(n):
        if i > 0 and pts[i, 0] == pts[i - 1, 0] and pts[i, 1] == pts[i - 1, 1]:
            continue
        while k >= 2:
            ox, oy = pts[out[k - 2], 0], pts[out[k - 2], 1]
            ax, ay = pts[out[k - 1], 0], pts[out[k - 1], 1]
            if (ax - ox) * (pts[i, 1] - oy) - (ay - oy) * (pts[i, 0] - ox) <= 0.0:
                k -= 1
            else:
                break
        out[k] = i
        k += 1
    lower = k + 1
    for i in range(n - 2, -1, -1):
        if pts[i, 0] == pts[i + 1, 0] and pts[i, 1] == pts[i + 1, 1]:
            continue
        while k >= lower:
            ox, oy = pts[out[k - 2], 0], pts[out[k - 2], 1]
            ax, ay = pts[out[k - 1], 0], pts[out[k - 1], 1]
            if (ax - ox) * (pts[i, 1] - oy) - (ay - oy) * (pts[i, 0] - ox) <= 0.0:
                k -= 1
            else:
                break
        out[k] = i
        k += 1
    return out[: k - 1]


@njit(cache=True)
def centroid_area(verts: np.ndarray) -> np.ndarray:
    """(cx, cy, signed area) of a simple polygon; centroid zero when degenerate."""
    n = verts.shape[0]
    a = 0.0
    cx = 0.0
    cy = 0.0
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        cross = verts[i, 0] * verts[j, 1] - verts[j, 0] * verts[i, 1]
        a += cross
        cx += (verts[i, 0] + verts[j, 0]) * cross
        cy += (verts[i, 1] + verts[j, 1]) * cross
    a *= 0.5
    out = np.empty(3)
    if abs(a) > 0.0:
        out[0] = cx / (6.0 * a)
        out[1] = cy / (6.0 * a)
    else:
        out[0] = 0.0
        out[1] = 0.0
    out[2] = a
    return out


@njit(cache=True)
def point_in_polygon_k(px: float, py: float, verts: np.ndarray) -> bool:
    """Even-odd membership with boundary points counted as inside."""
    n = verts.shape[0]
    inside = False
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        x1, y1 = verts[i, 0], verts[i, 1]
        x2, y2 = verts[j, 0], verts[j, 1]
        ex = x2 - x1
        ey = y2 - y1
        cross = ex * (py - y1) - ey * (px - x1)
        if abs(cross) <= 1e-9:
            dot = (px - x1) * ex + (py - y1) * ey
            if -1e-9 <= dot <= ex * ex + ey * ey + 1e-9:
                return True
        if (y1 > py) != (y2 > py):
            xint = x1 + (py - y1) * ex / ey
            if px < xint:
                inside = not inside
    return inside


@njit(cache=True)
def line_span(
    ox: float, oy: float, dx: float, dy: float, verts: np.ndarray
) -> np.ndarray:
    """(t_min, t_max, count) of line crossings with the polygon boundary.

    Edge endpoints follow the half-open convention so shared vertices count
    once; count reflects accepted crossings before span deduplication.
    """
    n = verts.shape[0]
    tmin = np.inf
    tmax = -np.inf
    count = 0
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        ax, ay = verts[i, 0], verts[i, 1]
        ex = verts[j, 0] - ax
        ey = verts[j, 1] - ay
        denom = dx * ey - dy * ex
        if abs(denom) <= 1e-9:
            continue
        rx = ax - ox
        ry = ay - oy
        t = (rx * ey - ry * ex) / denom
        s = (rx * dy - ry * dx) / denom
        if s >= -1e-12 and s < 1.0 - 1e-12 and np.isfinite(t):
            count += 1
            if t < tmin:
                tmin = t
            if t > tmax:
                tmax = t
    out = np.empty(3)
    out[0] = tmin
    out[1] = tmax
    out[2] = count
    return out


@njit(cache=True)
def distance_to_boundary(verts: np.ndarray) -> float:
    """Distance from the origin to the polygon boundary."""
    n = verts.shape[0]
    best = np.inf
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        ax, ay = verts[i, 0], verts[i, 1]
        ex = verts[j, 0] - ax
        ey = verts[j, 1] - ay
        ee = ex * ex + ey * ey
        if ee > 0.0:
            t = -(ax * ex + ay * ey) / ee
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
        else:
            t = 0.0
        cx = ax + t * ex
        cy = ay + t * ey
        d = (cx * cx + cy * cy) ** 0.5
        if d < best:
            best = d
    return best


@njit(cache=True)
def clip_halfplane_k(verts: np.ndarray, nx: float, ny: float, off: float) -> np.ndarray:
    """Clip a convex CCW polygon to nx*x + ny*y <= off."""
    n = verts.shape[0]
    if n == 0:
        return verts
    d = np.empty(n)
    n_in = 0
    for i in range(n):
        d[i] = verts[i, 0] * nx + verts[i, 1] * ny - off
        if d[i] <= 1e-9:
            n_in += 1
    if n_in == n:
        return verts
    if n_in == 0:
        return verts[:0]
    out = np.empty((n + 2, 2))
    k = 0
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        if d[i] <= 1e-9:
            out[k, 0] = verts[i, 0]
            out[k, 1] = verts[i, 1]
            k += 1
        if (d[i] <= 1e-9) != (d[j] <= 1e-9):
            t = d[i] / (d[i] - d[j])
            out[k, 0] = verts[i, 0] + t * (verts[j, 0] - verts[i, 0])
            out[k, 1] = verts[i, 1] + t * (verts[j, 1] - verts[i, 1])
            k += 1
    return out[:k].copy()


@njit(cache=True)
def clip_polytope(verts, face_ptr, face_idx, a, b, c, dd):
    """Clip a convex polytope (vertex loops per face) to a*x+b*y+c*z+dd <= 0.

    Returns (verts, face_ptr, face_idx, status); status 0 means empty,
    1 unchanged, 2 clipped, -1 numerically degenerate (caller should fall
    back to an exact construction).
    """
    eps = 1e-9
    nv = verts.shape[0]
    d = np.empty(nv)
    n_in = 0
    for i in range(nv):
        d[i] = a * verts[i, 0] + b * verts[i, 1] + c * verts[i, 2] + dd
        if d[i] <= eps:
            n_in += 1
    if n_in == nv:
        return verts, face_ptr, face_idx, 1
    if n_in == 0:
        return verts[:0], face_ptr[:1], face_idx[:0], 0
    remap = np.full(nv, -1, np.int64)
    k = 0
    for i in range(nv):
        if d[i] <= eps:
            remap[i] = k
            k += 1
    ne = face_idx.shape[0]
    new_verts = np.empty((k + ne, 3))
    for i in range(nv):
        if remap[i] >= 0:
            new_verts[remap[i], 0] = verts[i, 0]
            new_verts[remap[i], 1] = verts[i, 1]
            new_verts[remap[i], 2] = verts[i, 2]
    nv_new = k
    nf = face_ptr.shape[0] - 1
    buf_idx = np.empty(2 * ne + 8, np.int64)
    buf_ptr = np.empty(nf + 2, np.int64)
    buf_ptr[0] = 0
    bp = 0
    bi = 0
    cap_mark = np.full(k + ne, False)
    n_cap = 0
    cross_keys = np.full(ne, -1, np.int64)
    cross_vals = np.empty(ne, np.int64)
    n_cross = 0
    for f in range(nf):
        start = face_ptr[f]
        m = face_ptr[f + 1] - start
        loop_len = 0
        for e in range(m):
            p = face_idx[start + e]
            q = face_idx[start + (e + 1) % m]
            pin = d[p] <= eps
            qin = d[q] <= eps
            if pin:
                buf_idx[bi] = remap[p]
                bi += 1
                loop_len += 1
            if pin != qin:
                lo = p if p < q else q
                hi = q if p < q else p
                key = lo * nv + hi
                ci = -1
                for s in range(n_cross):
                    if cross_keys[s] == key:
                        ci = cross_vals[s]
                        break
                if ci < 0:
                    t = d[p] / (d[p] - d[q])
                    new_verts[nv_new, 0] = verts[p, 0] + t * (verts[q, 0] - verts[p, 0])
                    new_verts[nv_new, 1] = verts[p, 1] + t * (verts[q, 1] - verts[p, 1])
                    new_verts[nv_new, 2] = verts[p, 2] + t * (verts[q, 2] - verts[p, 2])
                    ci = nv_new
                    cross_keys[n_cross] = key
                    cross_vals[n_cross] = ci
                    n_cross += 1
                    nv_new += 1
                buf_idx[bi] = ci
                bi += 1
                loop_len += 1
                if not cap_mark[ci]:
                    cap_mark[ci] = True
                    n_cap += 1
        if loop_len >= 3:
            bp += 1
            buf_ptr[bp] = bi
        else:
            bi = buf_ptr[bp]
    # Cap face: order the cut-plane vertices by angle about their centroid.
    if n_cap >= 3:
        cap = np.empty(n_cap, np.int64)
        cc = 0
        for i in range(nv_new):
            if cap_mark[i]:
                cap[cc] = i
                cc += 1
        cx = 0.0
        cy = 0.0
        cz = 0.0
        for i in range(n_cap):
            cx += new_verts[cap[i], 0]
            cy += new_verts[cap[i], 1]
            cz += new_verts[cap[i], 2]
        cx /= n_cap
        cy /= n_cap
        cz /= n_cap
        # In-plane basis: cross the clip normal with its least-aligned axis.
        if abs(a) <= abs(b) and abs(a) <= abs(c):
            ex, ey, ez = 1.0, 0.0, 0.0
        elif abs(b) <= abs(c):
            ex, ey, ez = 0.0, 1.0, 0.0
        else:
            ex, ey, ez = 0.0, 0.0, 1.0
        ux = b * ez - c * ey
        uy = c * ex - a * ez
        uz = a * ey - b * ex
        un = (ux * ux + uy * uy + uz * uz) ** 0.5
        if un < 1e-15:
            return new_verts[:nv_new], buf_ptr[: bp + 1], buf_idx[:bi], -1
        ux /= un
        uy /= un
        uz /= un
        vx = b * uz - c * uy
        vy = c * ux - a * uz
        vz = a * uy - b * ux
        ang = np.empty(n_cap)
        for i in range(n_cap):
            rx = new_verts[cap[i], 0] - cx
            ry = new_verts[cap[i], 1] - cy
            rz = new_verts[cap[i], 2] - cz
            ang[i] = np.arctan2(
                rx * vx + ry * vy + rz * vz, rx * ux + ry * uy + rz * uz
            )
        order = np.argsort(ang)
        for i in range(n_cap):
            buf_idx[bi + i] = cap[order[i]]
        bi += n_cap
        bp += 1
        buf_ptr[bp] = bi
    elif n_cap > 0:
        return new_verts[:nv_new], buf_ptr[: bp + 1], buf_idx[:bi], -1
    return new_verts[:nv_new].copy(), buf_ptr[: bp + 1].copy(), buf_idx[:bi].copy(), 2


@njit(cache=True)
def clip_cell(verts, face_ptr, face_idx, planes):
    """Clip a polytope by every plane row (a, b, c, d); see clip_polytope."""
    status = 1
    for p in range(planes.shape[0]):
        verts, face_ptr, face_idx, status = clip_polytope(
            verts, face_ptr, face_idx,
            planes[p, 0], planes[p, 1], planes[p, 2], planes[p, 3],
        )
        if status <= 0:
            break
    return verts, status


@njit(cache=True)
def hulls_batch(pts):
    """Hulls of many equal-length point rows, each lexsorted by (x, y).

    Returns (flat indices, offsets); row k's hull vertex indices are
    flat[offsets[k]:offsets[k + 1]], indexing into that row.
    """
    rows, m = pts.shape[0], pts.shape[1]
    flat = np.empty(rows * (m + 1), np.int64)
    offsets = np.empty(rows + 1, np.int64)
    offsets[0] = 0
    pos = 0
    for k in range(rows):
        idx = hull_indices(pts[k])
        for i in range(idx.shape[0]):
            flat[pos + i] = idx[i]
        pos += idx.shape[0]
        offsets[k + 1] = pos
    return flat[:pos], offsets


@njit(cache=True)
def region_metrics(flat, offsets):
    """W, A, aim center and movement box for many region polygons at once.

    flat stacks the polygon vertex rows; polygon k occupies
    flat[offsets[k]:offsets[k + 1]].  Output row k is
    (a, x1, x2, y1, y2, cx, cy); ok[k] is 0 for empty or sliver regions.
    """
    n = offsets.shape[0] - 1
    out = np.zeros((n, 7))
    ok = np.zeros(n, np.uint8)
    for k in range(n):
        verts = flat[offsets[k] : offsets[k + 1]]
        if verts.shape[0] < 3:
            continue
        cx, cy, area = centroid_area(verts)
        if abs(area) <= 1e-6:
            continue
        a = (cx * cx + cy * cy) ** 0.5
        if a < 1e-12:
            ux, uy = 1.0, 0.0
        else:
            ux, uy = cx / a, cy / a
        lo, hi, count = line_span(0.0, 0.0, ux, uy, verts)
        if count >= 2 and hi - lo > 1e-7:
            x1, x2 = lo - a, hi - a
        else:
            lo, hi, count = line_span(cx, cy, ux, uy, verts)
            if count < 2 or hi - lo <= 1e-7:
                continue
            x1, x2 = lo, hi
        lo, hi, count = line_span(cx, cy, -uy, ux, verts)
        if count >= 2 and hi - lo > 1e-7:
            y2, y1 = lo, hi
        else:
            y1 = y2 = 0.0
        out[k, 0] = a
        out[k, 1] = x1
        out[k, 2] = x2
        out[k, 3] = y1
        out[k, 4] = y2
        out[k, 5] = cx
        out[k, 6] = cy
        ok[k] = 1
    return out, ok


@njit(cache=True)
def clip_cells(verts, face_ptr, face_idx, planes, plane_offsets):
    """clip_cell for many cells sharing one base polytope.

    Cell i is cut by plane rows plane_offsets[i]:plane_offsets[i + 1].
    Returns the stacked result vertices, per-cell offsets into them, and
    per-cell statuses (1 unchanged, 2 clipped, 0 empty, -1 degenerate).
    """
    n = plane_offsets.shape[0] - 1
    offsets = np.empty(n + 1, np.int64)
    offsets[0] = 0
    statuses = np.empty(n, np.int64)
    chunks = []
    total = 0
    for i in range(n):
        v, status = clip_cell(
            verts, face_ptr, face_idx, planes[plane_offsets[i] : plane_offsets[i + 1]]
        )
        statuses[i] = status
        if status > 0:
            chunks.append(v)
            total += v.shape[0]
        offsets[i + 1] = total
    flat = np.empty((total, 3))
    pos = 0
    for c in chunks:
        flat[pos : pos + c.shape[0]] = c
        pos += c.shape[0]
    return flat, offsets, statuses


@njit(cache=True)
def hulls_var(pts, offsets):
    """Hulls of many variable-length point runs, each lexsorted by (x, y).

    Run k is pts[offsets[k]:offsets[k + 1]]; returns flat hull indices
    (relative to each run start) plus per-run output offsets.
    """
    n = offsets.shape[0] - 1
    flat = np.empty(pts.shape[0] + n, np.int64)
    out_off = np.empty(n + 1, np.int64)
    out_off[0] = 0
    pos = 0
    for k in range(n):
        idx = hull_indices(pts[offsets[k] : offsets[k + 1]])
        for i in range(idx.shape[0]):
            flat[pos + i] = idx[i]
        pos += idx.shape[0]
        out_off[k + 1] = pos
    return flat[:pos], out_off


@njit(cache=True)
def clip_cells_2d(disk, safe_r_sq, planes, plane_offsets):
    """Half-plane clipping of one base polygon into many cells.

    Cell i is the disk polygon cut by plane rows
    plane_offsets[i]:plane_offsets[i + 1] of (nx, ny, off), keeping
    nx*x + ny*y <= off.  Returns stacked cell vertices plus per-cell
    offsets into them.

    Cells are first cut from the disk's bounding square; a result whose
    vertices all lie within safe_r_sq (the squared inradius of the disk
    polygon) cannot touch the disk boundary and is final, skipping the
    expensive clip of the many-vertex disk itself.
    """
    n = plane_offsets.shape[0] - 1
    cap = n * disk.shape[0] + planes.shape[0] + n
    half = 0.0
    for v in range(disk.shape[0]):
        if abs(disk[v, 0]) > half:
            half = abs(disk[v, 0])
        if abs(disk[v, 1]) > half:
            half = abs(disk[v, 1])
    square = np.empty((4, 2))
    square[0, 0] = -half
    square[0, 1] = -half
    square[1, 0] = half
    square[1, 1] = -half
    square[2, 0] = half
    square[2, 1] = half
    square[3, 0] = -half
    square[3, 1] = half
    flat = np.empty((cap, 2))
    offsets = np.empty(n + 1, np.int64)
    offsets[0] = 0
    pos = 0
    for i in range(n):
        cell = square
        for p in range(plane_offsets[i], plane_offsets[i + 1]):
            cell = clip_halfplane_k(cell, planes[p, 0], planes[p, 1], planes[p, 2])
            if cell.shape[0] == 0:
                break
        inside = True
        for v in range(cell.shape[0]):
            if cell[v, 0] * cell[v, 0] + cell[v, 1] * cell[v, 1] > safe_r_sq:
                inside = False
                break
        if not inside:
            cell = disk
            for p in range(plane_offsets[i], plane_offsets[i + 1]):
                cell = clip_halfplane_k(cell, planes[p, 0], planes[p, 1], planes[p, 2])
                if cell.shape[0] == 0:
                    break
        for v in range(cell.shape[0]):
            flat[pos + v, 0] = cell[v, 0]
            flat[pos + v, 1] = cell[v, 1]
        pos += cell.shape[0]
        offsets[i + 1] = pos
    return flat[:pos].copy(), offsets
