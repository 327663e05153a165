"""Bezier and polygon primitives used to build editable vector regions.

Coordinate convention (shared with the rasterizer): x runs along image
columns, y along rows. The corner of pixel (row i, col j) is (j, i) and its
center (j + 0.5, i + 0.5). Mask boundaries are traced on the corner lattice
with 4-connected foreground, so traced polygons enclose exactly the pixel
area of the region they bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import GeometryError

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

_CONTINUITY_TOL = 1e-9


class Point2(NamedTuple):
    """Finite 2-D point in canvas units."""

    x: float
    y: float


@dataclass(frozen=True)
class CubicBezier:
    """Cubic segment; ``pts`` holds rows p0..p3, shape (4, 2)."""

    pts: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.pts, dtype=np.float64)
        if pts.shape != (4, 2):
            raise GeometryError(f"cubic segment needs 4 control points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("non-finite control point")
        object.__setattr__(self, "pts", pts)

    @classmethod
    def from_points(cls, p0, p1, p2, p3) -> "CubicBezier":
        return cls(np.array([p0, p1, p2, p3], dtype=np.float64))

    @property
    def p0(self) -> Point2:
        return Point2(*self.pts[0])

    @property
    def p1(self) -> Point2:
        return Point2(*self.pts[1])

    @property
    def p2(self) -> Point2:
        return Point2(*self.pts[2])

    @property
    def p3(self) -> Point2:
        return Point2(*self.pts[3])


@dataclass(frozen=True)
class BezierPath:
    """Closed chain of cubic segments: segment i ends where i+1 starts and
    the last segment ends at the first segment's start (tolerance 1e-9)."""

    segments: tuple

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise GeometryError("path needs at least one segment")
        for a, b in zip(segs, segs[1:] + segs[:1]):
            if np.max(np.abs(a.pts[3] - b.pts[0])) > _CONTINUITY_TOL:
                raise GeometryError("path is not a closed C0 chain")
        object.__setattr__(self, "segments", segs)

    def control_points(self) -> np.ndarray:
        """Deduplicated control points, shape (3L, 2): rows 3i..3i+2 are
        segment i's p0, p1, p2; p3 is row 3(i+1) mod 3L."""
        return np.concatenate([s.pts[:3] for s in self.segments], axis=0)

    @classmethod
    def from_control_points(cls, arr: np.ndarray) -> "BezierPath":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] % 3 != 0 or arr.shape[0] < 3:
            raise GeometryError(f"packed control array must be (3L, 2), got {arr.shape}")
        n = arr.shape[0] // 3
        segs = []
        for i in range(n):
            p3 = arr[(3 * i + 3) % arr.shape[0]]
            segs.append(CubicBezier(np.vstack([arr[3 * i: 3 * i + 3], p3[None, :]])))
        return cls(tuple(segs))


@dataclass(frozen=True)
class Polyline:
    """Point chain; when closed, the first point is not repeated at the end."""

    points: np.ndarray  # (N, 2) float64
    closed: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise GeometryError(f"polyline needs >=2 points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("non-finite polyline point")
        if self.closed and np.array_equal(pts[0], pts[-1]):
            raise GeometryError("closed polyline must not repeat its first point")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


# ---------------------------------------------------------------------------
# Bezier evaluation and flattening

def _bernstein3(t):
    t = np.asarray(t, dtype=np.float64)
    u = 1.0 - t
    return np.stack([u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t], axis=-1)


def eval_cubic_bezier(curve: CubicBezier, t: float) -> Point2:
    """Evaluate the cubic at parameter t in [0, 1]."""
    if not (0.0 <= t <= 1.0):
        raise GeometryError(f"parameter t={t} outside [0, 1]")
    w = _bernstein3(float(t))
    p = w @ curve.pts
    return Point2(float(p[0]), float(p[1]))


def eval_cubic_many(pts: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Vectorized evaluation: pts (4, 2), ts (N,) -> (N, 2)."""
    return _bernstein3(np.asarray(ts, dtype=np.float64)) @ pts


def split_cubic(pts: np.ndarray, t: float = 0.5):
    """De Casteljau split into two cubics covering [0, t] and [t, 1]."""
    p01 = (1 - t) * pts[0] + t * pts[1]
    p12 = (1 - t) * pts[1] + t * pts[2]
    p23 = (1 - t) * pts[2] + t * pts[3]
    q0 = (1 - t) * p01 + t * p12
    q1 = (1 - t) * p12 + t * p23
    r = (1 - t) * q0 + t * q1
    left = np.vstack([pts[0], p01, q0, r])
    right = np.vstack([r, q1, p23, pts[3]])
    return left, right


def _point_segment_distance(p, a, b) -> float:
    ax, ay = a
    bx, by = b
    dx = bx - ax
    dy = by - ay
    denom = dx * dx + dy * dy
    if denom == 0.0:
        ex = p[0] - ax
        ey = p[1] - ay
        return float(np.sqrt(ex * ex + ey * ey))
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / denom
    t = min(1.0, max(0.0, t))
    ex = p[0] - (ax + t * dx)
    ey = p[1] - (ay + t * dy)
    return float(np.sqrt(ex * ex + ey * ey))


def _flat_enough(pts, tol) -> bool:
    # Convex-hull argument: the curve lies within the max control-point
    # distance from chord segment [p0, p3].
    d1 = _point_segment_distance(pts[1], pts[0], pts[3])
    d2 = _point_segment_distance(pts[2], pts[0], pts[3])
    return max(d1, d2) <= tol


def flatten_path(path: BezierPath, tol: float) -> Polyline:
    """Adaptively flatten a closed path to a polyline with chordal deviation <= tol."""
    if tol <= 0.0:
        raise GeometryError("flatten tolerance must be > 0")
    all_pts = np.concatenate([s.pts for s in path.segments], axis=0)
    if np.max(np.abs(all_pts - all_pts[0])) == 0.0:
        raise GeometryError("degenerate path: all control points identical")
    out = []
    for seg in path.segments:
        stack = [(seg.pts, 0)]
        while stack:
            pts, depth = stack.pop()
            if depth >= 48 or _flat_enough(pts, tol):
                out.append(pts[0])
            else:
                left, right = split_cubic(pts)
                stack.append((right, depth + 1))
                stack.append((left, depth + 1))
    pts = np.array(out, dtype=np.float64)
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    pts = pts[keep]
    if np.array_equal(pts[0], pts[-1]) and len(pts) > 2:
        pts = pts[:-1]
    if len(pts) < 2:
        raise GeometryError("degenerate path: flattening produced a single point")
    return Polyline(pts, closed=True)


# ---------------------------------------------------------------------------
# Mask boundary tracing

def _directed_boundary_edges(mask: np.ndarray):
    """Directed boundary edges of a binary mask on the corner lattice.

    Each free pixel side becomes one unit edge oriented so that traversal
    runs clockwise on screen (y down) around foreground. Returns arrays
    (start_xy, end_xy, pixel_rc) of shape (E, 2).
    """
    fg = mask.astype(bool)
    h, w = fg.shape
    pad = np.zeros((h + 2, w + 2), dtype=bool)
    pad[1:-1, 1:-1] = fg
    top = fg & ~pad[:-2, 1:-1]
    bottom = fg & ~pad[2:, 1:-1]
    left = fg & ~pad[1:-1, :-2]
    right = fg & ~pad[1:-1, 2:]

    starts, ends, pix = [], [], []
    for side, sel in (("t", top), ("r", right), ("b", bottom), ("l", left)):
        ii, jj = np.nonzero(sel)
        if len(ii) == 0:
            continue
        if side == "t":
            s = np.stack([jj, ii], axis=1)
            e = np.stack([jj + 1, ii], axis=1)
        elif side == "r":
            s = np.stack([jj + 1, ii], axis=1)
            e = np.stack([jj + 1, ii + 1], axis=1)
        elif side == "b":
            s = np.stack([jj + 1, ii + 1], axis=1)
            e = np.stack([jj, ii + 1], axis=1)
        else:
            s = np.stack([jj, ii + 1], axis=1)
            e = np.stack([jj, ii], axis=1)
        starts.append(s)
        ends.append(e)
        pix.append(np.stack([ii, jj], axis=1))
    if not starts:
        return (np.zeros((0, 2), int),) * 3
    return np.concatenate(starts), np.concatenate(ends), np.concatenate(pix)


def _merge_collinear(pts: np.ndarray) -> np.ndarray:
    if len(pts) < 3:
        return pts
    prev = pts - np.roll(pts, 1, axis=0)
    nxt = np.roll(pts, -1, axis=0) - pts
    cross = prev[:, 0] * nxt[:, 1] - prev[:, 1] * nxt[:, 0]
    dot = prev[:, 0] * nxt[:, 0] + prev[:, 1] * nxt[:, 1]
    keep = ~((cross == 0) & (dot > 0))
    if keep.sum() < 3:
        return pts
    return pts[keep]


def signed_area(points: np.ndarray) -> float:
    """Shoelace area; positive for screen-clockwise loops (y axis down)."""
    x = points[:, 0]
    y = points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _trace_loops(mask: np.ndarray):
    """All boundary loops: list of (vertices (N,2) float64, outer: bool, label: int).

    Outer loops are traced clockwise on screen (positive shoelace area in the
    y-down frame); holes come out with negative area. At checkerboard corners
    the walk turns right, which keeps 4-connected components separate.
    """
    mask = np.asarray(mask)
    if mask.size == 0 or not mask.any():
        return []
    labels, _ = ndimage.label(mask, structure=_FOUR_CONNECTED)
    starts, ends, pix = _directed_boundary_edges(mask)
    n_edges = len(starts)
    if n_edges == 0:
        return []

    outgoing: dict = {}
    for idx in range(n_edges):
        outgoing.setdefault(tuple(starts[idx]), []).append(idx)
    used = np.zeros(n_edges, dtype=bool)

    loops = []
    for first in range(n_edges):
        if used[first]:
            continue
        verts = [starts[first]]
        cur = first
        used[cur] = True
        label = int(labels[pix[first][0], pix[first][1]])
        origin = tuple(starts[first])
        while True:
            end = tuple(ends[cur])
            if end == origin:
                break
            verts.append(ends[cur])
            cands = [e for e in outgoing.get(end, []) if not used[e]]
            if not cands:
                break  # should not happen on well-formed masks
            if len(cands) == 1:
                nxt = cands[0]
            else:
                d = ends[cur] - starts[cur]
                right = (-d[1], d[0])
                nxt = cands[0]
                for e in cands:
                    de = ends[e] - starts[e]
                    if (de[0], de[1]) == right:
                        nxt = e
                        break
            used[nxt] = True
            cur = nxt
        pts = _merge_collinear(np.array(verts, dtype=np.float64))
        if len(pts) >= 3:
            loops.append((pts, signed_area(pts) > 0, label))
    loops.sort(key=lambda item: (item[2], not item[1], item[0][:, 1].min(), item[0][:, 0].min()))
    return loops


def trace_mask_boundary(mask: np.ndarray) -> list:
    """Outer boundary of every 4-connected foreground component.

    Returns one closed polyline per component, vertices on pixel corners,
    so the enclosed area equals the component's filled pixel count exactly.
    Holes are not included here; see trace_mask_contours.
    """
    return [Polyline(pts, closed=True) for pts, outer, _ in _trace_loops(mask) if outer]


def trace_mask_contours(mask: np.ndarray) -> list:
    """Per component: (outer polyline, list of hole polylines)."""
    by_label: dict = {}
    for pts, outer, label in _trace_loops(mask):
        entry = by_label.setdefault(label, [None, []])
        if outer:
            entry[0] = Polyline(pts, closed=True)
        else:
            entry[1].append(Polyline(pts, closed=True))
    out = []
    for label in sorted(by_label):
        outer, holes = by_label[label]
        if outer is not None:
            out.append((outer, holes))
    return out


# ---------------------------------------------------------------------------
# Simplification and splitting

def _dp_keep(points: np.ndarray, eps: float) -> np.ndarray:
    """Boolean keep-mask for open-chain Douglas-Peucker with endpoint anchors."""
    n = len(points)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        i0, i1 = stack.pop()
        if i1 - i0 < 2:
            continue
        a = points[i0]
        b = points[i1]
        seg = points[i0 + 1: i1]
        dx = b[0] - a[0]
        dy = b[1] - a[1]
        denom = dx * dx + dy * dy
        px = seg[:, 0] - a[0]
        py = seg[:, 1] - a[1]
        if denom == 0.0:
            d2 = px * px + py * py
        else:
            t = np.clip((px * dx + py * dy) / denom, 0.0, 1.0)
            ex = px - t * dx
            ey = py - t * dy
            d2 = ex * ex + ey * ey
        k = int(np.argmax(d2))
        if d2[k] > eps * eps:
            split = i0 + 1 + k
            keep[split] = True
            stack.append((i0, split))
            stack.append((split, i1))
    return keep


def _farthest_pair(points: np.ndarray, exclude_adjacent: bool):
    """Index pair maximizing squared distance; ties resolved to the smallest
    (i, j) in lexicographic order. Adjacency is cyclic when excluded."""
    n = len(points)
    best = (-1.0, 0, 0)
    for i in range(n - 1):
        d = points[i + 1:] - points[i]
        d2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]
        if exclude_adjacent:
            d2 = d2.copy()
            d2[0] = -1.0
            if i == 0:
                d2[-1] = -1.0
        k = int(np.argmax(d2))
        if d2[k] > best[0]:
            best = (float(d2[k]), i, i + 1 + k)
    return best[1], best[2], best[0]


def douglas_peucker(line: Polyline, eps: float) -> Polyline:
    """Ramer-Douglas-Peucker simplification.

    Discarded points lie within eps of the retained chain. Closed input is
    anchored at its two mutually farthest vertices before recursing, so the
    output is again closed.
    """
    if eps < 0.0:
        raise GeometryError("eps must be >= 0")
    pts = line.points
    if not line.closed:
        return Polyline(pts[_dp_keep(pts, eps)], closed=False)
    if len(pts) <= 3:
        return Polyline(pts.copy(), closed=True)
    i, j, _ = _farthest_pair(pts, exclude_adjacent=False)
    chain_a = pts[i: j + 1]
    chain_b = np.concatenate([pts[j:], pts[: i + 1]], axis=0)
    kept_a = chain_a[_dp_keep(chain_a, eps)]
    kept_b = chain_b[_dp_keep(chain_b, eps)]
    merged = np.concatenate([kept_a[:-1], kept_b[:-1]], axis=0)
    return Polyline(merged, closed=True)


def split_at_longest_diagonal(poly: Polyline):
    """Split a closed polyline at its longest non-adjacent vertex pair.

    Returns two open chains that share the two split vertices. Ties pick the
    lexicographically smallest (i, j) index pair.
    """
    if not poly.closed or len(poly) < 4:
        raise GeometryError("split needs a closed polyline with >= 4 vertices")
    pts = poly.points
    i, j, best = _farthest_pair(pts, exclude_adjacent=True)
    if best <= 0.0:
        raise GeometryError("no non-adjacent vertex pair with positive length")
    chain_a = Polyline(pts[i: j + 1], closed=False)
    chain_b = Polyline(np.concatenate([pts[j:], pts[: i + 1]], axis=0), closed=False)
    return chain_a, chain_b


def polygon_area(poly: Polyline) -> float:
    """Absolute shoelace area of a closed polyline."""
    if not poly.closed:
        raise GeometryError("area is defined for closed polylines only")
    return abs(signed_area(poly.points))


# ---------------------------------------------------------------------------
# Least-squares cubic fitting

def _chord_params(points: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(np.diff(points, axis=0), axis=1)
    u = np.concatenate([[0.0], np.cumsum(d)])
    total = u[-1]
    if total == 0.0:
        raise GeometryError("degenerate fit input: all points identical")
    return u / total


def _ls_cubic(points: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Least-squares cubic through fixed endpoints with free inner controls."""
    p0 = points[0]
    p3 = points[-1]
    w = _bernstein3(u)
    b1 = w[:, 1]
    b2 = w[:, 2]
    rhs = points - np.outer(w[:, 0], p0) - np.outer(w[:, 3], p3)
    a11 = float(b1 @ b1)
    a12 = float(b1 @ b2)
    a22 = float(b2 @ b2)
    det = a11 * a22 - a12 * a12
    chord = p3 - p0
    if abs(det) < 1e-12:
        p1 = p0 + chord / 3.0
        p2 = p0 + 2.0 * chord / 3.0
    else:
        r1 = b1 @ rhs
        r2 = b2 @ rhs
        p1 = (a22 * r1 - a12 * r2) / det
        p2 = (a11 * r2 - a12 * r1) / det
    return np.vstack([p0, p1, p2, p3])


def _newton_reparam(pts: np.ndarray, points: np.ndarray, u: np.ndarray) -> np.ndarray:
    """One Newton step moving each parameter toward its foot point."""
    c = pts
    d1 = 3.0 * (c[1:] - c[:-1])  # quadratic derivative control points
    d2 = 2.0 * (d1[1:] - d1[:-1])
    uu = u.copy()
    t = uu
    om = 1.0 - t
    b = _bernstein3(t) @ c
    bp = (om * om)[:, None] * d1[0] + (2 * om * t)[:, None] * d1[1] + (t * t)[:, None] * d1[2]
    bpp = om[:, None] * d2[0] + t[:, None] * d2[1]
    diff = b - points
    num = np.sum(diff * bp, axis=1)
    den = np.sum(bp * bp, axis=1) + np.sum(diff * bpp, axis=1)
    ok = np.abs(den) > 1e-12
    uu[ok] = np.clip(t[ok] - num[ok] / den[ok], 0.0, 1.0)
    uu[0] = 0.0
    uu[-1] = 1.0
    return uu


def _fit_single(points: np.ndarray, iterations: int = 25):
    u = _chord_params(points)
    pts = _ls_cubic(points, u)
    err, split = _max_fit_error(pts, points, u)
    for _ in range(iterations):
        u2 = _newton_reparam(pts, points, u)
        pts2 = _ls_cubic(points, u2)
        err2, split2 = _max_fit_error(pts2, points, u2)
        if err2 >= err * 0.98:  # converged or stalled
            if err2 < err:
                u, pts, err, split = u2, pts2, err2, split2
            break
        u, pts, err, split = u2, pts2, err2, split2
    return pts, err, split


def _max_fit_error(pts: np.ndarray, points: np.ndarray, u: np.ndarray):
    d = _bernstein3(u) @ pts - points
    dist = np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2)
    k = int(np.argmax(dist))
    return float(dist[k]), k


def fit_bezier_chain(line: Polyline, max_segments: int = 8, tol: float = 1.0) -> list:
    """Fit a C0 chain of cubics to a polyline by recursive splitting.

    Chord-length parameterized least squares with Newton refinement; splits at
    the max-error point until the error drops below ``tol`` (canvas units) or
    the segment budget is exhausted. The chain interpolates the input
    endpoints exactly.
    """
    if not (1 <= max_segments <= 8):
        raise GeometryError("max_segments must be in [1, 8]")
    pts = line.points
    if line.closed:
        pts = np.concatenate([pts, pts[:1]], axis=0)
    if np.max(np.abs(pts - pts[0])) == 0.0:
        raise GeometryError("degenerate fit input: all points identical")

    def fit(points: np.ndarray, budget: int) -> list:
        if len(points) == 2:
            chord = points[1] - points[0]
            return [np.vstack([points[0], points[0] + chord / 3.0,
                               points[0] + 2.0 * chord / 3.0, points[1]])]
        cps, err, split = _fit_single(points)
        if err <= tol or budget <= 1 or len(points) < 4:
            return [cps]
        split = min(max(split, 1), len(points) - 2)
        left_budget = int(round(budget * split / (len(points) - 1)))
        left_budget = min(max(left_budget, 1), budget - 1)
        return fit(points[: split + 1], left_budget) + fit(points[split:], budget - left_budget)

    return [CubicBezier(c) for c in fit(pts, max_segments)]
