"""Shared builders for tests: simple paths, random documents, hierarchies."""

import numpy as np

from layervec import maskio
from layervec.document import RegionNode, VectorDocument, get_parameters, set_parameters
from layervec.geometry import BezierPath, CubicBezier

CIRCLE_K = 0.5522847498307936


def line_segment(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return CubicBezier(np.vstack([a, a + (b - a) / 3, a + 2 * (b - a) / 3, b]))


def rect_path(x0, y0, x1, y1):
    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)
    return BezierPath(tuple(line_segment(corners[i], corners[(i + 1) % 4]) for i in range(4)))


def circle_path(cx, cy, r):
    k = CIRCLE_K * r
    quads = [
        [(cx + r, cy), (cx + r, cy + k), (cx + k, cy + r), (cx, cy + r)],
        [(cx, cy + r), (cx - k, cy + r), (cx - r, cy + k), (cx - r, cy)],
        [(cx - r, cy), (cx - r, cy - k), (cx - k, cy - r), (cx, cy - r)],
        [(cx, cy - r), (cx + k, cy - r), (cx + r, cy - k), (cx + r, cy)],
    ]
    return BezierPath(tuple(CubicBezier(np.array(q, dtype=float)) for q in quads))


def blob_path(cx, cy, r, n, rng, wobble=0.18, handle=0.08):
    """Random smooth closed blob with n cubic segments.

    Default wobble/handle keep the curve simple (non-self-intersecting),
    which the soft-coverage gradient model assumes.
    """
    ths = np.linspace(0, 2 * np.pi, n, endpoint=False)
    radii = r * (1 + wobble * rng.uniform(-1, 1, n))
    pts = np.stack([cx + radii * np.cos(ths), cy + radii * np.sin(ths)], axis=1)
    segs = []
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        h1 = a + (b - a) / 3 + rng.uniform(-handle, handle, 2) * r
        h2 = a + 2 * (b - a) / 3 + rng.uniform(-handle, handle, 2) * r
        segs.append(CubicBezier(np.vstack([a, h1, h2, b])))
    return BezierPath(tuple(segs))


def random_document(rng, width=64, height=64, channels=3, max_children=2):
    """Random 2-3 layer document with unique ids and valid structure."""
    roots = []
    rid = 0

    def new_node(layer, cx, cy, r):
        nonlocal rid
        node = RegionNode(
            id=f"n{rid:03d}", layer=layer,
            path=blob_path(cx, cy, r, int(rng.integers(3, 7)), rng),
            fill=rng.uniform(0.05, 0.95, channels))
        rid += 1
        return node

    for _ in range(int(rng.integers(1, 4))):
        cx, cy = rng.uniform(12, width - 12), rng.uniform(12, height - 12)
        root = new_node(1, cx, cy, rng.uniform(8, 16))
        for _ in range(int(rng.integers(0, max_children + 1))):
            child = new_node(2, cx + rng.uniform(-4, 4), cy + rng.uniform(-4, 4),
                             rng.uniform(3, 7))
            root.children.append(child)
            if rng.random() < 0.4:
                child.children.append(
                    new_node(3, cx + rng.uniform(-3, 3), cy + rng.uniform(-3, 3),
                             rng.uniform(1.5, 3.5)))
        roots.append(root)
    return VectorDocument(roots, width, height, channels)


def hierarchy_from_levels(levels, width, height, tau_occ=1.0, tau_parent=0.5):
    stack = maskio.RawMaskStack(
        tuple((t, tuple(masks)) for t, masks in levels), width, height)
    return maskio.link_parents(maskio.assign_masks_to_layers(stack, tau_occ), tau_parent)


def perturb_document(doc, rng, magnitude):
    """Translate every region (all subpaths) by a random direction times magnitude."""
    out = []
    for pts, fill in get_parameters(doc):
        th = rng.uniform(0, 2 * np.pi)
        d = magnitude * np.array([np.cos(th), np.sin(th)])
        out.append(([a + d for a in pts], fill))
    return set_parameters(doc, out)
