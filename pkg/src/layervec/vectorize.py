"""Image-to-vector pipeline: hierarchical initialization from semantic masks
and joint gradient optimization of control points and fill colors.

The training objective matches every region's soft coverage against its own
binary mask (L1, mean over the full canvas) and adds a gamma-weighted L1
reconstruction term between the composited render and the target image. All
L1 reductions are means, which keeps gamma resolution-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rasterizer
from .document import (RegionNode, VectorDocument, get_parameters, iter_nodes,
                       set_parameters)
from .errors import FormatError, GeometryError, NumericError
from .geometry import (BezierPath, Polyline, douglas_peucker, fit_bezier_chain,
                       polygon_area, split_at_longest_diagonal, trace_mask_contours)
from .maskio import MaskHierarchy
from .optim import Adam
from .raster import RasterImage
from .rasterizer import GradientSet, RegionRenderParams


@dataclass(frozen=True)
class OptimizeConfig:
    steps: int = 30
    gamma: float = 1.0  # weight of the reconstruction term
    lr_points: float = 0.5  # px per step
    lr_colors: float = 0.02  # unit range per step
    sigma_r: float = 0.7
    supersample: int = 2
    v_max: int = 24  # simplified-polygon size that triggers the diagonal split
    simplify_eps: float = 2.0  # Douglas-Peucker epsilon, px
    fit_tol: float = 1.0  # max chordal error of the cubic fit, px
    max_segments: int = 8  # hard cap per fitted side
    background: float = 1.0

    def __post_init__(self):
        if self.steps < 0:
            raise FormatError("steps must be >= 0")
        if self.gamma < 0:
            raise FormatError("gamma must be >= 0")

    def render_params(self) -> RegionRenderParams:
        return RegionRenderParams(soft_bandwidth=self.sigma_r,
                                  supersample=self.supersample)


def _densify(poly: Polyline, spacing: float = 3.0) -> Polyline:
    """Insert collinear samples so consecutive points are <= spacing apart.

    The Douglas-Peucker pass decides complexity; fitting still needs enough
    samples along each straight edge to keep the least squares honest.
    """
    pts = poly.points
    if poly.closed:
        pts = np.concatenate([pts, pts[:1]], axis=0)
    out = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(np.ceil(np.linalg.norm(b - a) / spacing)))
        for k in range(1, n + 1):
            out.append(a + (b - a) * (k / n))
    arr = np.asarray(out)
    if poly.closed:
        arr = arr[:-1]
    return Polyline(arr, closed=poly.closed)


def _fit_contour(poly: Polyline, cfg: OptimizeConfig) -> tuple:
    """Simplify, optionally split at the longest diagonal, and fit cubics.

    Returns the fitted segments of one closed loop.
    """
    simp = douglas_peucker(poly, cfg.simplify_eps)
    if len(simp) < 3:
        simp = poly
    if len(simp) > cfg.v_max and len(simp) >= 4:
        side_a, side_b = split_at_longest_diagonal(simp)
        segs = (fit_bezier_chain(_densify(side_a), cfg.max_segments, cfg.fit_tol)
                + fit_bezier_chain(_densify(side_b), cfg.max_segments, cfg.fit_tol))
    else:
        segs = fit_bezier_chain(_densify(simp), cfg.max_segments, cfg.fit_tol)
    return tuple(segs)


def init_document(image: RasterImage, h: MaskHierarchy,
                  cfg: OptimizeConfig = OptimizeConfig()) -> VectorDocument:
    """Build the initial document: one region per accepted mask, fitted from
    its traced boundary, filled with the mask's mean image color."""
    if (image.height, image.width) != (h.height, h.width):
        raise FormatError(
            f"image is {image.width}x{image.height}, hierarchy {h.width}x{h.height}")
    entries = list(h.entries())
    if not entries:
        raise FormatError("hierarchy has no masks")

    nodes = {}
    parent_of = {}
    layer_index = {layer.level: k + 1 for k, layer in enumerate(h.layers)}
    for layer in h.layers:
        for e in layer.masks:
            contours = trace_mask_contours(e.mask)
            if not contours:
                continue
            # largest component is the main outline; other components and
            # holes become extra even-odd subpaths of the same region
            contours = sorted(contours, key=lambda c: -polygon_area(c[0]))
            outer_path = BezierPath(_fit_contour(contours[0][0], cfg))
            extra = []
            for outer, holes in contours:
                if outer is not contours[0][0]:
                    extra.append(BezierPath(_fit_contour(outer, cfg)))
                for hole in holes:
                    extra.append(BezierPath(_fit_contour(hole, cfg)))
            fill = image.data[e.mask].mean(axis=0)
            nodes[e.mask_id] = RegionNode(
                id=e.mask_id, layer=layer_index[layer.level], path=outer_path,
                holes=extra, fill=fill, source_mask_id=e.mask_id)
            parent_of[e.mask_id] = e.parent_id

    roots = []
    for mid, node in nodes.items():
        pid = parent_of[mid]
        if pid is not None and pid in nodes:
            nodes[pid].children.append(node)
        else:
            roots.append(node)
    if not roots:
        raise FormatError("hierarchy produced no root regions")
    return VectorDocument(roots, h.width, h.height, image.channels)


def recon_loss(render: RasterImage, target: RasterImage) -> float:
    """Mean absolute difference over all pixels and channels."""
    if render.data.shape != target.data.shape:
        raise FormatError(
            f"shape mismatch {render.data.shape} vs {target.data.shape}")
    return float(np.mean(np.abs(render.data - target.data)))


def _mask_lookup(h: MaskHierarchy) -> dict:
    return {e.mask_id: e.mask for e in h.entries()}


def _mask_term(mask_f: np.ndarray, rr, n_px: int):
    """Mean-|mask - coverage| over the whole canvas plus the bbox gradient."""
    if rr.empty:
        return float(mask_f.sum()) / n_px, None
    x0, y0, x1, y1 = rr.bbox
    crop = mask_f[y0:y1, x0:x1]
    delta = rr.cov - crop
    outside = float(mask_f.sum()) - float(crop.sum())
    term = (float(np.abs(delta).sum()) + outside) / n_px
    return term, np.sign(delta) / n_px


def structure_loss(doc: VectorDocument, h: MaskHierarchy, target: RasterImage,
                   gamma: float = 1.0, params: RegionRenderParams = RegionRenderParams(),
                   background: float = 1.0):
    """Total objective: per-region mask matching plus gamma * reconstruction.

    Returns (total, parts) where parts holds the mask term per layer and the
    reconstruction term.
    """
    dr = rasterizer.forward_document(doc, params, None, background)
    masks = _mask_lookup(h)
    n_px = target.height * target.width
    per_layer: dict = {}
    for node, rr in zip(dr.nodes, dr.rasters):
        if node.source_mask_id is None or node.source_mask_id not in masks:
            raise FormatError(f"region {node.id} is not linked to a hierarchy mask")
        term, _ = _mask_term(masks[node.source_mask_id].astype(np.float64), rr, n_px)
        per_layer[node.layer] = per_layer.get(node.layer, 0.0) + term
    rec = recon_loss(RasterImage(dr.image), target)
    total = sum(per_layer.values()) + gamma * rec
    return total, {"mask": per_layer, "recon": rec, "total": total}


def _loss_and_grad(doc, masks, target, cfg: OptimizeConfig):
    params = cfg.render_params()
    dr = rasterizer.forward_document(doc, params, None, cfg.background,
                                     store_under=True)
    n_px = target.height * target.width
    diff = dr.image - target.data
    rec = float(np.mean(np.abs(diff)))
    grad_img = (cfg.gamma / diff.size) * np.sign(diff)
    per_layer: dict = {}
    extra = {}
    for node, rr in zip(dr.nodes, dr.rasters):
        if node.source_mask_id is None or node.source_mask_id not in masks:
            raise FormatError(f"region {node.id} is not linked to a hierarchy mask")
        term, dcov = _mask_term(masks[node.source_mask_id], rr, n_px)
        per_layer[node.layer] = per_layer.get(node.layer, 0.0) + term
        if dcov is not None:
            extra[node.id] = dcov
    gs = rasterizer.backward_document(doc, dr, params, grad_img, extra)
    total = sum(per_layer.values()) + cfg.gamma * rec
    return total, {"mask": per_layer, "recon": rec, "total": total}, gs


def _flatten_grads(doc, gs: GradientSet):
    flat = []
    for node in iter_nodes(doc):
        flat.extend(gs.points[node.id])
        flat.append(gs.fills[node.id])
    return flat


def optimize(doc: VectorDocument, h: MaskHierarchy, target: RasterImage,
             cfg: OptimizeConfig = OptimizeConfig()):
    """Adam on all control points and fills against the structure objective.

    Returns (optimized document, loss trace); trace row i is
    (step, total, mask_term, recon_term) evaluated after i updates, so the
    first row is the initial loss and the last row the final loss.
    """
    if (target.height, target.width) != (doc.height, doc.width):
        raise FormatError("target size does not match document canvas")
    masks = {e.mask_id: e.mask.astype(np.float64) for e in h.entries()}

    struct = get_parameters(doc)
    flat = []
    lrs = []
    for pts, fill in struct:
        flat.extend(pts)
        lrs.extend([cfg.lr_points] * len(pts))
        flat.append(fill)
        lrs.append(cfg.lr_colors)
    opt = Adam(flat)

    trace = []
    cur = doc
    for step in range(cfg.steps):
        total, parts, gs = _loss_and_grad(cur, masks, target, cfg)
        if not (np.isfinite(total) and gs.all_finite()):
            raise NumericError(f"non-finite loss or gradient at step {step}", step=step)
        trace.append((step, total, sum(parts["mask"].values()), parts["recon"]))
        grads = _flatten_grads(cur, gs)
        flat = opt.step(flat, grads, lrs)
        # repack: point arrays per node, then the fill (clamped to unit range)
        new_struct = []
        i = 0
        for pts, fill in struct:
            new_pts = flat[i: i + len(pts)]
            i += len(pts)
            new_fill = np.clip(flat[i], 0.0, 1.0)
            flat[i] = new_fill
            i += 1
            new_struct.append((new_pts, new_fill))
        struct = new_struct
        cur = set_parameters(doc, struct)
    total, parts, _ = _loss_and_grad(cur, masks, target, cfg)
    trace.append((cfg.steps, total, sum(parts["mask"].values()), parts["recon"]))
    return cur, trace


def region_iou(doc: VectorDocument, h: MaskHierarchy,
               params: RegionRenderParams = RegionRenderParams()) -> dict:
    """IoU of each region's binarized coverage (>= 0.5) vs its source mask."""
    masks = _mask_lookup(h)
    dr = rasterizer.forward_document(doc, params)
    out = {}
    for node, rr in zip(dr.nodes, dr.rasters):
        mask = masks.get(node.source_mask_id)
        if mask is None:
            continue
        covered = np.zeros_like(mask, dtype=bool)
        if not rr.empty:
            x0, y0, x1, y1 = rr.bbox
            covered[y0:y1, x0:x1] = rr.cov >= 0.5
        union = np.logical_or(covered, mask).sum()
        inter = np.logical_and(covered, mask).sum()
        out[node.id] = float(inter) / float(union) if union else 1.0
    return out
