"""Procedural test scenes with exact mask stacks.

Natural photographs cannot ship with the repo, so the bundled evaluation set
is generated here: deterministic landscape-style compositions (sky, ground,
sun, clouds, mountains, trees, houses) painted layer by layer, every painted
element recorded as a binary mask at the hierarchy level it belongs to.
Masks are exhaustive and non-overlapping within a level, and children are
fully contained in their parents, so the stacks satisfy the ingestion rules
by construction.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .maskio import write_mask_stack
from .raster import RasterImage, save_image
from .rng import stream


def _grid(h, w):
    yy, xx = np.mgrid[0:h, 0:w]
    return yy + 0.5, xx + 0.5


def disk_mask(h, w, cy, cx, r):
    yy, xx = _grid(h, w)
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r


def ellipse_mask(h, w, cy, cx, ry, rx):
    yy, xx = _grid(h, w)
    return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0


def rect_mask(h, w, y0, y1, x0, x1):
    m = np.zeros((h, w), dtype=bool)
    m[max(0, int(y0)):int(y1), max(0, int(x0)):int(x1)] = True
    return m


def polygon_mask(h, w, pts):
    """Even-odd fill of a polygon given as (N, 2) xy vertices."""
    yy, xx = _grid(h, w)
    inside = np.zeros((h, w), dtype=bool)
    pts = np.asarray(pts, dtype=np.float64)
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        if y0 == y1:
            continue
        crosses = (y0 <= yy) != (y1 <= yy)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (yy - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (xx < xint)
    return inside


def _paint(img, mask, color, grad, h, w):
    yy, xx = _grid(h, w)
    shade = (grad[0] * (xx / w - 0.5) + grad[1] * (yy / h - 0.5))[:, :, None]
    img[mask] = np.clip(np.asarray(color) + shade[mask], 0.0, 1.0)


def three_shape_scene():
    """64x64 regression fixture: background plus two foreground shapes."""
    h = w = 64
    img = np.zeros((h, w, 3))
    bg = np.ones((h, w), dtype=bool)
    circle = disk_mask(h, w, 24.0, 22.0, 13.0)
    square = rect_mask(h, w, 34, 56, 36, 58)
    _paint(img, bg, (0.82, 0.86, 0.90), (0.04, 0.05), h, w)
    _paint(img, circle, (0.85, 0.30, 0.25), (-0.05, 0.04), h, w)
    _paint(img, square, (0.20, 0.45, 0.80), (0.05, -0.04), h, w)
    levels = [(1, [bg]), (2, [circle, square])]
    return RasterImage(img), levels


_SKYS = [((0.45, 0.65, 0.85), (0.75, 0.85, 0.95)), ((0.85, 0.65, 0.45), (0.95, 0.85, 0.70)),
         ((0.30, 0.40, 0.65), (0.60, 0.70, 0.85)), ((0.55, 0.70, 0.90), (0.85, 0.90, 0.97))]
_GROUNDS = [(0.35, 0.55, 0.30), (0.55, 0.50, 0.35), (0.30, 0.45, 0.35), (0.60, 0.55, 0.40)]


def natural_scene(index: int, size: int = 512):
    """Deterministic landscape composition number ``index``.

    Returns (image, levels) with levels = [(t, [masks])] suitable for
    write_mask_stack; every mask is the exact support of one painted element.
    """
    h = w = size
    rng = stream(1000 + index, "scene")
    img = np.zeros((h, w, 3))
    horizon = int(h * rng.uniform(0.52, 0.68))

    sky = rect_mask(h, w, 0, horizon, 0, w)
    ground = rect_mask(h, w, horizon, h, 0, w)
    sky_top, sky_bot = _SKYS[index % len(_SKYS)]
    yy, xx = _grid(h, w)
    tgrad = (yy / horizon).clip(0, 1)[:, :, None]
    img[sky] = (np.asarray(sky_top) * (1 - tgrad) + np.asarray(sky_bot) * tgrad)[sky]
    _paint(img, ground, _GROUNDS[index % len(_GROUNDS)], (0.06, 0.08), h, w)

    level2 = []
    level3 = []

    # sun with a brighter core
    sr = rng.uniform(0.05, 0.09) * h
    scy = rng.uniform(0.12, 0.35) * horizon
    scx = rng.uniform(0.15, 0.85) * w
    sun = disk_mask(h, w, scy, scx, sr) & sky
    _paint(img, sun, (0.98, 0.85, 0.40), (0.02, 0.02), h, w)
    level2.append(sun)
    core = disk_mask(h, w, scy, scx, sr * 0.55) & sky
    _paint(img, core, (1.0, 0.95, 0.70), (0.0, 0.0), h, w)
    level3.append(core)

    # one or two mountains rising from the horizon
    n_mountains = int(rng.integers(1, 3))
    mx = rng.uniform(0.1, 0.5) * w
    for k in range(n_mountains):
        base = rng.uniform(0.25, 0.45) * w
        peak_h = rng.uniform(0.3, 0.6) * horizon
        apex_x = mx + base / 2
        tri = np.array([[mx, horizon], [mx + base, horizon], [apex_x, horizon - peak_h]])
        mountain = polygon_mask(h, w, tri) & sky & ~sun
        if mountain.sum() < 400:
            continue
        _paint(img, mountain, (0.40 + 0.08 * k, 0.38, 0.42), (-0.05, 0.08), h, w)
        level2.append(mountain)
        cap = mountain & (yy < horizon - 0.7 * peak_h)
        if cap.sum() > 200:
            _paint(img, cap, (0.92, 0.93, 0.96), (0.0, 0.03), h, w)
            level3.append(cap)
        mx = apex_x + rng.uniform(0.05, 0.2) * w
        if mx > 0.7 * w:
            break

    # clouds clear of the sun and mountains
    occupied = np.zeros((h, w), dtype=bool)
    for m in level2:
        occupied |= m
    for _ in range(int(rng.integers(1, 3))):
        ccy = rng.uniform(0.1, 0.5) * horizon
        ccx = rng.uniform(0.1, 0.9) * w
        cry = rng.uniform(0.02, 0.04) * h
        crx = cry * rng.uniform(2.2, 3.5)
        cloud = (ellipse_mask(h, w, ccy, ccx, cry, crx)
                 | ellipse_mask(h, w, ccy - cry * 0.7, ccx + crx * 0.4, cry * 0.8, crx * 0.6))
        cloud &= sky & ~occupied
        if cloud.sum() < 500 or (cloud.sum() and np.logical_and(cloud, occupied).any()):
            continue
        _paint(img, cloud, (0.96, 0.96, 0.97), (0.0, 0.02), h, w)
        level2.append(cloud)
        occupied |= cloud

    # ground objects: trees and a house
    gy0 = horizon + 0.1 * (h - horizon)
    slots = np.linspace(0.1, 0.9, 5) * w
    rng.shuffle(slots)
    ground_busy = np.zeros((h, w), dtype=bool)
    for k in range(int(rng.integers(1, 4))):
        cx = slots[k]
        if rng.random() < 0.6:  # tree: canopy with trunk notch kept simple
            r = rng.uniform(0.04, 0.07) * h
            cy = gy0 + rng.uniform(0.2, 0.6) * (h - gy0 - r)
            tree = disk_mask(h, w, cy, cx, r) & ground & ~ground_busy
            if tree.sum() < 400:
                continue
            _paint(img, tree, (0.15, 0.40, 0.20), (0.04, -0.05), h, w)
            level2.append(tree)
            inner = disk_mask(h, w, cy - r * 0.25, cx - r * 0.2, r * 0.45) & tree
            if inner.sum() > 150:
                _paint(img, inner, (0.25, 0.55, 0.28), (0.02, 0.0), h, w)
                level3.append(inner)
            ground_busy |= tree
        else:  # house: body plus a door
            bw = rng.uniform(0.08, 0.13) * w
            bh = bw * rng.uniform(0.6, 0.9)
            y1 = gy0 + rng.uniform(0.3, 0.7) * (h - gy0 - bh)
            house = rect_mask(h, w, y1, y1 + bh, cx - bw / 2, cx + bw / 2) & ground & ~ground_busy
            if house.sum() < 400:
                continue
            _paint(img, house, (0.70, 0.55, 0.40), (0.05, 0.02), h, w)
            level2.append(house)
            door = rect_mask(h, w, y1 + bh * 0.45, y1 + bh, cx - bw * 0.12, cx + bw * 0.12) & house
            if door.sum() > 120:
                _paint(img, door, (0.35, 0.22, 0.15), (0.0, 0.0), h, w)
                level3.append(door)
            ground_busy |= house

    levels = [(1, [sky, ground]), (2, level2)]
    if level3:
        levels.append((3, level3))
    return RasterImage(img), levels


def write_scene(dirpath, image: RasterImage, levels) -> None:
    """Write image.png plus a masks/ stack directory."""
    root = Path(dirpath)
    root.mkdir(parents=True, exist_ok=True)
    save_image(image, root / "image.png")
    write_mask_stack(root / "masks", levels, image.width, image.height)
