"""Semantic mask-stack ingestion and hierarchy assembly.

A mask stack is a directory with a ``manifest.json``::

    {"width": W, "height": H,
     "levels": [{"t": 1, "masks": ["level_1/m_0.png", ...]}, ...]}

Each mask is an 8-bit single-channel image; pixels with value >= 128 are
foreground. Level index t orders levels coarse to fine and maps one-to-one
onto hierarchy layers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError

FG_THRESHOLD = 128  # 8-bit; >= is foreground

ROOT_ID = "root"


@dataclass(frozen=True)
class MaskEntry:
    mask_id: str
    mask: np.ndarray  # (H, W) bool
    parent_id: str | None = None
    source: str = ""  # originating file, for error messages


@dataclass(frozen=True)
class MaskLayer:
    level: int  # 1-based hierarchy level
    masks: tuple


@dataclass(frozen=True)
class MaskHierarchy:
    layers: tuple
    width: int
    height: int

    def entries(self):
        for layer in self.layers:
            yield from layer.masks

    def find(self, mask_id: str) -> MaskEntry | None:
        for e in self.entries():
            if e.mask_id == mask_id:
                return e
        return None


@dataclass(frozen=True)
class RawMaskStack:
    levels: tuple  # of (t, tuple of (H, W) bool arrays)
    width: int
    height: int
    names: tuple = ()  # per level: tuple of file names


def load_mask_stack(path) -> RawMaskStack:
    """Load and threshold a mask-stack directory."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise FormatError(f"missing manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"unreadable manifest {manifest_path}: {exc}") from exc
    try:
        width = int(manifest["width"])
        height = int(manifest["height"])
        raw_levels = manifest["levels"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"manifest {manifest_path} missing width/height/levels") from exc
    if not raw_levels:
        raise FormatError(f"manifest {manifest_path} has no levels")

    levels = []
    names = []
    for entry in sorted(raw_levels, key=lambda e: int(e["t"])):
        t = int(entry["t"])
        files = entry.get("masks", [])
        if not files:
            raise FormatError(f"level t={t} in {manifest_path} lists no masks")
        masks = []
        for rel in files:
            fpath = root / rel
            if not fpath.is_file():
                raise FormatError(f"missing mask file: {fpath}")
            with Image.open(fpath) as im:
                arr = np.asarray(im.convert("L"))
            if arr.shape != (height, width):
                raise FormatError(
                    f"dimension mismatch in {fpath}: got {arr.shape[::-1]}, "
                    f"manifest says {(width, height)}")
            masks.append(arr >= FG_THRESHOLD)
        levels.append((t, tuple(masks)))
        names.append(tuple(files))
    return RawMaskStack(tuple(levels), width, height, tuple(names))


def assign_masks_to_layers(stack: RawMaskStack, tau_occ: float = 0.9) -> MaskHierarchy:
    """Build layers coarse to fine, discarding masks mostly occluded by
    already-accepted ones.

    Within a level, masks are processed by descending pixel count (ties by
    manifest order). A mask is discarded when its overlap with the union of
    everything accepted so far exceeds ``tau_occ`` of its own area.
    """
    if not (0.0 < tau_occ <= 1.0):
        raise FormatError(f"tau_occ must be in (0, 1], got {tau_occ}")
    if not stack.levels:
        raise FormatError("empty mask stack")
    accepted_union = np.zeros((stack.height, stack.width), dtype=bool)
    layers = []
    for li, (t, masks) in enumerate(stack.levels):
        names = stack.names[li] if li < len(stack.names) else ("",) * len(masks)
        order = sorted(range(len(masks)), key=lambda i: (-int(masks[i].sum()), i))
        entries = []
        for i in order:
            mask = masks[i]
            area = int(mask.sum())
            if area == 0:
                continue
            overlap = int(np.logical_and(mask, accepted_union).sum())
            if overlap > tau_occ * area:
                continue
            entries.append(MaskEntry(
                mask_id=f"m{t}_{i:03d}", mask=mask,
                source=names[i] if i < len(names) else ""))
            accepted_union |= mask
        layers.append(MaskLayer(level=t, masks=tuple(entries)))
    return MaskHierarchy(tuple(layers), stack.width, stack.height)


def link_parents(h: MaskHierarchy, tau_parent: float = 0.5) -> MaskHierarchy:
    """Attach each mask in layer k>1 to the preceding-layer mask covering the
    largest fraction of it (>= tau_parent), else to the synthetic root."""
    if not h.layers:
        raise FormatError("hierarchy has no layers")
    new_layers = [h.layers[0]]
    for k in range(1, len(h.layers)):
        parents = h.layers[k - 1].masks
        entries = []
        for child in h.layers[k].masks:
            area = int(child.mask.sum())
            best_frac = -1.0
            candidates = []
            for p in parents:
                frac = int(np.logical_and(child.mask, p.mask).sum()) / area if area else 0.0
                if frac > best_frac:
                    best_frac = frac
                    candidates = [p.mask_id]
                elif frac == best_frac:
                    candidates.append(p.mask_id)
            parent_id = None
            if candidates and best_frac >= tau_parent:
                parent_id = min(candidates)
            entries.append(replace(child, parent_id=parent_id))
        new_layers.append(MaskLayer(level=h.layers[k].level, masks=tuple(entries)))
    return MaskHierarchy(tuple(new_layers), h.width, h.height)


def validate_hierarchy(h: MaskHierarchy, tau_excl: float = 0.1,
                       tau_parent: float = 0.5) -> list:
    """Check hierarchy invariants; returns a list of violation strings."""
    issues = []
    seen = set()
    for layer in h.layers:
        for e in layer.masks:
            if e.mask_id in seen:
                issues.append(f"duplicate mask id {e.mask_id}")
            seen.add(e.mask_id)
            if e.mask.shape != (h.height, h.width):
                issues.append(f"{e.mask_id}: shape {e.mask.shape} != {(h.height, h.width)}")
    for layer in h.layers:
        masks = layer.masks
        for i in range(len(masks)):
            for j in range(i + 1, len(masks)):
                a, b = masks[i], masks[j]
                smaller = min(int(a.mask.sum()), int(b.mask.sum()))
                if smaller == 0:
                    continue
                overlap = int(np.logical_and(a.mask, b.mask).sum())
                frac = overlap / smaller
                if frac >= tau_excl:
                    issues.append(
                        f"layer {layer.level}: {a.mask_id} and {b.mask_id} overlap "
                        f"{frac:.3f} of the smaller mask (>= {tau_excl})")
    for k, layer in enumerate(h.layers):
        ids_above = {e.mask_id: e for e in h.layers[k - 1].masks} if k > 0 else {}
        for e in layer.masks:
            if k == 0:
                if e.parent_id is not None:
                    issues.append(f"{e.mask_id}: first-layer mask has parent {e.parent_id}")
                continue
            if e.parent_id is None:
                continue  # synthetic root
            parent = ids_above.get(e.parent_id)
            if parent is None:
                issues.append(f"{e.mask_id}: orphaned child, parent {e.parent_id} "
                              f"not in layer {h.layers[k - 1].level}")
                continue
            area = int(e.mask.sum())
            if area:
                frac = int(np.logical_and(e.mask, parent.mask).sum()) / area
                if frac < tau_parent:
                    issues.append(f"{e.mask_id}: parent {e.parent_id} covers only "
                                  f"{frac:.3f} (< {tau_parent})")
    return issues


def build_hierarchy(path, tau_occ: float = 0.9, tau_parent: float = 0.5) -> MaskHierarchy:
    """Load, layer, and parent-link a mask stack in one call."""
    stack = load_mask_stack(path)
    return link_parents(assign_masks_to_layers(stack, tau_occ), tau_parent)


def write_mask_stack(path, levels, width: int, height: int) -> None:
    """Write masks as a stack directory; ``levels`` is [(t, [bool arrays])]."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {"width": width, "height": height, "levels": []}
    for t, masks in levels:
        subdir = root / f"level_{t}"
        subdir.mkdir(exist_ok=True)
        files = []
        for i, mask in enumerate(masks):
            rel = f"level_{t}/m_{i}.png"
            arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
            Image.fromarray(arr, mode="L").save(root / rel)
            files.append(rel)
        manifest["levels"].append({"t": t, "masks": files})
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1))
