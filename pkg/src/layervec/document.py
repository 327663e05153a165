"""Hierarchical vector document: a forest of closed, solid-filled regions.

Layer-1 regions are roots; orphaned deeper regions may also sit at the root.
Paint order is layer-major (layer 1 first), then pre-order position within a
layer, so upper layers composite over lower ones with opacity fixed at 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GeometryError
from .geometry import BezierPath


@dataclass
class RegionNode:
    id: str
    layer: int
    path: BezierPath
    fill: np.ndarray  # (C,) in [0, 1]
    holes: list = field(default_factory=list)  # BezierPath subpaths, even-odd
    children: list = field(default_factory=list)
    source_mask_id: str | None = None

    def subpaths(self):
        return [self.path] + list(self.holes)


@dataclass
class VectorDocument:
    roots: list
    width: int
    height: int
    channels: int = 3


def iter_nodes(doc: VectorDocument):
    """Pre-order traversal of the forest."""
    stack = list(reversed(doc.roots))
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def paint_order(doc: VectorDocument) -> list:
    """Layer-major paint order; within a layer, pre-order document position."""
    nodes = list(iter_nodes(doc))
    return sorted(range(len(nodes)), key=lambda i: (nodes[i].layer, i)), nodes


def painted_nodes(doc: VectorDocument) -> list:
    order, nodes = paint_order(doc)
    return [nodes[i] for i in order]


def find_node(doc: VectorDocument, node_id: str) -> RegionNode | None:
    for node in iter_nodes(doc):
        if node.id == node_id:
            return node
    return None


def node_count(doc: VectorDocument) -> int:
    return sum(1 for _ in iter_nodes(doc))


def depth(doc: VectorDocument) -> int:
    return max((n.layer for n in iter_nodes(doc)), default=0)


def copy_document(doc: VectorDocument) -> VectorDocument:
    def copy_node(n: RegionNode) -> RegionNode:
        return RegionNode(
            id=n.id, layer=n.layer, path=n.path, fill=n.fill.copy(),
            holes=list(n.holes), children=[copy_node(c) for c in n.children],
            source_mask_id=n.source_mask_id)

    return VectorDocument([copy_node(r) for r in doc.roots],
                          doc.width, doc.height, doc.channels)


# ---------------------------------------------------------------------------
# Optimization parameter view
#
# A region's geometric parameters are its deduplicated control points, one
# (3L, 2) array per subpath (outer first, then holes); rebuilding from these
# arrays keeps every subpath exactly closed.

def get_parameters(doc: VectorDocument):
    """Per-node (in pre-order) list of (point arrays, fill array) copies."""
    params = []
    for node in iter_nodes(doc):
        pts = [sp.control_points().copy() for sp in node.subpaths()]
        params.append((pts, node.fill.copy()))
    return params


def set_parameters(doc: VectorDocument, params) -> VectorDocument:
    """New document with the given packed parameters; structure is unchanged."""
    out = copy_document(doc)
    nodes = list(iter_nodes(out))
    if len(nodes) != len(params):
        raise GeometryError(f"parameter count {len(params)} != node count {len(nodes)}")
    for node, (pts, fill) in zip(nodes, params):
        subs = [BezierPath.from_control_points(np.asarray(a, dtype=np.float64)) for a in pts]
        node.path = subs[0]
        node.holes = list(subs[1:])
        node.fill = np.asarray(fill, dtype=np.float64)
    return out


def validate_document(doc: VectorDocument) -> list:
    """Structural invariant check; returns a list of violation strings."""
    issues = []
    seen = set()
    for node in iter_nodes(doc):
        if node.id in seen:
            issues.append(f"duplicate region id {node.id}")
        seen.add(node.id)
        if len(node.fill) != doc.channels:
            issues.append(f"{node.id}: fill has {len(node.fill)} channels, doc {doc.channels}")
        for child in node.children:
            if child.layer != node.layer + 1:
                issues.append(f"{child.id}: layer {child.layer}, parent layer {node.layer}")
    return issues
