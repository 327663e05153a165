import json

import numpy as np
import pytest
from PIL import Image

from layervec import maskio
from layervec.errors import FormatError


def _disk(h, w, cy, cx, r):
    yy, xx = np.mgrid[0:h, 0:w]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r


def _rect(h, w, y0, y1, x0, x1):
    m = np.zeros((h, w), dtype=bool)
    m[y0:y1, x0:x1] = True
    return m


@pytest.fixture
def stack_dir(tmp_path):
    def make(levels, width=32, height=32):
        maskio.write_mask_stack(tmp_path / "stack", levels, width, height)
        return tmp_path / "stack"

    return make


def test_load_single_level(stack_dir):
    d = stack_dir([(1, [np.ones((32, 32), bool)])])
    stack = maskio.load_mask_stack(d)
    assert len(stack.levels) == 1
    assert len(stack.levels[0][1]) == 1
    assert stack.levels[0][1][0].all()


def test_load_counts_preserved(stack_dir):
    d = stack_dir([
        (1, [_rect(32, 32, 0, 16, 0, 32), _rect(32, 32, 16, 32, 0, 32)]),
        (2, [_rect(32, 32, 2, 6, 2, 6), _rect(32, 32, 8, 12, 8, 12), _rect(32, 32, 20, 26, 4, 10)]),
    ])
    stack = maskio.load_mask_stack(d)
    assert [len(m) for _, m in stack.levels] == [2, 3]


def test_load_threshold_rule(stack_dir, tmp_path):
    d = stack_dir([(1, [np.ones((8, 8), bool)])], width=8, height=8)
    arr = np.full((8, 8), 127, dtype=np.uint8)
    arr[0, 0] = 128
    Image.fromarray(arr, mode="L").save(d / "level_1" / "m_0.png")
    stack = maskio.load_mask_stack(d)
    assert stack.levels[0][1][0].sum() == 1  # only the 128 pixel is foreground


def test_load_dimension_mismatch_names_file(stack_dir):
    d = stack_dir([(1, [np.ones((16, 16), bool)])], width=16, height=16)
    Image.fromarray(np.zeros((8, 8), np.uint8), mode="L").save(d / "level_1" / "m_0.png")
    with pytest.raises(FormatError, match="m_0.png"):
        maskio.load_mask_stack(d)


def test_load_missing_manifest(tmp_path):
    with pytest.raises(FormatError, match="manifest"):
        maskio.load_mask_stack(tmp_path / "nope")


def test_load_empty_level(tmp_path):
    d = tmp_path / "stack"
    d.mkdir()
    (d / "manifest.json").write_text(json.dumps(
        {"width": 8, "height": 8, "levels": [{"t": 1, "masks": []}]}))
    with pytest.raises(FormatError, match="t=1"):
        maskio.load_mask_stack(d)


def _stack(levels, w=32, h=32):
    return maskio.RawMaskStack(
        tuple((t, tuple(masks)) for t, masks in levels), w, h)


def test_assign_discards_duplicate_across_levels():
    m = _rect(32, 32, 4, 20, 4, 20)
    h = maskio.assign_masks_to_layers(_stack([(1, [m]), (2, [m.copy()])]), tau_occ=0.9)
    assert len(h.layers[0].masks) == 1
    assert len(h.layers[1].masks) == 0


def test_assign_keeps_disjoint_same_level():
    a = _rect(32, 32, 0, 8, 0, 8)
    b = _rect(32, 32, 16, 24, 16, 24)
    h = maskio.assign_masks_to_layers(_stack([(1, [a, b])]), tau_occ=0.9)
    assert len(h.layers[0].masks) == 2


def test_assign_threshold_boundary_behavior():
    a = _rect(32, 32, 0, 16, 0, 32)  # top half
    b = _rect(32, 32, 8, 24, 0, 32)  # half covered by a
    kept = maskio.assign_masks_to_layers(_stack([(1, [a]), (2, [b])]), tau_occ=0.9)
    assert len(kept.layers[1].masks) == 1
    dropped = maskio.assign_masks_to_layers(_stack([(1, [a]), (2, [b])]), tau_occ=0.4)
    assert len(dropped.layers[1].masks) == 0


def test_assign_matches_bruteforce_oracle():
    rng = np.random.default_rng(17)
    for _ in range(100):
        n_levels = int(rng.integers(1, 4))
        levels = []
        for t in range(1, n_levels + 1):
            masks = []
            for _ in range(int(rng.integers(1, 5))):
                cy, cx = rng.integers(4, 28, size=2)
                masks.append(_disk(32, 32, cy, cx, int(rng.integers(2, 10))))
            levels.append((t, masks))
        tau = float(rng.uniform(0.1, 1.0))
        got = maskio.assign_masks_to_layers(_stack(levels), tau_occ=tau)

        # oracle: literal pixel loops over the documented rule
        union = np.zeros((32, 32), bool)
        expect = []
        for t, masks in levels:
            order = sorted(range(len(masks)), key=lambda i: (-int(masks[i].sum()), i))
            ids = []
            for i in order:
                area = int(masks[i].sum())
                if area == 0:
                    continue
                inter = int((masks[i] & union).sum())
                if inter > tau * area:
                    continue
                ids.append(f"m{t}_{i:03d}")
                union = union | masks[i]
            expect.append(ids)
        assert [[e.mask_id for e in layer.masks] for layer in got.layers] == expect


def test_assign_deterministic():
    levels = [(1, [_disk(32, 32, 10, 10, 6), _disk(32, 32, 20, 20, 8)]),
              (2, [_disk(32, 32, 10, 10, 3)])]
    a = maskio.assign_masks_to_layers(_stack(levels))
    b = maskio.assign_masks_to_layers(_stack(levels))
    for la, lb in zip(a.layers, b.layers):
        for ea, eb in zip(la.masks, lb.masks):
            assert ea.mask_id == eb.mask_id
            assert np.array_equal(ea.mask, eb.mask)


def test_assign_coverage_monotone_in_tau():
    rng = np.random.default_rng(29)
    levels = []
    for t in range(1, 4):
        masks = [
            _disk(32, 32, int(rng.integers(4, 28)), int(rng.integers(4, 28)),
                  int(rng.integers(3, 11)))
            for _ in range(4)
        ]
        levels.append((t, masks))
    taus = [0.2, 0.5, 0.8, 1.0]
    coverage = []
    for tau in taus:
        h = maskio.assign_masks_to_layers(_stack(levels), tau_occ=tau)
        total = sum(int(e.mask.sum()) for e in h.entries())
        coverage.append(total)
    assert all(a <= b for a, b in zip(coverage, coverage[1:]))


def test_link_parents_containment():
    parent = _rect(32, 32, 0, 32, 0, 32)
    child = _rect(32, 32, 4, 10, 4, 10)
    h = maskio.assign_masks_to_layers(_stack([(1, [parent]), (2, [child])]), tau_occ=1.0)
    linked = maskio.link_parents(h, tau_parent=0.5)
    assert linked.layers[1].masks[0].parent_id == "m1_000"


def test_link_parents_orphan_goes_to_root():
    parent = _rect(32, 32, 0, 8, 0, 8)
    child = _rect(32, 32, 20, 28, 20, 28)  # zero overlap
    h = maskio.assign_masks_to_layers(_stack([(1, [parent]), (2, [child])]), tau_occ=1.0)
    linked = maskio.link_parents(h, tau_parent=0.5)
    assert linked.layers[1].masks[0].parent_id is None


def test_link_parents_picks_majority_cover():
    a = _rect(32, 32, 0, 32, 0, 12)
    b = _rect(32, 32, 0, 32, 12, 32)
    child = _rect(32, 32, 10, 20, 4, 24)  # 8/20 in a, 12/20 in b
    h = maskio.assign_masks_to_layers(_stack([(1, [a, b]), (2, [child])]), tau_occ=1.0)
    linked = maskio.link_parents(h, tau_parent=0.5)
    # exhaustive overlap: b covers 60%
    assert linked.layers[1].masks[0].parent_id == "m1_001"


def test_link_parents_no_cycles_and_layer_order():
    rng = np.random.default_rng(41)
    levels = []
    for t in range(1, 4):
        masks = [
            _disk(32, 32, int(rng.integers(6, 26)), int(rng.integers(6, 26)),
                  int(rng.integers(3, 12)))
            for _ in range(3)
        ]
        levels.append((t, masks))
    linked = maskio.link_parents(maskio.assign_masks_to_layers(_stack(levels), 1.0), 0.3)
    ids = {}
    for k, layer in enumerate(linked.layers):
        for e in layer.masks:
            ids[e.mask_id] = k
    for k, layer in enumerate(linked.layers):
        for e in layer.masks:
            if e.parent_id is not None:
                assert ids[e.parent_id] == k - 1


def test_validate_clean_hierarchy():
    parent = _rect(32, 32, 0, 32, 0, 32)
    child = _rect(32, 32, 4, 10, 4, 10)
    h = maskio.link_parents(
        maskio.assign_masks_to_layers(_stack([(1, [parent]), (2, [child])]), 1.0), 0.5)
    assert maskio.validate_hierarchy(h) == []


def test_validate_reports_orphan():
    child = maskio.MaskEntry("m2_000", _rect(8, 8, 0, 4, 0, 4), parent_id="ghost")
    h = maskio.MaskHierarchy(
        (maskio.MaskLayer(1, ()), maskio.MaskLayer(2, (child,))), 8, 8)
    issues = maskio.validate_hierarchy(h)
    assert any("m2_000" in s and "orphan" in s for s in issues)


def test_validate_reports_intra_layer_overlap():
    a = maskio.MaskEntry("m1_000", _rect(8, 8, 0, 6, 0, 6))
    b = maskio.MaskEntry("m1_001", _rect(8, 8, 2, 8, 2, 8))
    h = maskio.MaskHierarchy((maskio.MaskLayer(1, (a, b)),), 8, 8)
    issues = maskio.validate_hierarchy(h, tau_excl=0.1)
    assert len(issues) == 1
    # fraction of the smaller mask, computed by hand: 16/36
    assert "0.444" in issues[0]
