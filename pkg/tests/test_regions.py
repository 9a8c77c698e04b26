import numpy as np
import pytest

from oracles import connected_components
from visquest import (InvalidInputError, ProposalConfig, Region, iou, nms,
                      proposals_payload, segment_graph, selective_search)


def uniform_image(h=32, w=32, value=128):
    return np.full((h, w, 3), value, dtype=np.uint8)


def half_image(h=32, w=32):
    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[:, w // 2:] = 255
    return img


def boxes_image():
    """64x64 gray background with two well-separated flat rectangles."""
    img = np.full((64, 64, 3), 100, dtype=np.uint8)
    img[8:24, 6:26] = (220, 40, 40)
    img[36:58, 34:60] = (40, 40, 220)
    return img, [Region(6, 8, 26, 24), Region(34, 36, 60, 58)]


# ---------------------------------------------------------------- segmentation

def test_uniform_image_is_one_segment():
    for scale_k in (1.0, 100.0, 10000.0):
        seg = segment_graph(uniform_image(), scale_k, min_size=1)
        assert seg.count == 1
        assert int(seg.sizes[0]) == 32 * 32
        assert (seg.labels == 0).all()


def test_half_black_white_splits_into_the_two_halves():
    img = half_image()
    seg = segment_graph(img, scale_k=100.0, min_size=10)
    assert seg.count == 2

    # The partition must equal the connected components of the exact-color
    # grouping, computed by an independent flood fill.
    mask = [[bool(img[r, c, 0]) for c in range(32)] for r in range(32)]
    expected = {frozenset(cells) for cells in connected_components(mask).values()}
    got = set()
    for seg_id in range(seg.count):
        rows, cols = np.nonzero(seg.labels == seg_id)
        got.add(frozenset(zip(rows.tolist(), cols.tolist())))
    assert got == expected


def test_min_size_equal_to_image_area_forces_one_segment():
    seg = segment_graph(half_image(), scale_k=100.0, min_size=32 * 32)
    assert seg.count == 1


def test_segment_sizes_partition_the_image():
    rng = np.random.default_rng(7)
    img = rng.integers(0, 256, size=(20, 24, 3), dtype=np.uint8)
    seg = segment_graph(img, scale_k=50.0, min_size=5)
    assert int(seg.sizes.sum()) == 20 * 24
    assert seg.labels.min() == 0 and seg.labels.max() == seg.count - 1
    assert (seg.sizes >= 5).all()


def test_zero_area_image_rejected():
    with pytest.raises(InvalidInputError):
        segment_graph(np.zeros((0, 5, 3), dtype=np.uint8), 100.0, 1)


# ------------------------------------------------------------ selective search

def test_two_rectangles_produce_tight_proposals():
    img, truths = boxes_image()
    proposals = selective_search(img, ProposalConfig(scale_k=200.0))
    for truth in truths:
        assert max(iou(truth, p) for p in proposals) >= 0.9


def test_uniform_image_gives_exactly_the_full_frame():
    proposals = selective_search(uniform_image())
    assert len(proposals) == 1
    assert proposals[0].as_tuple() == (0, 0, 32, 32)


def test_max_proposals_cap_is_exact():
    rng = np.random.default_rng(3)
    busy = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
    proposals = selective_search(busy, ProposalConfig(scale_k=10.0, min_size=4,
                                                      max_proposals=5))
    assert len(proposals) == 5


def test_proposals_contain_every_initial_segment_box():
    img, _ = boxes_image()
    config = ProposalConfig(scale_k=200.0, max_proposals=100000)
    seg = segment_graph(img, config.scale_k, config.min_size)
    boxes = {p.as_tuple() for p in selective_search(img, config)}
    for initial in seg.boxes:
        assert tuple(initial) in boxes


def test_proposal_coordinates_satisfy_region_invariants():
    rng = np.random.default_rng(11)
    for _ in range(10):
        h = int(rng.integers(8, 40))
        w = int(rng.integers(8, 40))
        img = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        for p in selective_search(img, ProposalConfig(scale_k=30.0, min_size=3)):
            assert 0 <= p.x_tl < p.x_br <= w
            assert 0 <= p.y_tl < p.y_br <= h
            assert p.score >= 0.0


def test_earlier_segments_score_higher_than_later_merges():
    # Four flat quadrants: every merge produces a box nobody had before.
    img = np.zeros((32, 32, 3), dtype=np.uint8)
    img[:16, :16] = (250, 30, 30)
    img[:16, 16:] = (30, 250, 30)
    img[16:, :16] = (30, 30, 250)
    img[16:, 16:] = (240, 240, 30)
    proposals = selective_search(img, ProposalConfig(scale_k=50.0))
    seg = segment_graph(img, 50.0, 10)
    initial = {tuple(b) for b in seg.boxes}
    init_scores = [p.score for p in proposals if p.as_tuple() in initial]
    merged_scores = [p.score for p in proposals if p.as_tuple() not in initial]
    assert merged_scores, "expected at least one merged region"
    assert min(init_scores) > max(merged_scores)


# ------------------------------------------------------------------------- iou

def test_iou_identical_boxes():
    a = Region(2, 3, 10, 12)
    assert iou(a, a) == 1.0


def test_iou_disjoint_boxes():
    assert iou(Region(0, 0, 4, 4), Region(10, 10, 14, 14)) == 0.0


def test_iou_worked_example_one_seventh():
    a = Region(0, 0, 2, 2)
    b = Region(1, 1, 3, 3)
    assert iou(a, b) == pytest.approx(1 / 7, abs=1e-15)
    assert iou(b, a) == iou(a, b)


def test_iou_symmetry_fuzz():
    rng = np.random.default_rng(5)
    for _ in range(200):
        x0, y0 = rng.integers(0, 20, size=2)
        a = Region(int(x0), int(y0), int(x0 + rng.integers(1, 15)),
                   int(y0 + rng.integers(1, 15)))
        x1, y1 = rng.integers(0, 20, size=2)
        b = Region(int(x1), int(y1), int(x1 + rng.integers(1, 15)),
                   int(y1 + rng.integers(1, 15)))
        assert iou(a, b) == iou(b, a)
        assert 0.0 <= iou(a, b) <= 1.0
        assert iou(a, a) == 1.0


# ------------------------------------------------------------------------- nms

def test_nms_keeps_the_higher_scored_duplicate():
    a = Region(0, 0, 10, 10, score=0.9)
    b = Region(0, 0, 10, 10, score=0.4)
    kept = nms([b, a], 0.5)
    assert kept == [a]


def test_nms_keeps_disjoint_boxes():
    a = Region(0, 0, 4, 4, score=0.9)
    b = Region(10, 10, 14, 14, score=0.1)
    assert nms([a, b], 0.5) == [a, b]


def test_nms_low_threshold_suppresses_slight_overlap():
    # IoU of these boxes is 1/7, above a 0.1 threshold.
    a = Region(0, 0, 2, 2, score=0.9)
    b = Region(1, 1, 3, 3, score=0.5)
    assert nms([a, b], 0.1) == [a]
    assert nms([a, b], 0.2) == [a, b]


def test_nms_empty_input():
    assert nms([], 0.5) == []


def test_nms_output_subset_and_pairwise_below_threshold():
    rng = np.random.default_rng(13)
    for _ in range(30):
        regions = []
        for _ in range(int(rng.integers(1, 25))):
            x, y = rng.integers(0, 30, size=2)
            regions.append(Region(int(x), int(y), int(x + rng.integers(1, 20)),
                                  int(y + rng.integers(1, 20)),
                                  score=float(rng.random())))
        threshold = float(rng.uniform(0.05, 1.0))
        kept = nms(regions, threshold)
        assert all(k in regions for k in kept)
        scores = [k.score for k in kept]
        assert scores == sorted(scores, reverse=True)
        for i, a in enumerate(kept):
            for b in kept[i + 1:]:
                assert iou(a, b) < threshold


def test_nms_rejects_bad_threshold():
    with pytest.raises(InvalidInputError):
        nms([Region(0, 0, 1, 1)], 0.0)


# ----------------------------------------------------------------- JSON payload

def test_proposals_payload_schema():
    payload = proposals_payload("img-1", [Region(1, 2, 3, 4, score=0.5)])
    assert payload["image_id"] == "img-1"
    assert payload["regions"] == [
        {"x_tl": 1, "y_tl": 2, "x_br": 3, "y_br": 4, "score": 0.5}]


def test_region_invariant_violations_rejected():
    with pytest.raises(InvalidInputError):
        Region(5, 0, 5, 10)       # zero width
    with pytest.raises(InvalidInputError):
        Region(0, 8, 10, 4)       # inverted vertically
    with pytest.raises(InvalidInputError):
        Region(-1, 0, 4, 4)       # negative corner
