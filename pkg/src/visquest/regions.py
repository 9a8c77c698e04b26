"""Object region proposal without supervision.

A graph over pixels is segmented with a minimum-spanning-tree style
criterion (adaptive threshold tau(C) = scale_k / |C|), then segments are
merged hierarchically by similarity (color histogram intersection plus
size and fill terms). Every box seen along the way becomes a proposal.

Coordinates are half-open: a Region spans [x_tl, x_br) x [y_tl, y_br).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError
from .images import ensure_image

HIST_BINS = 25  # per channel, 75 total


@dataclass(frozen=True)
class Region:
    x_tl: int
    y_tl: int
    x_br: int
    y_br: int
    score: float = 0.0

    def __post_init__(self):
        if not (self.x_tl < self.x_br and self.y_tl < self.y_br):
            raise InvalidInputError(f"degenerate region {self.as_tuple()}")
        if self.x_tl < 0 or self.y_tl < 0:
            raise InvalidInputError(f"negative region coordinates {self.as_tuple()}")
        if self.score < 0:
            raise InvalidInputError("region score must be nonnegative")

    @property
    def area(self) -> int:
        return (self.x_br - self.x_tl) * (self.y_br - self.y_tl)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x_tl, self.y_tl, self.x_br, self.y_br)

    def with_score(self, score: float) -> "Region":
        return replace(self, score=score)

    def to_dict(self) -> dict:
        return {"x_tl": self.x_tl, "y_tl": self.y_tl, "x_br": self.x_br,
                "y_br": self.y_br, "score": self.score}


@dataclass
class ProposalConfig:
    scale_k: float = 100.0
    min_size: int = 10
    max_proposals: int = 100


@dataclass
class SegmentMap:
    labels: np.ndarray            # (H, W) int32, dense ids in [0, count)
    count: int
    sizes: np.ndarray             # (count,) pixel counts
    histograms: np.ndarray        # (count, 75) L1-normalized color histograms
    boxes: list = field(default_factory=list)  # (x_tl, y_tl, x_br, y_br) per id

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


class _UnionFind:
    __slots__ = ("parent", "size", "count")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.count = n

    def find(self, i: int) -> int:
        parent = self.parent
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    def union(self, a: int, b: int) -> int:
        # Merge smaller tree into larger; deterministic tie-break on id.
        if self.size[a] < self.size[b] or (self.size[a] == self.size[b] and b < a):
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        self.count -= 1
        return a


def _grid_edges(img: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """4-connectivity edges as (a, b, weight) arrays, weight = RGB distance."""
    h, w = img.shape[:2]
    ids = np.arange(h * w, dtype=np.int64).reshape(h, w)
    pix = img.astype(np.float64)

    pairs_a, pairs_b, weights = [], [], []
    if w > 1:
        d = np.sqrt(((pix[:, 1:] - pix[:, :-1]) ** 2).sum(axis=2))
        pairs_a.append(ids[:, :-1].ravel())
        pairs_b.append(ids[:, 1:].ravel())
        weights.append(d.ravel())
    if h > 1:
        d = np.sqrt(((pix[1:, :] - pix[:-1, :]) ** 2).sum(axis=2))
        pairs_a.append(ids[:-1, :].ravel())
        pairs_b.append(ids[1:, :].ravel())
        weights.append(d.ravel())
    if not pairs_a:
        return (np.empty(0, dtype=np.int64),) * 2 + (np.empty(0),)
    return np.concatenate(pairs_a), np.concatenate(pairs_b), np.concatenate(weights)


def segment_graph(image: np.ndarray, scale_k: float, min_size: int) -> SegmentMap:
    """Segment an image into connected regions.

    Edges are processed in ascending weight order; two components merge when
    the joining edge weight does not exceed either component's internal
    threshold Int(C) + scale_k/|C|. A final pass merges components smaller
    than min_size into an adjacent component.
    """
    img = ensure_image(image)
    if scale_k <= 0:
        raise InvalidInputError("scale_k must be positive")
    if min_size < 1:
        raise InvalidInputError("min_size must be a positive integer")
    h, w = img.shape[:2]
    n = h * w

    ea, eb, ew = _grid_edges(img)
    order = np.argsort(ew, kind="stable")
    ea, eb, ew = ea[order], eb[order], ew[order]

    uf = _UnionFind(n)
    threshold = [float(scale_k)] * n  # tau for singleton components
    ea_l, eb_l, ew_l = ea.tolist(), eb.tolist(), ew.tolist()
    for a, b, wgt in zip(ea_l, eb_l, ew_l):
        ra, rb = uf.find(a), uf.find(b)
        if ra == rb:
            continue
        if wgt <= threshold[ra] and wgt <= threshold[rb]:
            root = uf.union(ra, rb)
            threshold[root] = wgt + scale_k / uf.size[root]

    for a, b in zip(ea_l, eb_l):
        ra, rb = uf.find(a), uf.find(b)
        if ra != rb and (uf.size[ra] < min_size or uf.size[rb] < min_size):
            uf.union(ra, rb)

    roots = np.fromiter((uf.find(i) for i in range(n)), count=n, dtype=np.int64)
    # Dense relabel in row-major first-seen order for determinism.
    _, first_index, inverse = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first_index, kind="stable"), kind="stable")
    labels = rank[inverse].astype(np.int32).reshape(h, w)
    count = int(labels.max()) + 1

    sizes = np.bincount(labels.ravel(), minlength=count)
    histograms = _segment_histograms(img, labels, count, sizes)
    boxes = _segment_boxes(labels, count)
    return SegmentMap(labels=labels, count=count, sizes=sizes,
                      histograms=histograms, boxes=boxes)


def _segment_histograms(img, labels, count, sizes) -> np.ndarray:
    flat_labels = labels.ravel().astype(np.int64)
    hist = np.zeros((count, 3 * HIST_BINS), dtype=np.float64)
    for c in range(3):
        bins = (img[:, :, c].ravel().astype(np.int64) * HIST_BINS) // 256
        counts = np.bincount(flat_labels * HIST_BINS + bins,
                             minlength=count * HIST_BINS)
        hist[:, c * HIST_BINS:(c + 1) * HIST_BINS] = counts.reshape(count, HIST_BINS)
    return hist / (3.0 * sizes)[:, None]


def _segment_boxes(labels, count) -> list:
    h, w = labels.shape
    ys, xs = np.indices((h, w))
    flat = labels.ravel()
    x_min = np.full(count, w, dtype=np.int64)
    y_min = np.full(count, h, dtype=np.int64)
    x_max = np.zeros(count, dtype=np.int64)
    y_max = np.zeros(count, dtype=np.int64)
    np.minimum.at(x_min, flat, xs.ravel())
    np.minimum.at(y_min, flat, ys.ravel())
    np.maximum.at(x_max, flat, xs.ravel())
    np.maximum.at(y_max, flat, ys.ravel())
    return [(int(x_min[i]), int(y_min[i]), int(x_max[i]) + 1, int(y_max[i]) + 1)
            for i in range(count)]


def _adjacency(labels: np.ndarray) -> set[tuple[int, int]]:
    pairs = set()
    left, right = labels[:, :-1].ravel(), labels[:, 1:].ravel()
    up, down = labels[:-1, :].ravel(), labels[1:, :].ravel()
    for a, b in ((left, right), (up, down)):
        diff = a != b
        lo = np.minimum(a[diff], b[diff])
        hi = np.maximum(a[diff], b[diff])
        pairs.update(zip(lo.tolist(), hi.tolist()))
    return pairs


def _similarity(ra: dict, rb: dict, image_area: int) -> float:
    color = np.minimum(ra["hist"], rb["hist"]).sum()
    size_term = 1.0 - (ra["size"] + rb["size"]) / image_area
    bbox = _bbox_union(ra["box"], rb["box"])
    bbox_area = (bbox[2] - bbox[0]) * (bbox[3] - bbox[1])
    fill_term = 1.0 - (bbox_area - ra["size"] - rb["size"]) / image_area
    return 0.5 * color + 0.25 * size_term + 0.25 * fill_term


def _bbox_union(a, b) -> tuple[int, int, int, int]:
    return (min(a[0], b[0]), min(a[1], b[1]), max(a[2], b[2]), max(a[3], b[3]))


def selective_search(image: np.ndarray, config: ProposalConfig | None = None) -> list[Region]:
    """Propose object regions by hierarchical grouping of initial segments.

    Returns boxes of all initial segments plus every merged region, deduped,
    scored by inverse creation order (original segments highest), and capped
    at config.max_proposals.
    """
    config = config or ProposalConfig()
    img = ensure_image(image)
    seg = segment_graph(img, config.scale_k, config.min_size)
    image_area = seg.height * seg.width

    regions = {
        i: {"size": int(seg.sizes[i]), "hist": seg.histograms[i], "box": seg.boxes[i]}
        for i in range(seg.count)
    }
    neighbors = _adjacency(seg.labels)
    sims = {pair: _similarity(regions[pair[0]], regions[pair[1]], image_area)
            for pair in neighbors}

    creation_order = list(seg.boxes)
    next_id = seg.count
    while sims:
        # Highest similarity wins; ties prefer the smaller combined area,
        # then the lower id pair.
        best = max(sims.items(),
                   key=lambda kv: (kv[1],
                                   -(regions[kv[0][0]]["size"] + regions[kv[0][1]]["size"]),
                                   -kv[0][0], -kv[0][1]))
        (ia, ib), _ = best
        ra, rb = regions.pop(ia), regions.pop(ib)
        merged = {
            "size": ra["size"] + rb["size"],
            "hist": (ra["hist"] * ra["size"] + rb["hist"] * rb["size"])
                    / (ra["size"] + rb["size"]),
            "box": _bbox_union(ra["box"], rb["box"]),
        }
        new_id = next_id
        next_id += 1
        creation_order.append(merged["box"])

        merged_neighbors = set()
        for pair in list(sims):
            if ia in pair or ib in pair:
                del sims[pair]
                other = pair[0] if pair[1] in (ia, ib) else pair[1]
                if other not in (ia, ib):
                    merged_neighbors.add(other)
        regions[new_id] = merged
        for other in merged_neighbors:
            sims[(other, new_id)] = _similarity(regions[other], merged, image_area)

    total = len(creation_order)
    proposals, seen = [], set()
    for idx, box in enumerate(creation_order):
        if box in seen:
            continue
        seen.add(box)
        score = (total - idx) / total
        proposals.append(Region(*box, score=score))
    return proposals[: config.max_proposals]


def iou(a: Region, b: Region) -> float:
    """Intersection over union of two boxes, in [0, 1]."""
    ix = min(a.x_br, b.x_br) - max(a.x_tl, b.x_tl)
    iy = min(a.y_br, b.y_br) - max(a.y_tl, b.y_tl)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def nms(regions: list[Region], iou_threshold: float) -> list[Region]:
    """Greedy non-maximum suppression in descending score order."""
    if not 0.0 < iou_threshold <= 1.0:
        raise InvalidInputError("iou_threshold must be in (0, 1]")
    ordered = sorted(regions, key=lambda r: -r.score)
    kept: list[Region] = []
    for cand in ordered:
        if all(iou(cand, k) < iou_threshold for k in kept):
            kept.append(cand)
    return kept


def proposals_payload(image_id: str, regions: list[Region]) -> dict:
    """JSON-ready payload for a proposal set."""
    return {"image_id": image_id, "regions": [r.to_dict() for r in regions]}
