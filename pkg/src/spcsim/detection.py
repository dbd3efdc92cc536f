"""RoI detection on the low-resolution reconstruction.

Works on the blocky low-resolution image at native scene size. The scene is
tiled into cells of min_side/4 pixels; each cell scores by the variance (or
range) of the cell means in its 3x3 neighborhood, normalized by the global
statistic so detection is invariant to positive rescaling. Cells above
mean + std activity form 8-connected components, each snapped to a dyadic
window; nearby windows coalesce; overlaps resolve in favor of the higher
score. Windows are returned ranked by score, labeled 1, 2, ...
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imaging import Image, RoIWindow

__all__ = [
    "DetectionParams",
    "detect_rois",
    "detect_rois_scored",
    "merge_rois",
    "rois_to_json",
    "label_mask",
]

SCORE_BLOCK_VARIANCE = "BlockVariance"
SCORE_CONTRAST = "Contrast"


@dataclass(frozen=True)
class DetectionParams:
    max_regions: int = 10
    merge_radius: int = 1
    score: str = SCORE_BLOCK_VARIANCE
    min_side: int = 32
    max_side: int = 128

    def __post_init__(self):
        if self.max_regions < 1:
            raise ValueError("max_regions must be >= 1")
        if self.merge_radius < 0:
            raise ValueError("merge_radius must be nonnegative")
        if self.score not in (SCORE_BLOCK_VARIANCE, SCORE_CONTRAST):
            raise ValueError(f"unknown score {self.score!r}")
        for s in (self.min_side, self.max_side):
            if s < 4 or s & (s - 1):
                raise ValueError(f"window sides must be powers of two >= 4, got {s}")
        if self.min_side > self.max_side:
            raise ValueError("min_side must not exceed max_side")


def _next_pow2(n):
    p = 1
    while p < n:
        p *= 2
    return p


def _cell_means(data, cell):
    h, w = data.shape
    return data.reshape(h // cell, cell, w // cell, cell).mean(axis=(1, 3))


def _neighborhood_stat(means, score):
    """Per-cell activity from the 3x3 neighborhood of cell means."""
    padded = np.pad(means, 1, mode="edge")
    stacked = np.stack([padded[di:di + means.shape[0], dj:dj + means.shape[1]]
                        for di in range(3) for dj in range(3)])
    if score == SCORE_BLOCK_VARIANCE:
        return stacked.var(axis=0)
    return stacked.max(axis=0) - stacked.min(axis=0)


def _gap(a, b):
    """Chebyshev gap between two windows in native pixels (0 if touching)."""
    vgap = max(a.row_offset - (b.row_offset + b.side),
               b.row_offset - (a.row_offset + a.side), 0)
    hgap = max(a.col_offset - (b.col_offset + b.side),
               b.col_offset - (a.col_offset + a.side), 0)
    return max(vgap, hgap)


def _clusters(windows, radius):
    """Transitive closure of the within-radius relation."""
    n = len(windows)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if _gap(windows[i], windows[j]) <= radius:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [groups[k] for k in sorted(groups)]


def _place(row, col, side, scene_shape, align=1):
    """Clamp a window position inside the scene on an alignment grid."""
    h, w = scene_shape
    row = max(0, min(row, h - side))
    col = max(0, min(col, w - side))
    row = (row // align) * align
    col = (col // align) * align
    # snapping down can only move away from the far edge, so still inside
    return row, col


def _merged_window(members, scene_shape, max_side=None, align=1):
    r0 = min(m.row_offset for m in members)
    c0 = min(m.col_offset for m in members)
    r1 = max(m.row_offset + m.side for m in members)
    c1 = max(m.col_offset + m.side for m in members)
    side = _next_pow2(max(r1 - r0, c1 - c0))
    if max_side is not None:
        side = min(side, max_side)
    if scene_shape is not None:
        side = min(side, _largest_pow2_fitting(scene_shape))
        row = (r0 + r1 - side) // 2
        col = (c0 + c1 - side) // 2
        row, col = _place(row, col, side, scene_shape, align)
    else:
        row, col = r0, c0
    macro = members[0].current_macro
    return RoIWindow(row, col, side, current_macro=macro)


def _largest_pow2_fitting(scene_shape):
    p = 1
    while 2 * p <= min(scene_shape):
        p *= 2
    return p


def merge_rois(rois, merge_radius, scene_shape=None):
    """Coalesce windows within merge_radius (native pixels) of each other.

    Each transitive cluster becomes one window: the bounding box snapped up
    to the next power-of-two side, clipped to the scene when given."""
    rois = list(rois)
    if not rois:
        return []
    out = []
    for group in _clusters(rois, merge_radius):
        members = [rois[i] for i in group]
        if len(members) == 1 and scene_shape is None:
            out.append(members[0])
        else:
            out.append(_merged_window(members, scene_shape))
    return out


def detect_rois_scored(lowres, params=None):
    """Like detect_rois but returns (window, score) pairs, ranked."""
    params = DetectionParams() if params is None else params
    data = np.asarray(getattr(lowres, "data", lowres), dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("expected a 2D image")
    h, w = data.shape
    if h % params.min_side or w % params.min_side:
        raise ValueError(
            f"image {h}x{w} not divisible by min_side {params.min_side}"
        )
    cell = max(params.min_side // 4, 1)
    means = _cell_means(data, cell)

    if params.score == SCORE_BLOCK_VARIANCE:
        norm = float(means.var())
    else:
        norm = float(means.max() - means.min())
    if norm <= 0.0:
        return []
    activity = _neighborhood_stat(means, params.score) / norm

    threshold = float(activity.mean() + activity.std())
    active = activity > threshold
    if not active.any():
        return []
    labels, count = ndimage.label(active, structure=np.ones((3, 3), dtype=int))

    scene_shape = (h, w)
    background = float(np.median(means))
    raw = []
    for k in range(1, count + 1):
        rows, cols = np.nonzero(labels == k)
        score = float(activity[rows, cols].sum())
        # neighborhood stats bleed one cell past a sharp edge; keep the box
        # tight by restricting to cells that differ from the background level
        dev = np.abs(means[rows, cols] - background)
        keep = dev > 0.1 * dev.max() if dev.max() > 0 else np.ones(dev.shape, bool)
        if not keep.any():
            keep = np.ones(dev.shape, bool)
        rb, cb = rows[keep], cols[keep]
        r0, r1 = rb.min() * cell, (rb.max() + 1) * cell
        c0, c1 = cb.min() * cell, (cb.max() + 1) * cell
        side = _next_pow2(max(r1 - r0, c1 - c0))
        side = min(max(side, params.min_side), params.max_side,
                   _largest_pow2_fitting(scene_shape))
        row = (r0 + r1 - side) // 2
        col = (c0 + c1 - side) // 2
        row, col = _place(row, col, side, scene_shape, align=cell)
        raw.append((RoIWindow(row, col, side), score))

    # coalesce nearby detections; radius counts in coarse cells
    merged = []
    windows = [wn for wn, _ in raw]
    for group in _clusters(windows, params.merge_radius * cell):
        members = [windows[i] for i in group]
        score = sum(raw[i][1] for i in group)
        wn = _merged_window(members, scene_shape, max_side=params.max_side, align=cell)
        merged.append((wn, score))
    merged.sort(key=lambda t: (-t[1], t[0].row_offset, t[0].col_offset))

    # higher score claims contested ground; later windows shift or drop
    placed = []
    for wn, score in merged:
        spot = _find_spot(wn, placed, scene_shape, cell)
        if spot is not None:
            placed.append((spot, score))
        if len(placed) == params.max_regions:
            break
    return [(RoIWindow(wn.row_offset, wn.col_offset, wn.side,
                       current_macro=wn.current_macro, label=i + 1), score)
            for i, (wn, score) in enumerate(placed)]


def _overlaps(a, b):
    return (a.row_offset < b.row_offset + b.side
            and b.row_offset < a.row_offset + a.side
            and a.col_offset < b.col_offset + b.side
            and b.col_offset < a.col_offset + a.side)


def _find_spot(wn, placed, scene_shape, cell):
    """Keep wn if free; otherwise try nearby cell-aligned shifts, else None."""
    if not any(_overlaps(wn, p) for p, _ in placed):
        return wn
    h, w = scene_shape
    candidates = []
    for row in range(0, h - wn.side + 1, cell):
        for col in range(0, w - wn.side + 1, cell):
            d = abs(row - wn.row_offset) + abs(col - wn.col_offset)
            if 0 < d <= 2 * wn.side:
                candidates.append((d, row, col))
    candidates.sort()
    for _, row, col in candidates:
        cand = RoIWindow(row, col, wn.side, current_macro=wn.current_macro)
        if not any(_overlaps(cand, p) for p, _ in placed):
            return cand
    return None


def detect_rois(lowres, params=None):
    """Detect dyadic RoI windows in a low-resolution reconstruction.

    Returns at most params.max_regions pairwise disjoint windows inside the
    scene, ranked by detection score, labeled from 1. A constant image (no
    contrast) yields an empty list."""
    return [wn for wn, _ in detect_rois_scored(lowres, params)]


def rois_to_json(scored):
    """Serialize (window, score) pairs as a JSON array."""
    doc = [
        {
            "row": wn.row_offset,
            "col": wn.col_offset,
            "side": wn.side,
            "label": wn.label,
            "score": float(score),
        }
        for wn, score in scored
    ]
    return json.dumps(doc, indent=2, sort_keys=True)


def label_mask(scene_shape, rois):
    """Gray-level label image: background 0, window k at level k/max_label."""
    out = np.zeros(scene_shape)
    top = max((wn.label for wn in rois), default=0)
    for wn in rois:
        level = wn.label / top if top else 1.0
        out[wn.row_offset:wn.row_offset + wn.side,
            wn.col_offset:wn.col_offset + wn.side] = level
    return Image(out)
