"""Heuristic panoptic fusion.

Turns raw instance predictions plus a semantic class map into one
non-overlapping panoptic label map: class-agnostic NMS at box IoU 0.5, a
strict score cutoff of 0.6, score-ordered painting where each instance claims
only unclaimed pixels, then stuff fill from the semantic map. Thing pixels in
the semantic map that no instance covers become void.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import ClassTaxonomy, PanopticLabelMap, pack_segment_id
from .errors import LabelFormatError, ShapeError

NMS_IOU_THRESHOLD = 0.5
SCORE_CUTOFF = 0.6  # kept only if score is strictly larger
KEEP_FRACTION = 0.5  # dropped if fewer than this fraction of mask pixels remain


@dataclass(frozen=True, eq=False)
class InstancePrediction:
    """One detected object: box, class probabilities, frame-aligned mask."""

    box: tuple[float, float, float, float]  # x1, y1, x2, y2
    class_probs: Mapping[int, float]
    mask: np.ndarray  # bool, (height, width)
    embedding: np.ndarray | None = None

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        object.__setattr__(self, "mask", mask)
        if mask.ndim != 2:
            raise ShapeError("instance mask must be 2-D")
        x1, y1, x2, y2 = self.box
        h, w = mask.shape
        if not (0 <= x1 < x2 <= w and 0 <= y1 < y2 <= h):
            raise ValueError(f"box {self.box} outside the {w}x{h} frame")
        if not self.class_probs:
            raise ValueError("class_probs must not be empty")
        total = sum(self.class_probs.values())
        if any(p < 0 for p in self.class_probs.values()) or total > 1.0 + 1e-9:
            raise ValueError("class probabilities must be >= 0 and sum to <= 1")
        ix1, iy1 = int(np.floor(x1)), int(np.floor(y1))
        ix2, iy2 = int(np.ceil(x2)), int(np.ceil(y2))
        if not mask[iy1:iy2, ix1:ix2].any():
            raise ValueError("mask is empty after clipping to the box region")
        if self.embedding is not None:
            emb = np.asarray(self.embedding, dtype=np.float64)
            object.__setattr__(self, "embedding", emb)

    @property
    def score(self) -> float:
        return max(self.class_probs.values())

    @property
    def class_id(self) -> int:
        best = max(self.class_probs.values())
        return min(c for c, p in self.class_probs.items() if p == best)

    def sort_key(self):
        # Content-only, so output never depends on the input list order.
        x1, y1, x2, y2 = self.box
        return (-self.score, x1, y1, x2, y2, self.class_id, self.mask.tobytes())


@dataclass(frozen=True, eq=False)
class SemanticMap:
    """Per-pixel class ids over the full taxonomy (void allowed)."""

    class_ids: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.class_ids)
        if arr.ndim != 2 or arr.size == 0:
            raise ShapeError("semantic map must be a non-empty 2-D grid")
        if not np.issubdtype(arr.dtype, np.integer) or arr.min() < 0:
            raise LabelFormatError("semantic map must hold non-negative integers")
        object.__setattr__(self, "class_ids", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.class_ids.shape


def box_iou(a: Sequence[float], b: Sequence[float]) -> float:
    ax1, ay1, ax2, ay2 = a
    bx1, by1, bx2, by2 = b
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def prune_instances(
    candidates: Sequence[InstancePrediction],
    *,
    iou_threshold: float = NMS_IOU_THRESHOLD,
    score_cutoff: float = SCORE_CUTOFF,
) -> list[InstancePrediction]:
    """Class-agnostic box NMS (keep higher score), then the strict score cut.

    Survivors come back sorted by descending score with a coordinate
    tie-break, ready for id assignment and painting.
    """
    ordered = sorted(candidates, key=lambda c: c.sort_key())
    kept: list[InstancePrediction] = []
    for cand in ordered:
        if any(box_iou(cand.box, k.box) > iou_threshold for k in kept):
            continue
        kept.append(cand)
    return [c for c in kept if c.score > score_cutoff]


def assign_initial_ids(
    instances: Sequence[InstancePrediction],
) -> list[tuple[InstancePrediction, int]]:
    """Ids 1..n in probability order; ties broken by box coordinates."""
    ordered = sorted(instances, key=lambda c: c.sort_key())
    return [(inst, i + 1) for i, inst in enumerate(ordered)]


def fuse(
    instances: Sequence[InstancePrediction],
    semantic: SemanticMap,
    taxonomy: ClassTaxonomy,
    *,
    instance_ids: Sequence[int] | None = None,
    keep_fraction: float = KEEP_FRACTION,
) -> PanopticLabelMap:
    """Paint pruned instances in score order, then fill stuff from semantics.

    ``instance_ids`` aligns with ``instances`` (tracker output); by default
    ids are assigned 1..n in the given order. An instance keeping less than
    ``keep_fraction`` of its mask unclaimed is dropped entirely.
    """
    h, w = semantic.shape
    sem = semantic.class_ids
    known = np.zeros(int(sem.max()) + 2 if sem.size else 1, dtype=bool)
    for c in taxonomy.by_id:
        if c < known.size:
            known[c] = True
    bad = ~known[sem] & (sem != taxonomy.void_id)
    if bad.any():
        ys, xs = np.nonzero(bad)
        raise LabelFormatError(
            f"unknown class id {int(sem[ys[0], xs[0]])} in semantic map "
            f"at (x={int(xs[0])}, y={int(ys[0])})"
        )

    if instance_ids is None:
        instance_ids = [i + 1 for i in range(len(instances))]
    if len(instance_ids) != len(instances):
        raise ShapeError("instance_ids must align with instances")

    out = np.full((h, w), taxonomy.void_packed, dtype=np.int32)
    claimed = np.zeros((h, w), dtype=bool)
    for inst, iid in zip(instances, instance_ids):
        if inst.mask.shape != (h, w):
            raise ShapeError(
                f"instance mask is {inst.mask.shape}, frame is {(h, w)}"
            )
        free = inst.mask & ~claimed
        if int(free.sum()) < keep_fraction * int(inst.mask.sum()):
            continue
        out[free] = pack_segment_id(inst.class_id, iid)
        claimed |= free

    stuff_fill = ~claimed
    for c in sorted(taxonomy.stuff_ids):
        sel = stuff_fill & (sem == c)
        out[sel] = pack_segment_id(c, 0)
    return PanopticLabelMap(out)
