"""Vectorized segment counting and tube matching shared by the PQ/VPQ engines.

The matching convention extends the image panoptic rules to pixel-time cells:

* a true positive is a same-class (gt, pred) pair whose IoU is strictly
  greater than the threshold;
* ground-truth void is excluded from the union, i.e. the cells a predicted
  tube spends on gt void do not count against it;
* an unmatched predicted tube is dropped (not a false positive) when more
  than half of its cells lie on ground-truth void.

Because segments on each side are mutually exclusive, at most one pair per
gt tube (and per pred tube) can clear a threshold >= 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import (
    INSTANCE_OFFSET,
    ClassStats,
    ClassTaxonomy,
    MatchStats,
    PanopticLabelMap,
    validate_map_ids,
)
from .errors import ShapeError


@dataclass(frozen=True)
class FrameCounts:
    """Intersection table for one (gt frame, pred frame) pair.

    Keys are packed segment ids; the void id appears like any other so the
    window matcher can apply the void rules itself.
    """

    gt_areas: Mapping[int, int]
    pred_areas: Mapping[int, int]
    inter: Mapping[tuple[int, int], int]


def count_frame_pair(
    gt: PanopticLabelMap, pred: PanopticLabelMap, taxonomy: ClassTaxonomy
) -> FrameCounts:
    """Count per-segment areas and pairwise overlaps for one frame pair."""
    if gt.shape != pred.shape:
        raise ShapeError(f"gt frame is {gt.shape}, pred frame is {pred.shape}")
    validate_map_ids(gt, taxonomy)
    validate_map_ids(pred, taxonomy)

    gt_ids, gt_inv = np.unique(gt.packed.ravel(), return_inverse=True)
    pred_ids, pred_inv = np.unique(pred.packed.ravel(), return_inverse=True)
    n_pred = len(pred_ids)
    pair = gt_inv.astype(np.int64) * n_pred + pred_inv
    table = np.bincount(pair, minlength=len(gt_ids) * n_pred).reshape(
        len(gt_ids), n_pred
    )

    gt_areas = dict(zip(gt_ids.tolist(), table.sum(axis=1).tolist()))
    pred_areas = dict(zip(pred_ids.tolist(), table.sum(axis=0).tolist()))
    gi, pi = np.nonzero(table)
    inter = {
        (int(gt_ids[g]), int(pred_ids[p])): int(table[g, p]) for g, p in zip(gi, pi)
    }
    return FrameCounts(gt_areas, pred_areas, inter)


def match_counts(
    counts: Sequence[FrameCounts],
    taxonomy: ClassTaxonomy,
    iou_threshold: float = 0.5,
) -> MatchStats:
    """Match the tubes implied by accumulated frame counts into TP/FP/FN.

    TP IoUs are recorded in ascending (class, instance) order of the ground
    truth tube, which keeps summation order canonical across implementations.
    """
    void = taxonomy.void_packed

    gt_vol: dict[int, int] = {}
    pred_vol: dict[int, int] = {}
    inter_vol: dict[tuple[int, int], int] = {}
    for fc in counts:
        for k, v in fc.gt_areas.items():
            gt_vol[k] = gt_vol.get(k, 0) + v
        for k, v in fc.pred_areas.items():
            pred_vol[k] = pred_vol.get(k, 0) + v
        for k, v in fc.inter.items():
            inter_vol[k] = inter_vol.get(k, 0) + v

    void_overlap = {
        p: inter_vol.get((void, p), 0) for p in pred_vol if p != void
    }

    tp_ious: dict[int, list[float]] = {}
    fp: dict[int, int] = {}
    fn: dict[int, int] = {}
    matched_gt: set[int] = set()
    matched_pred: set[int] = set()

    for (g, p) in sorted(inter_vol):
        if g == void or p == void:
            continue
        g_cls = g // INSTANCE_OFFSET
        if g_cls != p // INSTANCE_OFFSET:
            continue
        if g in matched_gt or p in matched_pred:
            continue
        inter = inter_vol[(g, p)]
        union = gt_vol[g] + pred_vol[p] - inter - void_overlap[p]
        iou = inter / union
        if iou > iou_threshold:
            tp_ious.setdefault(g_cls, []).append(iou)
            matched_gt.add(g)
            matched_pred.add(p)

    for g in gt_vol:
        if g == void or g in matched_gt:
            continue
        cls = g // INSTANCE_OFFSET
        fn[cls] = fn.get(cls, 0) + 1

    for p in pred_vol:
        if p == void or p in matched_pred:
            continue
        # Shield: mostly-void predictions are removed before FP counting.
        if 2 * void_overlap[p] > pred_vol[p]:
            continue
        cls = p // INSTANCE_OFFSET
        fp[cls] = fp.get(cls, 0) + 1

    classes = set(tp_ious) | set(fp) | set(fn)
    return MatchStats(
        {
            c: ClassStats(tuple(tp_ious.get(c, ())), fp.get(c, 0), fn.get(c, 0))
            for c in sorted(classes)
        }
    )
