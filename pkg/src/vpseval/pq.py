"""Image-level panoptic quality: the single-frame special case of the video metric."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import ClassTaxonomy, MatchStats, PanopticLabelMap
from .matching import count_frame_pair, match_counts

IOU_THRESHOLD = 0.5  # a pair matches only with IoU strictly greater than this


@dataclass(frozen=True)
class ClassScore:
    """Quality numbers for one class: pq = iou_sum / (tp + fp/2 + fn/2)."""

    pq: float
    sq: float
    rq: float
    iou_sum: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class PqResult:
    per_class: Mapping[int, ClassScore]
    pq_all: float | None
    pq_things: float | None
    pq_stuff: float | None


def class_scores(stats: MatchStats) -> dict[int, ClassScore]:
    """Per-class scores for every class present (tp + fp + fn > 0)."""
    out: dict[int, ClassScore] = {}
    for c in stats.present_classes:
        s = stats.get(c)
        iou_sum = s.iou_sum
        denom = s.tp + s.fp / 2 + s.fn / 2
        out[c] = ClassScore(
            pq=iou_sum / denom,
            sq=iou_sum / s.tp if s.tp > 0 else 0.0,
            rq=s.tp / denom,
            iou_sum=iou_sum,
            tp=s.tp,
            fp=s.fp,
            fn=s.fn,
        )
    return out


def mean_pq(scores: Mapping[int, ClassScore], class_ids: Sequence[int]) -> float | None:
    """Plain average of per-class pq over the given ids; None when empty."""
    ids = sorted(c for c in class_ids if c in scores)
    if not ids:
        return None
    return sum(scores[c].pq for c in ids) / len(ids)


def match_frame(
    gt: PanopticLabelMap, pred: PanopticLabelMap, taxonomy: ClassTaxonomy
) -> MatchStats:
    """Match the segments of one frame pair; IoU must exceed 0.5 strictly."""
    return match_counts([count_frame_pair(gt, pred, taxonomy)], taxonomy, IOU_THRESHOLD)


def compute_pq(stats: MatchStats, taxonomy: ClassTaxonomy) -> PqResult:
    """Reduce accumulated match statistics into per-class and mean PQ."""
    scores = class_scores(stats)
    return PqResult(
        per_class=scores,
        pq_all=mean_pq(scores, list(scores)),
        pq_things=mean_pq(scores, taxonomy.thing_ids),
        pq_stuff=mean_pq(scores, taxonomy.stuff_ids),
    )
