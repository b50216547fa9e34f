"""Video panoptic quality: sliding snippet windows, tube matching, VPQ^k and VPQ.

Per window span k, a k-frame window slides through each video at the
annotation stride; tubes inside each window are matched in 3-D, and the
TP/FP/FN counts with summed TP IoUs are pooled over all videos before the
per-class ratio is taken. The final score averages VPQ^k over the configured
spans. Span 0 reduces to the image PQ metric exactly.
"""

from __future__ import annotations

import itertools
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, TypeVar

from .core import (
    ClassTaxonomy,
    MatchStats,
    PanopticLabelMap,
    SnippetWindow,
    VideoLabels,
)
from .errors import (
    DatasetValidationError,
    EmptyDatasetError,
    IncompleteWindowError,
    ValidationIssue,
)
from .matching import FrameCounts, count_frame_pair, match_counts
from .pq import ClassScore, class_scores, mean_pq

DEFAULT_WINDOW_SPANS = (0, 5, 10, 15)

_T = TypeVar("_T")
_U = TypeVar("_U")


@dataclass(frozen=True)
class VpqConfig:
    """Evaluation parameters: window spans k, annotation stride λ, IoU cut."""

    window_spans: tuple[int, ...] = DEFAULT_WINDOW_SPANS
    annotation_stride: int = 1
    iou_threshold: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "window_spans", tuple(self.window_spans))
        spans = self.window_spans
        if not spans:
            raise ValueError("window_spans must be non-empty")
        if any(k < 0 for k in spans) or list(spans) != sorted(set(spans)):
            raise ValueError("window_spans must be strictly increasing and >= 0")
        if self.annotation_stride < 1:
            raise ValueError("annotation_stride must be >= 1")
        if not 0.5 <= self.iou_threshold < 1.0:
            raise ValueError("iou_threshold must lie in [0.5, 1)")


@dataclass(frozen=True)
class VpqKResult:
    """Scores at one window span; None scores mean no class had any tube."""

    span: int
    per_class: Mapping[int, ClassScore]
    vpq: float | None
    vpq_things: float | None
    vpq_stuff: float | None


@dataclass(frozen=True)
class VpqResult:
    per_k: Mapping[int, VpqKResult]
    vpq: float
    vpq_things: float | None
    vpq_stuff: float | None


def enumerate_windows(video_length: int, span: int, stride: int) -> list[SnippetWindow]:
    """Window starts walk t = 0, λ, 2λ, ... while t <= T - 1 - k."""
    if video_length < 1:
        raise ValueError("video length must be >= 1")
    if span < 0 or stride < 1:
        raise ValueError("span must be >= 0 and stride >= 1")
    return [
        SnippetWindow(t, span, stride)
        for t in range(0, video_length - span, stride)
    ]


def match_window(
    gt_frames: Mapping[int, PanopticLabelMap],
    pred_frames: Mapping[int, PanopticLabelMap],
    window: SnippetWindow,
    taxonomy: ClassTaxonomy,
    iou_threshold: float = 0.5,
) -> MatchStats:
    """Match gt and predicted tubes inside one window."""
    counts = []
    for idx in window.annotated_indices:
        if idx not in gt_frames or idx not in pred_frames:
            raise IncompleteWindowError(
                f"window at t={window.start} needs annotated frame {idx}"
            )
        counts.append(count_frame_pair(gt_frames[idx], pred_frames[idx], taxonomy))
    return match_counts(counts, taxonomy, iou_threshold)


def compute_vpq(
    stats_by_k: Mapping[int, MatchStats],
    config: VpqConfig,
    taxonomy: ClassTaxonomy,
) -> VpqResult:
    """Reduce dataset-pooled per-k statistics into VPQ^k tables and final VPQ.

    Spans where no class has a single tube (for example spans longer than
    every video) are reported with None scores and excluded from the final
    averages. If that happens for every span the dataset is empty.
    """
    per_k: dict[int, VpqKResult] = {}
    for k in config.window_spans:
        stats = stats_by_k.get(k, MatchStats.empty())
        scores = class_scores(stats)
        per_k[k] = VpqKResult(
            span=k,
            per_class=scores,
            vpq=mean_pq(scores, list(scores)),
            vpq_things=mean_pq(scores, taxonomy.thing_ids),
            vpq_stuff=mean_pq(scores, taxonomy.stuff_ids),
        )

    def final(values: list[float | None]) -> float | None:
        present = [v for v in values if v is not None]
        if not present:
            return None
        return sum(present) / len(present)

    vpq = final([per_k[k].vpq for k in config.window_spans])
    if vpq is None:
        raise EmptyDatasetError("no class has any tube at any configured span")
    return VpqResult(
        per_k=per_k,
        vpq=vpq,
        vpq_things=final([per_k[k].vpq_things for k in config.window_spans]),
        vpq_stuff=final([per_k[k].vpq_stuff for k in config.window_spans]),
    )


def needed_indices(video_length: int, config: VpqConfig) -> tuple[int, ...]:
    """All annotated frame indices touched by any configured window."""
    out: set[int] = set()
    for k in config.window_spans:
        for w in enumerate_windows(video_length, k, config.annotation_stride):
            out.update(w.annotated_indices)
    return tuple(sorted(out))


def video_window_stats(
    gt: VideoLabels,
    pred: VideoLabels,
    taxonomy: ClassTaxonomy,
    config: VpqConfig,
) -> dict[int, MatchStats]:
    """Per-span statistics for one video, windows accumulated in start order.

    Frame-pair counting is done once per annotated frame and shared by every
    window that covers it.
    """
    issues = _pair_issues(gt, pred, config)
    if issues:
        raise DatasetValidationError(issues)
    counts: dict[int, FrameCounts] = {
        idx: count_frame_pair(gt.labels[idx], pred.labels[idx], taxonomy)
        for idx in needed_indices(gt.length, config)
    }
    out: dict[int, MatchStats] = {}
    for k in config.window_spans:
        parts = [
            match_counts(
                [counts[i] for i in w.annotated_indices],
                taxonomy,
                config.iou_threshold,
            )
            for w in enumerate_windows(gt.length, k, config.annotation_stride)
        ]
        out[k] = MatchStats.accumulate(parts)
    return out


def _pair_issues(
    gt: VideoLabels, pred: VideoLabels, config: VpqConfig
) -> list[ValidationIssue]:
    issues = []
    if gt.video_id != pred.video_id:
        issues.append(
            ValidationIssue(
                "video-id-mismatch",
                f"gt video {gt.video_id!r} paired with pred video {pred.video_id!r}",
                video=gt.video_id,
            )
        )
    if gt.length != pred.length:
        issues.append(
            ValidationIssue(
                "length-mismatch",
                f"video {gt.video_id!r}: gt has {gt.length} frames, pred has {pred.length}",
                video=gt.video_id,
            )
        )
        return issues
    for idx in needed_indices(gt.length, config):
        if idx not in gt.labels:
            issues.append(
                ValidationIssue(
                    "missing-gt-frame",
                    f"video {gt.video_id!r}: ground truth lacks annotated frame {idx}",
                    video=gt.video_id,
                    frame=idx,
                )
            )
        if idx not in pred.labels:
            issues.append(
                ValidationIssue(
                    "missing-pred-frame",
                    f"video {gt.video_id!r}: prediction lacks annotated frame {idx}",
                    video=gt.video_id,
                    frame=idx,
                )
            )
    return issues


def _map_ordered(
    fn: Callable[[_T], _U], items: Iterable[_T], threads: int
) -> Iterator[_U]:
    """Apply fn across items, results in input order, bounded submission."""
    if threads <= 1:
        for item in items:
            yield fn(item)
        return
    it = iter(items)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        # bounded look-ahead keeps streaming datasets out of memory
        pending = deque(ex.submit(fn, item) for item in itertools.islice(it, threads + 1))
        while pending:
            result = pending.popleft().result()
            for item in itertools.islice(it, 1):
                pending.append(ex.submit(fn, item))
            yield result


def evaluate_videos(
    pairs: Iterable[tuple[VideoLabels, VideoLabels]],
    taxonomy: ClassTaxonomy,
    config: VpqConfig,
    threads: int = 1,
) -> VpqResult:
    """Evaluate (gt, pred) video pairs; statistics pool dataset-wide per span.

    The iterable is consumed lazily (bounded look-ahead under threading), so
    datasets larger than memory can stream through. The result is independent
    of the thread count and of video order.
    """

    def worker(pair: tuple[VideoLabels, VideoLabels]) -> dict[int, MatchStats]:
        gt, pred = pair
        return video_window_stats(gt, pred, taxonomy, config)

    totals: dict[int, MatchStats] = {k: MatchStats.empty() for k in config.window_spans}
    for per_video in _map_ordered(worker, pairs, threads):
        for k, stats in per_video.items():
            totals[k] = totals[k] + stats
    return compute_vpq(totals, config, taxonomy)


def per_video_vpq(
    pairs: Iterable[tuple[VideoLabels, VideoLabels]],
    taxonomy: ClassTaxonomy,
    config: VpqConfig,
) -> dict[str, VpqResult]:
    """Diagnostic per-video scores; never the headline number."""
    return {
        gt.video_id: compute_vpq(
            video_window_stats(gt, pred, taxonomy, config), config, taxonomy
        )
        for gt, pred in pairs
    }
