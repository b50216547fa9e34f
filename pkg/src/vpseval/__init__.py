"""Video panoptic segmentation evaluation engine and dataset toolkit."""

__version__ = "0.1.0"

from .core import (
    STUFF,
    THING,
    ClassDef,
    ClassStats,
    ClassTaxonomy,
    MatchStats,
    PanopticLabelMap,
    Segment,
    SegmentId,
    SnippetWindow,
    Tube,
    VideoLabels,
    build_tubes,
    extract_segments,
    tube_iou,
)
from .pq import ClassScore, PqResult, compute_pq, match_frame
from .vpq import (
    VpqConfig,
    VpqKResult,
    VpqResult,
    compute_vpq,
    enumerate_windows,
    evaluate_videos,
    match_window,
    per_video_vpq,
)
from .fusion import (
    InstancePrediction,
    SemanticMap,
    assign_initial_ids,
    fuse,
    prune_instances,
)
from .track import (
    CueWeights,
    TrackState,
    affinity_assign,
    cls_sort_assign,
    iou_match_assign,
    track_video,
)

__all__ = [
    "__version__",
    "STUFF",
    "THING",
    "ClassDef",
    "ClassScore",
    "ClassStats",
    "ClassTaxonomy",
    "CueWeights",
    "InstancePrediction",
    "MatchStats",
    "PanopticLabelMap",
    "PqResult",
    "Segment",
    "SegmentId",
    "SemanticMap",
    "SnippetWindow",
    "TrackState",
    "Tube",
    "VideoLabels",
    "VpqConfig",
    "VpqKResult",
    "VpqResult",
    "affinity_assign",
    "assign_initial_ids",
    "build_tubes",
    "cls_sort_assign",
    "compute_pq",
    "compute_vpq",
    "enumerate_windows",
    "evaluate_videos",
    "extract_segments",
    "fuse",
    "iou_match_assign",
    "match_frame",
    "match_window",
    "per_video_vpq",
    "prune_instances",
    "track_video",
    "tube_iou",
]
