"""Cross-frame instance association baselines.

Three assigners produce temporally consistent instance ids from per-frame
pruned detections:

* ``cls_sort_assign``   rank-order matching by class probability within each
                        class (fails once several same-class objects swap
                        score order between frames);
* ``iou_match_assign``  greedy matching on flow-warped mask IoU;
* ``affinity_assign``   combined-cue matching: externally supplied (or
                        embedding-derived) affinity, warped mask IoU, class
                        agreement, and detection confidence.

Matching is greedy by default with documented tie-breaks; an optimal
assignment mode is available for comparison. Ids are never reused within a
video. Cross-class matches are always forbidden.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import FormatError, MissingInputError, ShapeError
from .fusion import InstancePrediction

GREEDY = "greedy"
OPTIMAL = "optimal"

CLS_SORT = "cls-sort"
IOU_MATCH = "iou-match"
AFFINITY = "affinity"
METHODS = (CLS_SORT, IOU_MATCH, AFFINITY)


@dataclass
class TrackRecord:
    track_id: int
    class_id: int
    box: tuple[float, float, float, float]
    mask: np.ndarray
    score: float
    embedding: np.ndarray | None
    last_seen: int
    last_index: int  # position in the pruned list of the last-seen frame


@dataclass
class TrackState:
    """Active tracks plus a monotone id counter (ids are never reused)."""

    tracks: dict[int, TrackRecord] = field(default_factory=dict)
    next_id: int = 1

    def fresh_id(self) -> int:
        tid = self.next_id
        self.next_id += 1
        return tid

    def active(self) -> list[TrackRecord]:
        return [self.tracks[t] for t in sorted(self.tracks)]

    def retire_stale(self, frame_index: int, max_gap: int) -> None:
        stale = [
            t for t, rec in self.tracks.items() if frame_index - rec.last_seen > max_gap
        ]
        for t in stale:
            del self.tracks[t]

    def observe(
        self,
        track_id: int,
        inst: InstancePrediction,
        frame_index: int,
        index_in_frame: int,
    ) -> None:
        self.tracks[track_id] = TrackRecord(
            track_id=track_id,
            class_id=inst.class_id,
            box=inst.box,
            mask=inst.mask,
            score=inst.score,
            embedding=inst.embedding,
            last_seen=frame_index,
            last_index=index_in_frame,
        )


@dataclass(frozen=True)
class CueWeights:
    affinity: float = 1.0
    iou: float = 1.0
    cls: float = 1.0
    conf: float = 1.0


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = int(np.count_nonzero(a & b))
    if inter == 0:
        return 0.0
    union = int(np.count_nonzero(a | b))
    return inter / union


def warp_mask(mask: np.ndarray, flow: np.ndarray | None) -> np.ndarray:
    """Forward-warp a mask by a dense (dx, dy) field; identity when absent.

    Displacements are rounded half-to-even; pixels leaving the frame drop out.
    """
    if flow is None:
        return mask
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise FormatError(f"flow field must have shape (h, w, 2), got {flow.shape}")
    if flow.shape[:2] != mask.shape:
        raise ShapeError(f"flow is {flow.shape[:2]}, mask is {mask.shape}")
    h, w = mask.shape
    ys, xs = np.nonzero(mask)
    if len(ys) == 0:
        return np.zeros_like(mask)
    nx = np.rint(xs + flow[ys, xs, 0]).astype(np.int64)
    ny = np.rint(ys + flow[ys, xs, 1]).astype(np.int64)
    keep = (nx >= 0) & (nx < w) & (ny >= 0) & (ny < h)
    out = np.zeros_like(mask)
    out[ny[keep], nx[keep]] = True
    return out


def affinity_from_embeddings(
    current: Sequence[InstancePrediction], tracks: Sequence[TrackRecord]
) -> np.ndarray:
    """Pairwise cosine similarity between detection and track embeddings."""
    out = np.zeros((len(current), len(tracks)), dtype=np.float64)
    for i, inst in enumerate(current):
        if inst.embedding is None:
            raise MissingInputError("detection lacks an embedding vector")
        for j, rec in enumerate(tracks):
            if rec.embedding is None:
                raise MissingInputError("track lacks an embedding vector")
            na = float(np.linalg.norm(inst.embedding))
            nb = float(np.linalg.norm(rec.embedding))
            if na == 0.0 or nb == 0.0:
                continue
            out[i, j] = float(np.dot(inst.embedding, rec.embedding)) / (na * nb)
    return out


def _greedy_pairs(
    scores: np.ndarray, valid: np.ndarray
) -> list[tuple[int, int]]:
    """Greedy one-to-one selection, descending score; ties prefer the lower
    row index, then the lower column index."""
    order = [
        (-float(scores[i, j]), i, j)
        for i in range(scores.shape[0])
        for j in range(scores.shape[1])
        if valid[i, j]
    ]
    order.sort()
    used_rows: set[int] = set()
    used_cols: set[int] = set()
    out = []
    for _, i, j in order:
        if i in used_rows or j in used_cols:
            continue
        used_rows.add(i)
        used_cols.add(j)
        out.append((i, j))
    return out


def _optimal_pairs(scores: np.ndarray, valid: np.ndarray) -> list[tuple[int, int]]:
    from scipy.optimize import linear_sum_assignment

    if not valid.any():
        return []
    cost = np.where(valid, scores, -1e18)
    rows, cols = linear_sum_assignment(cost, maximize=True)
    return [(int(i), int(j)) for i, j in zip(rows, cols) if valid[i, j]]


def _select_pairs(scores, valid, assignment: str):
    if assignment == GREEDY:
        return _greedy_pairs(scores, valid)
    if assignment == OPTIMAL:
        return _optimal_pairs(scores, valid)
    raise ValueError(f"unknown assignment mode {assignment!r}")


def cls_sort_assign(
    current: Sequence[InstancePrediction],
    state: TrackState,
    frame_index: int,
) -> list[int]:
    """Within each class, match detections to tracks in score-rank order."""
    ids: list[int | None] = [None] * len(current)
    by_class: dict[int, list[int]] = {}
    for i, inst in enumerate(current):  # current is already score-sorted
        by_class.setdefault(inst.class_id, []).append(i)
    for cls, rows in by_class.items():
        tracks = sorted(
            (rec for rec in state.active() if rec.class_id == cls),
            key=lambda r: (-r.score, r.track_id),
        )
        for rank, i in enumerate(rows):
            if rank < len(tracks):
                ids[i] = tracks[rank].track_id
    return _finalize(ids, current, state, frame_index)


def iou_match_assign(
    current: Sequence[InstancePrediction],
    state: TrackState,
    frame_index: int,
    flow: np.ndarray | None = None,
    assignment: str = GREEDY,
) -> list[int]:
    """Greedy same-class matching on flow-warped mask IoU (IoU must be > 0)."""
    tracks = state.active()
    warped = [warp_mask(rec.mask, flow) for rec in tracks]
    n, m = len(current), len(tracks)
    scores = np.zeros((n, m), dtype=np.float64)
    valid = np.zeros((n, m), dtype=bool)
    for i, inst in enumerate(current):
        for j, rec in enumerate(tracks):
            if inst.class_id != rec.class_id:
                continue
            iou = mask_iou(inst.mask, warped[j])
            if iou > 0.0:
                scores[i, j] = iou
                valid[i, j] = True
    ids: list[int | None] = [None] * n
    for i, j in _select_pairs(scores, valid, assignment):
        ids[i] = tracks[j].track_id
    return _finalize(ids, current, state, frame_index)


def _minmax(matrix: np.ndarray) -> np.ndarray:
    """Scale a cue matrix to [0, 1]; a constant positive cue maps to 1."""
    if matrix.size == 0:
        return matrix
    lo = float(matrix.min())
    hi = float(matrix.max())
    if hi > lo:
        return (matrix - lo) / (hi - lo)
    return np.full_like(matrix, 1.0 if hi > 0 else 0.0)


def affinity_assign(
    current: Sequence[InstancePrediction],
    state: TrackState,
    frame_index: int,
    affinity: np.ndarray,
    weights: CueWeights = CueWeights(),
    flow: np.ndarray | None = None,
    assignment: str = GREEDY,
) -> list[int]:
    """Combined-cue matching against active tracks (columns sorted by id).

    combined = w_a * affinity' + w_iou * warped-IoU' + w_cls * same-class
             + w_conf * detection score, where ' marks per-frame min-max
    scaling of the matrix cues. Pairs must be same-class and the combined
    score must exceed 0 to match; otherwise a fresh id is issued.
    """
    tracks = state.active()
    n, m = len(current), len(tracks)
    affinity = np.asarray(affinity, dtype=np.float64)
    if affinity.shape != (n, m):
        raise ShapeError(
            f"affinity matrix is {affinity.shape}, expected {(n, m)}"
        )
    if n == 0 or m == 0:
        return _finalize([None] * n, current, state, frame_index)
    iou_mat = np.zeros((n, m), dtype=np.float64)
    same_class = np.zeros((n, m), dtype=bool)
    warped = [warp_mask(rec.mask, flow) for rec in tracks]
    for i, inst in enumerate(current):
        for j, rec in enumerate(tracks):
            same_class[i, j] = inst.class_id == rec.class_id
            if same_class[i, j]:
                iou_mat[i, j] = mask_iou(inst.mask, warped[j])
    conf = np.array([inst.score for inst in current], dtype=np.float64)
    combined = (
        weights.affinity * _minmax(affinity)
        + weights.iou * _minmax(iou_mat)
        + weights.cls * same_class.astype(np.float64)
        + weights.conf * conf[:, None]
    )
    valid = same_class & (combined > 0.0)
    ids: list[int | None] = [None] * n
    for i, j in _select_pairs(combined, valid, assignment):
        ids[i] = tracks[j].track_id
    return _finalize(ids, current, state, frame_index)


def _finalize(
    ids: list[int | None],
    current: Sequence[InstancePrediction],
    state: TrackState,
    frame_index: int,
) -> list[int]:
    final: list[int] = []
    for i, (tid, inst) in enumerate(zip(ids, current)):
        if tid is None:
            tid = state.fresh_id()
        state.observe(tid, inst, frame_index, i)
        final.append(tid)
    return final


def track_video(
    frames: Sequence[Sequence[InstancePrediction]],
    method: str,
    *,
    retire_gap: int = 5,
    flows: Sequence[np.ndarray | None] | None = None,
    affinities: Sequence[np.ndarray | None] | None = None,
    weights: CueWeights = CueWeights(),
    assignment: str = GREEDY,
) -> list[list[int]]:
    """Fold an assigner over the frames of one video.

    ``flows[f]`` warps frame f-1 toward frame f. ``affinities[f]`` is the
    (n_f x n_{f-1}) similarity of frame f's detections to frame f-1's, in
    pruned list order; it is re-aligned to active tracks here. When no
    external affinities are given, embeddings carried by the detections are
    used instead.
    """
    if method not in METHODS:
        raise ValueError(f"unknown tracking method {method!r}")
    state = TrackState()
    out: list[list[int]] = []
    for f, current in enumerate(frames):
        state.retire_stale(f, retire_gap)
        current = list(current)
        flow = flows[f] if flows is not None else None
        if method == CLS_SORT:
            ids = cls_sort_assign(current, state, f)
        elif method == IOU_MATCH:
            ids = iou_match_assign(current, state, f, flow=flow, assignment=assignment)
        else:
            tracks = state.active()
            if affinities is not None:
                consec = affinities[f]
                matrix = np.zeros((len(current), len(tracks)), dtype=np.float64)
                if consec is not None and len(current):
                    consec = np.asarray(consec, dtype=np.float64)
                    if consec.ndim != 2 or consec.shape[0] != len(current):
                        raise ShapeError(
                            f"frame {f}: affinity has shape {consec.shape}, "
                            f"expected {len(current)} rows"
                        )
                    for j, rec in enumerate(tracks):
                        if rec.last_seen == f - 1 and rec.last_index < consec.shape[1]:
                            matrix[:, j] = consec[:, rec.last_index]
            else:
                matrix = affinity_from_embeddings(current, tracks)
            ids = affinity_assign(
                current,
                state,
                f,
                matrix,
                weights=weights,
                flow=flow,
                assignment=assignment,
            )
        out.append(ids)
    return out
