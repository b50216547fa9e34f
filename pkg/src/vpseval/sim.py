"""Synthetic scenes, controlled prediction perturbations, and a naive oracle.

The generator paints rectangles and ellipses moving over stuff bands, which is
enough to produce every matching edge case (exact-0.5 IoU ties, absence,
occlusion, void shielding). ``oracle_vpq`` re-derives the video metric from
explicit (frame, x, y) cell sets with exhaustive pairwise IoU; it shares the
result dataclasses with the engine but none of its matching code, so exact
agreement between the two is a meaningful check.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence, Union

import numpy as np

from .core import (
    INSTANCE_OFFSET,
    STUFF,
    THING,
    ClassDef,
    ClassTaxonomy,
    PanopticLabelMap,
    SegmentId,
    VideoLabels,
    pack_segment_id,
)
from .errors import (
    DatasetValidationError,
    EmptyDatasetError,
    PerturbationError,
    SceneSpecError,
    ValidationIssue,
)
from .pq import ClassScore
from .vpq import VpqConfig, VpqKResult, VpqResult

RECTANGLE = "rectangle"
ELLIPSE = "ellipse"


@dataclass(frozen=True)
class ObjectSpec:
    """One moving thing: class, initial box, velocity in px/frame, shape."""

    class_id: int
    box: tuple[float, float, float, float]  # x1, y1, x2, y2
    velocity: tuple[float, float] = (0.0, 0.0)
    shape: str = RECTANGLE
    allow_exit: bool = False

    def __post_init__(self):
        if self.shape not in (RECTANGLE, ELLIPSE):
            raise SceneSpecError(f"unknown shape {self.shape!r}")
        x1, y1, x2, y2 = self.box
        if not (x2 > x1 and y2 > y1):
            raise SceneSpecError(f"degenerate box {self.box}")


@dataclass(frozen=True)
class SceneSpec:
    """Deterministic description of one synthetic video."""

    width: int
    height: int
    length: int
    stride: int
    background: tuple[int, ...]
    objects: tuple[ObjectSpec, ...] = ()
    seed: int = 0
    video_id: str = "video0"

    def __post_init__(self):
        object.__setattr__(self, "background", tuple(self.background))
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.width < 1 or self.height < 1:
            raise SceneSpecError("frame size must be positive")
        if self.length < 1:
            raise SceneSpecError("video length must be >= 1")
        if self.stride < 1:
            raise SceneSpecError("stride must be >= 1")
        if not self.background:
            raise SceneSpecError("at least one background band is required")


def _object_mask(obj: ObjectSpec, frame: int, width: int, height: int) -> np.ndarray:
    x1 = obj.box[0] + obj.velocity[0] * frame
    y1 = obj.box[1] + obj.velocity[1] * frame
    x2 = obj.box[2] + obj.velocity[0] * frame
    y2 = obj.box[3] + obj.velocity[1] * frame
    xs = np.arange(width) + 0.5
    ys = np.arange(height) + 0.5
    if obj.shape == RECTANGLE:
        col = (xs >= x1) & (xs < x2)
        row = (ys >= y1) & (ys < y2)
        return row[:, None] & col[None, :]
    cx, cy = (x1 + x2) / 2, (y1 + y2) / 2
    a, b = (x2 - x1) / 2, (y2 - y1) / 2
    nx = (xs - cx) / a
    ny = (ys - cy) / b
    return (nx[None, :] ** 2 + ny[:, None] ** 2) <= 1.0


def generate(
    spec: SceneSpec, taxonomy: ClassTaxonomy, annotated_only: bool = False
) -> VideoLabels:
    """Render a scene: background bands first, objects painted in listing order.

    Later-listed objects occlude earlier ones. Instance ids run 1.. per class
    in listing order. Output is fully determined by the spec.
    """
    for c in spec.background:
        if c != taxonomy.void_id and not taxonomy.is_stuff(c):
            raise SceneSpecError(f"background class {c} must be stuff or void")
    for obj in spec.objects:
        if not taxonomy.is_thing(obj.class_id):
            raise SceneSpecError(f"object class {obj.class_id} must be a thing class")

    base = np.empty((spec.height, spec.width), dtype=np.int32)
    n_bands = len(spec.background)
    for i, c in enumerate(spec.background):
        top = i * spec.height // n_bands
        bottom = (i + 1) * spec.height // n_bands
        base[top:bottom, :] = pack_segment_id(c, 0)

    instance_ids: list[int] = []
    counters: dict[int, int] = {}
    for obj in spec.objects:
        counters[obj.class_id] = counters.get(obj.class_id, 0) + 1
        instance_ids.append(counters[obj.class_id])

    frames = (
        range(0, spec.length, spec.stride) if annotated_only else range(spec.length)
    )
    labels: dict[int, PanopticLabelMap] = {}
    for f in frames:
        packed = base.copy()
        for obj, inst in zip(spec.objects, instance_ids):
            mask = _object_mask(obj, f, spec.width, spec.height)
            if not mask.any():
                if not obj.allow_exit:
                    raise SceneSpecError(
                        f"object {obj.class_id}-{inst} left the frame at t={f} "
                        "without allow_exit"
                    )
                continue
            packed[mask] = pack_segment_id(obj.class_id, inst)
        labels[f] = PanopticLabelMap(packed)
    return VideoLabels(spec.video_id, spec.length, labels)


# ---------------------------------------------------------------------------
# Perturbations


@dataclass(frozen=True)
class IdSwap:
    """Exchange two instance ids of one thing class at a single frame."""

    frame: int
    class_id: int
    instance_a: int
    instance_b: int


@dataclass(frozen=True)
class DropSegment:
    """Remove one segment at one frame; its pixels become void."""

    frame: int
    segment: SegmentId


@dataclass(frozen=True)
class ClassFlip:
    """Relabel a segment to another class in every frame it appears."""

    segment: SegmentId
    new_class: int


@dataclass(frozen=True)
class BoundaryErode:
    """Shrink a segment by 4-connected erosion; stripped pixels become void."""

    segment: SegmentId
    radius: int


@dataclass(frozen=True)
class SpawnFp:
    """Paint a fresh rectangle segment at one frame, overwriting what is there."""

    frame: int
    class_id: int
    box: tuple[int, int, int, int]


Perturbation = Union[IdSwap, DropSegment, ClassFlip, BoundaryErode, SpawnFp]


def _erode(mask: np.ndarray, radius: int) -> np.ndarray:
    m = mask
    for _ in range(radius):
        p = np.pad(m, 1, constant_values=False)
        m = (
            p[1:-1, 1:-1]
            & p[:-2, 1:-1]
            & p[2:, 1:-1]
            & p[1:-1, :-2]
            & p[1:-1, 2:]
        )
    return m


def perturb(
    video: VideoLabels,
    perturbations: Sequence[Perturbation],
    taxonomy: ClassTaxonomy,
) -> VideoLabels:
    """Apply perturbations in order; the result is still a valid partition."""
    arrays = {f: np.array(m.packed) for f, m in video.labels.items()}
    void = taxonomy.void_packed
    spawn_counters: dict[int, int] = {}

    def require_frame(f: int, what: str):
        if f not in arrays:
            raise PerturbationError(f"{what} references missing frame {f}")

    for p in perturbations:
        if isinstance(p, IdSwap):
            require_frame(p.frame, "id-swap")
            if not taxonomy.is_thing(p.class_id):
                raise PerturbationError(f"id-swap class {p.class_id} is not a thing")
            arr = arrays[p.frame]
            pa = pack_segment_id(p.class_id, p.instance_a)
            pb = pack_segment_id(p.class_id, p.instance_b)
            ma = arr == pa
            mb = arr == pb
            if not ma.any() and not mb.any():
                raise PerturbationError(
                    f"id-swap at frame {p.frame}: neither instance {p.instance_a} "
                    f"nor {p.instance_b} of class {p.class_id} exists"
                )
            arr[ma] = pb
            arr[mb] = pa
        elif isinstance(p, DropSegment):
            require_frame(p.frame, "drop-segment")
            arr = arrays[p.frame]
            pid = pack_segment_id(*p.segment)
            mask = arr == pid
            if not mask.any():
                raise PerturbationError(
                    f"drop-segment: {p.segment} absent at frame {p.frame}"
                )
            arr[mask] = void
        elif isinstance(p, ClassFlip):
            if p.new_class not in taxonomy:
                raise PerturbationError(f"class-flip target {p.new_class} unknown")
            pid = pack_segment_id(*p.segment)
            inst = 0 if taxonomy.is_stuff(p.new_class) else p.segment.instance_id
            new_pid = pack_segment_id(p.new_class, inst)
            hit = False
            for arr in arrays.values():
                mask = arr == pid
                if mask.any():
                    hit = True
                    arr[mask] = new_pid
            if not hit:
                raise PerturbationError(f"class-flip: segment {p.segment} never appears")
        elif isinstance(p, BoundaryErode):
            if p.radius < 1:
                raise PerturbationError("boundary-erode radius must be >= 1")
            pid = pack_segment_id(*p.segment)
            hit = False
            for arr in arrays.values():
                mask = arr == pid
                if mask.any():
                    hit = True
                    arr[mask & ~_erode(mask, p.radius)] = void
            if not hit:
                raise PerturbationError(
                    f"boundary-erode: segment {p.segment} never appears"
                )
        elif isinstance(p, SpawnFp):
            require_frame(p.frame, "spawn-fp")
            if p.class_id not in taxonomy:
                raise PerturbationError(f"spawn-fp class {p.class_id} unknown")
            arr = arrays[p.frame]
            h, w = arr.shape
            x1, y1, x2, y2 = p.box
            x1, y1 = max(0, int(x1)), max(0, int(y1))
            x2, y2 = min(w, int(x2)), min(h, int(y2))
            if x2 <= x1 or y2 <= y1:
                raise PerturbationError(f"spawn-fp box {p.box} has no visible area")
            if taxonomy.is_stuff(p.class_id):
                inst = 0
            else:
                if p.class_id not in spawn_counters:
                    existing = 0
                    for arr2 in arrays.values():
                        ids = np.unique(arr2[arr2 // INSTANCE_OFFSET == p.class_id])
                        if ids.size:
                            existing = max(existing, int(ids.max()) % INSTANCE_OFFSET)
                    spawn_counters[p.class_id] = existing
                spawn_counters[p.class_id] += 1
                inst = spawn_counters[p.class_id]
            arr[y1:y2, x1:x2] = pack_segment_id(p.class_id, inst)
        else:
            raise PerturbationError(f"unknown perturbation {p!r}")

    return VideoLabels(
        video.video_id,
        video.length,
        {f: PanopticLabelMap(a) for f, a in arrays.items()},
    )


_PERTURBATION_KINDS = {
    "id-swap": IdSwap,
    "drop-segment": DropSegment,
    "class-flip": ClassFlip,
    "boundary-erode": BoundaryErode,
    "spawn-fp": SpawnFp,
}


def perturbations_to_json(perturbations: Sequence[Perturbation]) -> list[dict]:
    out = []
    for p in perturbations:
        if isinstance(p, IdSwap):
            out.append(
                {
                    "kind": "id-swap",
                    "frame": p.frame,
                    "class_id": p.class_id,
                    "instance_a": p.instance_a,
                    "instance_b": p.instance_b,
                }
            )
        elif isinstance(p, DropSegment):
            out.append(
                {"kind": "drop-segment", "frame": p.frame, "segment": list(p.segment)}
            )
        elif isinstance(p, ClassFlip):
            out.append(
                {
                    "kind": "class-flip",
                    "segment": list(p.segment),
                    "new_class": p.new_class,
                }
            )
        elif isinstance(p, BoundaryErode):
            out.append(
                {
                    "kind": "boundary-erode",
                    "segment": list(p.segment),
                    "radius": p.radius,
                }
            )
        elif isinstance(p, SpawnFp):
            out.append(
                {
                    "kind": "spawn-fp",
                    "frame": p.frame,
                    "class_id": p.class_id,
                    "box": list(p.box),
                }
            )
    return out


def perturbations_from_json(items: Sequence[Mapping]) -> list[Perturbation]:
    out: list[Perturbation] = []
    for item in items:
        kind = item.get("kind")
        if kind == "id-swap":
            out.append(
                IdSwap(
                    item["frame"],
                    item["class_id"],
                    item["instance_a"],
                    item["instance_b"],
                )
            )
        elif kind == "drop-segment":
            out.append(DropSegment(item["frame"], SegmentId(*item["segment"])))
        elif kind == "class-flip":
            out.append(ClassFlip(SegmentId(*item["segment"]), item["new_class"]))
        elif kind == "boundary-erode":
            out.append(BoundaryErode(SegmentId(*item["segment"]), item["radius"]))
        elif kind == "spawn-fp":
            out.append(SpawnFp(item["frame"], item["class_id"], tuple(item["box"])))
        else:
            raise PerturbationError(f"unknown perturbation kind {kind!r}")
    return out


# ---------------------------------------------------------------------------
# Naive oracle


def _naive_tubes(video: VideoLabels, indices: Sequence[int], taxonomy: ClassTaxonomy):
    tubes: dict[SegmentId, set[tuple[int, int, int]]] = {}
    void_cells: set[tuple[int, int, int]] = set()
    for f in indices:
        grid = video.labels[f]
        cls_rows = grid.class_ids().tolist()
        inst_rows = grid.instance_ids().tolist()
        for y, (crow, zrow) in enumerate(zip(cls_rows, inst_rows)):
            for x, (c, z) in enumerate(zip(crow, zrow)):
                if c == taxonomy.void_id:
                    void_cells.add((f, x, y))
                else:
                    tubes.setdefault(SegmentId(c, z), set()).add((f, x, y))
    return tubes, void_cells


def _oracle_windows(length: int, span: int, stride: int) -> list[list[int]]:
    windows = []
    t = 0
    while t <= length - 1 - span:
        idxs = []
        i = t
        while i <= t + span:
            idxs.append(i)
            i += stride
        windows.append(idxs)
        t += stride
    return windows


def oracle_vpq(
    gt: VideoLabels | Sequence[VideoLabels],
    pred: VideoLabels | Sequence[VideoLabels],
    taxonomy: ClassTaxonomy,
    config: VpqConfig,
) -> VpqResult:
    """Brute-force VPQ from explicit pixel-time cell sets (desk-scale only)."""
    gt_list = [gt] if isinstance(gt, VideoLabels) else list(gt)
    pred_list = [pred] if isinstance(pred, VideoLabels) else list(pred)

    issues = []
    if len(gt_list) != len(pred_list):
        issues.append(
            ValidationIssue(
                "video-count-mismatch",
                f"{len(gt_list)} gt videos vs {len(pred_list)} predictions",
            )
        )
    for g, p in zip(gt_list, pred_list):
        if g.video_id != p.video_id:
            issues.append(
                ValidationIssue(
                    "video-id-mismatch",
                    f"gt video {g.video_id!r} paired with pred video {p.video_id!r}",
                    video=g.video_id,
                )
            )
        if g.length != p.length:
            issues.append(
                ValidationIssue(
                    "length-mismatch",
                    f"video {g.video_id!r}: gt has {g.length} frames, pred has {p.length}",
                    video=g.video_id,
                )
            )
            continue
        for k in config.window_spans:
            for idxs in _oracle_windows(g.length, k, config.annotation_stride):
                for i in idxs:
                    if i not in g.labels:
                        issues.append(
                            ValidationIssue(
                                "missing-gt-frame",
                                f"video {g.video_id!r}: ground truth lacks annotated frame {i}",
                                video=g.video_id,
                                frame=i,
                            )
                        )
                    if i not in p.labels:
                        issues.append(
                            ValidationIssue(
                                "missing-pred-frame",
                                f"video {g.video_id!r}: prediction lacks annotated frame {i}",
                                video=g.video_id,
                                frame=i,
                            )
                        )
    issues = list(dict.fromkeys(issues))
    if issues:
        raise DatasetValidationError(issues)

    per_k: dict[int, VpqKResult] = {}
    for k in config.window_spans:
        ious: dict[int, list[float]] = {}
        fp: dict[int, int] = {}
        fn: dict[int, int] = {}
        for g_vid, p_vid in zip(gt_list, pred_list):
            for idxs in _oracle_windows(g_vid.length, k, config.annotation_stride):
                gt_tubes, gt_void = _naive_tubes(g_vid, idxs, taxonomy)
                pr_tubes, _ = _naive_tubes(p_vid, idxs, taxonomy)
                matched_pred: set[SegmentId] = set()
                for gid in sorted(gt_tubes):
                    a = gt_tubes[gid]
                    hit = False
                    for pid in sorted(pr_tubes):
                        if pid in matched_pred or pid.class_id != gid.class_id:
                            continue
                        b = pr_tubes[pid]
                        inter = len(a & b)
                        if inter == 0:
                            continue
                        union = len(a) + len(b) - inter - len(b & gt_void)
                        iou = inter / union
                        if iou > config.iou_threshold:
                            ious.setdefault(gid.class_id, []).append(iou)
                            matched_pred.add(pid)
                            hit = True
                            break
                    if not hit:
                        fn[gid.class_id] = fn.get(gid.class_id, 0) + 1
                for pid in sorted(pr_tubes):
                    if pid in matched_pred:
                        continue
                    b = pr_tubes[pid]
                    if 2 * len(b & gt_void) > len(b):
                        continue
                    fp[pid.class_id] = fp.get(pid.class_id, 0) + 1

        scores: dict[int, ClassScore] = {}
        for c in sorted(set(ious) | set(fp) | set(fn)):
            tp = len(ious.get(c, []))
            c_fp = fp.get(c, 0)
            c_fn = fn.get(c, 0)
            if tp + c_fp + c_fn == 0:
                continue
            iou_sum = math.fsum(ious.get(c, []))
            denom = tp + c_fp / 2 + c_fn / 2
            scores[c] = ClassScore(
                pq=iou_sum / denom,
                sq=iou_sum / tp if tp > 0 else 0.0,
                rq=tp / denom,
                iou_sum=iou_sum,
                tp=tp,
                fp=c_fp,
                fn=c_fn,
            )

        def naive_mean(ids) -> float | None:
            present = sorted(c for c in ids if c in scores)
            if not present:
                return None
            return sum(scores[c].pq for c in present) / len(present)

        per_k[k] = VpqKResult(
            span=k,
            per_class=scores,
            vpq=naive_mean(list(scores)),
            vpq_things=naive_mean(taxonomy.thing_ids),
            vpq_stuff=naive_mean(taxonomy.stuff_ids),
        )

    def naive_final(values) -> float | None:
        present = [v for v in values if v is not None]
        if not present:
            return None
        return sum(present) / len(present)

    vpq = naive_final([per_k[k].vpq for k in config.window_spans])
    if vpq is None:
        raise EmptyDatasetError("no class has any tube at any configured span")
    return VpqResult(
        per_k=per_k,
        vpq=vpq,
        vpq_things=naive_final([per_k[k].vpq_things for k in config.window_spans]),
        vpq_stuff=naive_final([per_k[k].vpq_stuff for k in config.window_spans]),
    )


# ---------------------------------------------------------------------------
# Randomized fixtures and the bundled benchmark scene


def default_taxonomy() -> ClassTaxonomy:
    return ClassTaxonomy(
        classes=(
            ClassDef(1, "car", THING),
            ClassDef(2, "person", THING),
            ClassDef(10, "road", STUFF),
            ClassDef(11, "sky", STUFF),
        ),
        void_id=255,
    )


def random_taxonomy(rng: np.random.Generator) -> ClassTaxonomy:
    """Up to 4 classes with at least one thing and one stuff."""
    n_things = int(rng.integers(1, 3))
    n_stuff = int(rng.integers(1, 3))
    classes = [ClassDef(i + 1, f"thing{i + 1}", THING) for i in range(n_things)]
    classes += [ClassDef(20 + i, f"stuff{20 + i}", STUFF) for i in range(n_stuff)]
    return ClassTaxonomy(classes=tuple(classes), void_id=255)


def random_scene_spec(
    rng: np.random.Generator,
    taxonomy: ClassTaxonomy,
    *,
    stride: int | None = None,
    max_size: int = 16,
    max_length: int = 10,
    max_objects: int = 4,
    video_id: str = "video0",
) -> SceneSpec:
    width = int(rng.integers(8, max_size + 1))
    height = int(rng.integers(8, max_size + 1))
    if stride is None:
        stride = int(rng.integers(1, 4))
    # keep the annotated frame count desk-scale (at most 6)
    length = int(rng.integers(2, min(max_length, 6 * stride) + 1))
    stuff = sorted(taxonomy.stuff_ids)
    bands = [int(rng.choice(stuff)) for _ in range(int(rng.integers(1, 3)))]
    if rng.random() < 0.25:
        bands.append(taxonomy.void_id)  # exercise void shielding
    things = sorted(taxonomy.thing_ids)
    objects = []
    for _ in range(int(rng.integers(1, max_objects + 1))):
        w = int(rng.integers(2, max(3, width // 2)))
        h = int(rng.integers(2, max(3, height // 2)))
        x1 = int(rng.integers(0, width - w))
        y1 = int(rng.integers(0, height - h))
        objects.append(
            ObjectSpec(
                class_id=int(rng.choice(things)),
                box=(x1, y1, x1 + w, y1 + h),
                velocity=(float(rng.integers(-1, 2)), float(rng.integers(-1, 2))),
                shape=RECTANGLE if rng.random() < 0.7 else ELLIPSE,
                allow_exit=True,
            )
        )
    return SceneSpec(
        width=width,
        height=height,
        length=length,
        stride=stride,
        background=tuple(bands),
        objects=tuple(objects),
        video_id=video_id,
    )


def random_perturbations(
    rng: np.random.Generator,
    video: VideoLabels,
    taxonomy: ClassTaxonomy,
    max_events: int = 4,
) -> list[Perturbation]:
    """Draw valid perturbations against the given ground truth."""
    present: list[tuple[int, SegmentId]] = []
    for f in sorted(video.labels):
        packed = video.labels[f].packed
        for pid in np.unique(packed).tolist():
            cls, inst = pid // INSTANCE_OFFSET, pid % INSTANCE_OFFSET
            if cls != taxonomy.void_id:
                present.append((f, SegmentId(cls, inst)))
    if not present:
        return []
    out: list[Perturbation] = []
    working = video
    class_ids = sorted(c.class_id for c in taxonomy.classes)
    for _ in range(int(rng.integers(0, max_events + 1))):
        f, sid = present[int(rng.integers(0, len(present)))]
        kind = int(rng.integers(0, 5))
        candidate: Perturbation | None = None
        if kind == 0 and taxonomy.is_thing(sid.class_id):
            candidate = IdSwap(f, sid.class_id, sid.instance_id, sid.instance_id + 1)
        elif kind == 1:
            candidate = DropSegment(f, sid)
        elif kind == 2:
            target = class_ids[int(rng.integers(0, len(class_ids)))]
            if target != sid.class_id:
                candidate = ClassFlip(sid, target)
        elif kind == 3:
            candidate = BoundaryErode(sid, int(rng.integers(1, 3)))
        else:
            grid = video.labels[f]
            w = int(rng.integers(2, max(3, grid.width // 2)))
            h = int(rng.integers(2, max(3, grid.height // 2)))
            x1 = int(rng.integers(0, grid.width - w))
            y1 = int(rng.integers(0, grid.height - h))
            cls = class_ids[int(rng.integers(0, len(class_ids)))]
            candidate = SpawnFp(f, cls, (x1, y1, x1 + w, y1 + h))
        if candidate is None:
            continue
        try:
            # earlier events may have removed the reference; keep only events
            # that are valid in sequence
            working = perturb(working, [candidate], taxonomy)
        except PerturbationError:
            continue
        out.append(candidate)
    return out


def scene_document_to_dict(taxonomy: ClassTaxonomy, scenes: Sequence[SceneSpec]) -> dict:
    return {
        "taxonomy": {
            "void_id": taxonomy.void_id,
            "categories": [
                {"id": c.class_id, "name": c.name, "kind": c.kind}
                for c in taxonomy.classes
            ],
        },
        "scenes": [
            {
                "video_id": s.video_id,
                "width": s.width,
                "height": s.height,
                "length": s.length,
                "stride": s.stride,
                "seed": s.seed,
                "background": list(s.background),
                "objects": [
                    {
                        "class_id": o.class_id,
                        "box": list(o.box),
                        "velocity": list(o.velocity),
                        "shape": o.shape,
                        "allow_exit": o.allow_exit,
                    }
                    for o in s.objects
                ],
            }
            for s in scenes
        ],
    }


def scene_document_from_dict(doc: Mapping) -> tuple[ClassTaxonomy, list[SceneSpec]]:
    tax = doc.get("taxonomy")
    if not isinstance(tax, Mapping) or "categories" not in tax:
        raise SceneSpecError("scene document needs a 'taxonomy' with 'categories'")
    taxonomy = ClassTaxonomy(
        classes=tuple(
            ClassDef(c["id"], c.get("name", str(c["id"])), c["kind"])
            for c in tax["categories"]
        ),
        void_id=int(tax.get("void_id", 255)),
    )
    scenes = []
    raw_scenes = doc.get("scenes")
    if not raw_scenes:
        raise SceneSpecError("scene document lists no scenes")
    for i, s in enumerate(raw_scenes):
        scenes.append(
            SceneSpec(
                width=int(s["width"]),
                height=int(s["height"]),
                length=int(s["length"]),
                stride=int(s["stride"]),
                background=tuple(s["background"]),
                objects=tuple(
                    ObjectSpec(
                        class_id=int(o["class_id"]),
                        box=tuple(o["box"]),
                        velocity=tuple(o.get("velocity", (0.0, 0.0))),
                        shape=o.get("shape", RECTANGLE),
                        allow_exit=bool(o.get("allow_exit", False)),
                    )
                    for o in s.get("objects", ())
                ),
                seed=int(s.get("seed", 0)),
                video_id=s.get("video_id", f"video{i}"),
            )
        )
    return taxonomy, scenes


def load_scene_document(path) -> tuple[ClassTaxonomy, list[SceneSpec]]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except (json.JSONDecodeError, UnicodeDecodeError) as err:
            raise SceneSpecError(f"{path}: not valid JSON: {err}") from err
    try:
        return scene_document_from_dict(doc)
    except (KeyError, TypeError, ValueError) as err:
        raise SceneSpecError(f"{path}: bad scene document: {err}") from err


def bundled_crowded_scene() -> tuple[ClassTaxonomy, SceneSpec]:
    """The packaged crowded-scene benchmark used by the tracker comparison."""
    doc = json.loads(
        resources.files("vpseval.data").joinpath("crowded_scene.json").read_text()
    )
    taxonomy, scenes = scene_document_from_dict(doc)
    return taxonomy, scenes[0]


# ---------------------------------------------------------------------------
# Detection harness: perfect masks with controlled score jitter


def semantic_from_labels(video: VideoLabels) -> dict[int, np.ndarray]:
    """Semantic class-id maps derived from labels (void stays void)."""
    return {f: np.asarray(m.class_ids()) for f, m in video.labels.items()}


def detections_from_labels(
    video: VideoLabels,
    taxonomy: ClassTaxonomy,
    *,
    seed: int = 0,
    score_range: tuple[float, float] = (0.65, 0.99),
    embed_identity: bool = True,
):
    """Per-frame instance predictions with exact masks and shuffled scores.

    Scores are drawn per (frame, object), so the per-frame score ranking of
    same-class objects changes over time; embeddings are one-hot in the true
    object identity, giving an oracle affinity signal.
    """
    from .fusion import InstancePrediction

    rng = np.random.default_rng(seed)
    identity: dict[SegmentId, int] = {}
    for f in sorted(video.labels):
        packed = video.labels[f].packed
        for pid in np.unique(packed).tolist():
            sid = SegmentId(pid // INSTANCE_OFFSET, pid % INSTANCE_OFFSET)
            if taxonomy.is_thing(sid.class_id) and sid not in identity:
                identity[sid] = len(identity)
    dim = max(1, len(identity))

    per_frame: dict[int, list[InstancePrediction]] = {}
    for f in sorted(video.labels):
        grid = video.labels[f]
        packed = grid.packed
        dets = []
        for pid in np.unique(packed).tolist():
            sid = SegmentId(pid // INSTANCE_OFFSET, pid % INSTANCE_OFFSET)
            if not taxonomy.is_thing(sid.class_id):
                continue
            mask = packed == pid
            ys, xs = np.nonzero(mask)
            box = (
                float(xs.min()),
                float(ys.min()),
                float(xs.max()) + 1.0,
                float(ys.max()) + 1.0,
            )
            score = float(rng.uniform(*score_range))
            embedding = None
            if embed_identity:
                embedding = np.zeros(dim, dtype=np.float64)
                embedding[identity[sid]] = 1.0
            dets.append(
                InstancePrediction(
                    box=box,
                    class_probs={sid.class_id: score},
                    mask=mask,
                    embedding=embedding,
                )
            )
        per_frame[f] = dets
    return per_frame
