"""Core domain types: taxonomies, dense panoptic label maps, segments, tubes.

A panoptic label map assigns every pixel exactly one (class id, instance id)
pair. Stuff classes always carry instance id 0; a reserved void id marks
unlabeled pixels and never forms a segment. A tube groups the per-frame
segments of one (class, instance) pair across the annotated indices of a
snippet window, which is the unit matched by the video metric.

Pixels are stored packed, ``class_id * INSTANCE_OFFSET + instance_id`` in one
int32 per pixel, so segment statistics reduce to integer counting. All types
here are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import IncompleteWindowError, LabelFormatError

THING = "thing"
STUFF = "stuff"

INSTANCE_OFFSET = 1 << 16
MAX_INSTANCE_ID = INSTANCE_OFFSET - 1
MAX_CLASS_ID = (2**31 - 1) // INSTANCE_OFFSET - 1


class SegmentId(NamedTuple):
    """A (class, instance) pair; instance is 0 for stuff and for void."""

    class_id: int
    instance_id: int


def pack_segment_id(class_id: int, instance_id: int) -> int:
    if not 0 <= class_id <= MAX_CLASS_ID:
        raise LabelFormatError(f"class id {class_id} outside [0, {MAX_CLASS_ID}]")
    if not 0 <= instance_id <= MAX_INSTANCE_ID:
        raise LabelFormatError(
            f"instance id {instance_id} outside [0, {MAX_INSTANCE_ID}]"
        )
    return class_id * INSTANCE_OFFSET + instance_id


def unpack_segment_id(packed: int) -> SegmentId:
    return SegmentId(packed // INSTANCE_OFFSET, packed % INSTANCE_OFFSET)


@dataclass(frozen=True)
class ClassDef:
    class_id: int
    name: str
    kind: str  # THING or STUFF

    def __post_init__(self):
        if self.kind not in (THING, STUFF):
            raise ValueError(f"kind must be {THING!r} or {STUFF!r}, got {self.kind!r}")
        if not 0 <= self.class_id <= MAX_CLASS_ID:
            raise ValueError(f"class id {self.class_id} outside [0, {MAX_CLASS_ID}]")


@dataclass(frozen=True)
class ClassTaxonomy:
    """Ordered class list with a thing/stuff split and a reserved void id."""

    classes: tuple[ClassDef, ...]
    void_id: int = 255

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        ids = [c.class_id for c in self.classes]
        if len(set(ids)) != len(ids):
            raise ValueError("class ids must be unique")
        if not self.classes:
            raise ValueError("taxonomy needs at least one class")
        if self.void_id in set(ids):
            raise ValueError(f"void id {self.void_id} collides with a class id")
        if not 0 <= self.void_id <= MAX_CLASS_ID:
            raise ValueError(f"void id {self.void_id} outside [0, {MAX_CLASS_ID}]")

    @cached_property
    def by_id(self) -> Mapping[int, ClassDef]:
        return {c.class_id: c for c in self.classes}

    @cached_property
    def thing_ids(self) -> frozenset[int]:
        return frozenset(c.class_id for c in self.classes if c.kind == THING)

    @cached_property
    def stuff_ids(self) -> frozenset[int]:
        return frozenset(c.class_id for c in self.classes if c.kind == STUFF)

    def is_thing(self, class_id: int) -> bool:
        return class_id in self.thing_ids

    def is_stuff(self, class_id: int) -> bool:
        return class_id in self.stuff_ids

    def __contains__(self, class_id: int) -> bool:
        return class_id in self.by_id

    @property
    def void_packed(self) -> int:
        return self.void_id * INSTANCE_OFFSET


class PanopticLabelMap:
    """Dense per-pixel (class, instance) grid, packed one int32 per pixel."""

    __slots__ = ("_packed",)

    def __init__(self, packed: np.ndarray):
        arr = np.asarray(packed)
        if arr.ndim != 2 or arr.size == 0:
            raise LabelFormatError("label map must be a non-empty 2-D grid")
        if not np.issubdtype(arr.dtype, np.integer):
            raise LabelFormatError("label map must hold integers")
        if arr.min() < 0 or arr.max() > np.iinfo(np.int32).max:
            raise LabelFormatError("packed pixel values outside int32 range")
        arr = np.ascontiguousarray(arr, dtype=np.int32)
        arr.setflags(write=False)
        self._packed = arr

    @classmethod
    def from_ids(cls, class_ids, instance_ids) -> "PanopticLabelMap":
        c = np.asarray(class_ids, dtype=np.int64)
        z = np.asarray(instance_ids, dtype=np.int64)
        if c.shape != z.shape:
            raise LabelFormatError("class and instance grids differ in shape")
        if c.size and (c.min() < 0 or c.max() > MAX_CLASS_ID):
            raise LabelFormatError(f"class ids must lie in [0, {MAX_CLASS_ID}]")
        if z.size and (z.min() < 0 or z.max() > MAX_INSTANCE_ID):
            raise LabelFormatError(f"instance ids must lie in [0, {MAX_INSTANCE_ID}]")
        return cls(c * INSTANCE_OFFSET + z)

    @classmethod
    def full_void(cls, width: int, height: int, taxonomy: ClassTaxonomy):
        return cls(np.full((height, width), taxonomy.void_packed, dtype=np.int32))

    @property
    def packed(self) -> np.ndarray:
        return self._packed

    @property
    def height(self) -> int:
        return self._packed.shape[0]

    @property
    def width(self) -> int:
        return self._packed.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._packed.shape

    def class_ids(self) -> np.ndarray:
        return self._packed // INSTANCE_OFFSET

    def instance_ids(self) -> np.ndarray:
        return self._packed % INSTANCE_OFFSET

    def segment_id_at(self, x: int, y: int) -> SegmentId:
        return unpack_segment_id(int(self._packed[y, x]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PanopticLabelMap):
            return NotImplemented
        return np.array_equal(self._packed, other._packed)

    def __hash__(self):
        return hash((self.shape, self._packed.tobytes()))

    def __repr__(self):
        return f"PanopticLabelMap({self.width}x{self.height})"


def _first_location(packed: np.ndarray, pid: int) -> tuple[int, int]:
    ys, xs = np.nonzero(packed == pid)
    return int(xs[0]), int(ys[0])


def validate_map_ids(label_map: PanopticLabelMap, taxonomy: ClassTaxonomy) -> np.ndarray:
    """Check every packed id against the taxonomy; return the unique ids.

    Raises LabelFormatError naming the offending id and a pixel location.
    """
    packed = label_map.packed
    ids = np.unique(packed.ravel())
    for pid in ids.tolist():
        cls, inst = pid // INSTANCE_OFFSET, pid % INSTANCE_OFFSET
        if cls == taxonomy.void_id:
            if inst != 0:
                x, y = _first_location(packed, pid)
                raise LabelFormatError(
                    f"void pixels must carry instance id 0, got {inst} at (x={x}, y={y})"
                )
            continue
        if cls not in taxonomy:
            x, y = _first_location(packed, pid)
            raise LabelFormatError(f"unknown class id {cls} at (x={x}, y={y})")
        if taxonomy.is_stuff(cls) and inst != 0:
            x, y = _first_location(packed, pid)
            raise LabelFormatError(
                f"stuff class {cls} must carry instance id 0, got {inst} at (x={x}, y={y})"
            )
    return ids


@dataclass(frozen=True, eq=False)
class Segment:
    """One frame-level segment: its id, pixel count, and pixel set."""

    segment_id: SegmentId
    area: int
    pixels: frozenset[tuple[int, int]]  # (x, y)


def extract_segments(
    label_map: PanopticLabelMap, taxonomy: ClassTaxonomy
) -> list[Segment]:
    """Materialize the segments of a label map, void excluded, sorted by id."""
    packed = label_map.packed
    ids = validate_map_ids(label_map, taxonomy)
    counts = {int(i): int(n) for i, n in zip(*np.unique(packed.ravel(), return_counts=True))}
    segments = []
    for pid in ids.tolist():
        sid = unpack_segment_id(pid)
        if sid.class_id == taxonomy.void_id:
            continue
        ys, xs = np.nonzero(packed == pid)
        pixels = frozenset(zip(xs.tolist(), ys.tolist()))
        segments.append(Segment(sid, counts[pid], pixels))
    segments.sort(key=lambda s: s.segment_id)
    return segments


@dataclass(frozen=True)
class SnippetWindow:
    """A k-span window starting at frame ``start`` with annotation stride λ."""

    start: int
    span: int
    stride: int

    def __post_init__(self):
        if self.start < 0 or self.span < 0:
            raise ValueError("window start and span must be non-negative")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def annotated_indices(self) -> tuple[int, ...]:
        # t, t+λ, ... truncated at the largest index <= t+span
        return tuple(range(self.start, self.start + self.span + 1, self.stride))


@dataclass(frozen=True, eq=False)
class Tube:
    """A (class, instance) track of frame-level segments inside one window."""

    segment_id: SegmentId
    segments: Mapping[int, frozenset[tuple[int, int]]]  # frame index -> pixels

    @property
    def volume(self) -> int:
        return sum(len(p) for p in self.segments.values())

    def cells(self) -> set[tuple[int, int, int]]:
        """All (frame, x, y) pixel-time cells of the tube."""
        out: set[tuple[int, int, int]] = set()
        for f, pixels in self.segments.items():
            out.update((f, x, y) for x, y in pixels)
        return out


def build_tubes(
    frames: Mapping[int, PanopticLabelMap] | Sequence[tuple[int, PanopticLabelMap]],
    window: SnippetWindow,
    taxonomy: ClassTaxonomy,
) -> list[Tube]:
    """Group segments of the window's annotated frames into tubes, sorted by id."""
    frame_map = dict(frames)
    grouped: dict[SegmentId, dict[int, frozenset[tuple[int, int]]]] = {}
    for idx in window.annotated_indices:
        if idx not in frame_map:
            raise IncompleteWindowError(
                f"window at t={window.start} needs annotated frame {idx}"
            )
        for seg in extract_segments(frame_map[idx], taxonomy):
            grouped.setdefault(seg.segment_id, {})[idx] = seg.pixels
    return [Tube(sid, grouped[sid]) for sid in sorted(grouped)]


def tube_iou(a: Tube, b: Tube) -> float:
    """Pixel-time IoU of two tubes; 0 when their class ids differ.

    Frames where one tube is absent contribute only to the union.
    """
    if a.segment_id.class_id != b.segment_id.class_id:
        return 0.0
    inter = 0
    union = 0
    for f in set(a.segments) | set(b.segments):
        pa = a.segments.get(f, frozenset())
        pb = b.segments.get(f, frozenset())
        inter += len(pa & pb)
        union += len(pa | pb)
    if union == 0:
        return 0.0
    return inter / union


@dataclass(frozen=True)
class ClassStats:
    """Per-class match counters: one IoU per TP plus FP/FN counts.

    TP IoUs are kept as a multiset. ``iou_sum`` reduces them with an
    exactly-rounded sum, so merge order never changes the reported double.
    """

    tp_ious: tuple[float, ...] = ()
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if self.fp < 0 or self.fn < 0:
            raise ValueError("counts must be non-negative")
        for v in self.tp_ious:
            if not 0.0 < v <= 1.0:
                raise ValueError(f"TP IoU {v} outside (0, 1]")

    @property
    def tp(self) -> int:
        return len(self.tp_ious)

    @property
    def iou_sum(self) -> float:
        return math.fsum(self.tp_ious)

    def __add__(self, other: "ClassStats") -> "ClassStats":
        return ClassStats(self.tp_ious + other.tp_ious, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class MatchStats:
    """Per-class accumulators that merge associatively across windows/videos."""

    per_class: Mapping[int, ClassStats] = field(default_factory=dict)

    @classmethod
    def empty(cls) -> "MatchStats":
        return cls({})

    def __add__(self, other: "MatchStats") -> "MatchStats":
        merged = dict(self.per_class)
        for c, stats in other.per_class.items():
            merged[c] = merged[c] + stats if c in merged else stats
        return MatchStats(merged)

    @classmethod
    def accumulate(cls, parts: Iterable["MatchStats"]) -> "MatchStats":
        total = cls.empty()
        for p in parts:
            total = total + p
        return total

    @property
    def present_classes(self) -> tuple[int, ...]:
        return tuple(
            sorted(
                c
                for c, s in self.per_class.items()
                if s.tp + s.fp + s.fn > 0
            )
        )

    def get(self, class_id: int) -> ClassStats:
        return self.per_class.get(class_id, ClassStats())


@dataclass(frozen=True)
class VideoLabels:
    """One video's label maps, keyed by frame index; may be sparse in time."""

    video_id: str
    length: int
    labels: Mapping[int, PanopticLabelMap]

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("video length must be >= 1")
        for idx in self.labels:
            if not 0 <= idx < self.length:
                raise ValueError(f"frame index {idx} outside [0, {self.length})")

    def annotated_indices(self, stride: int) -> tuple[int, ...]:
        return tuple(range(0, self.length, stride))
