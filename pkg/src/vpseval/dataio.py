"""Dataset ingestion and serialization.

File formats (all documented in docs/formats.md, multi-byte values
little-endian):

* panoptic label PNGs in two encodings:
  - ``coco-rgb``: 8-bit RGB, pixel id = R + 256*G + 65536*B, id 0 is void,
    ids resolved through the frame's ``segments_info`` table;
  - ``cityscapes-id``: 16-bit grayscale, things encoded class*1000+instance,
    stuff and void as bare ids below 1000 (instance ids cap at 999);
* a COCO-style manifest JSON with per-video frame lists and annotated flags;
* dense optical flow: float32 magic 202021.25, int32 width/height, then
  row-major (dx, dy) float32 pairs;
* per-video instance prediction JSON with run-length encoded masks;
* semantic class maps as 16-bit grayscale PNGs.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import (
    INSTANCE_OFFSET,
    ClassDef,
    ClassTaxonomy,
    PanopticLabelMap,
    SegmentId,
    VideoLabels,
    pack_segment_id,
)
from .errors import (
    DatasetValidationError,
    EncodingOverflowError,
    LabelFormatError,
    ManifestError,
    TruncatedFileError,
    BadMagicError,
    FormatError,
    UnknownEncodingError,
    UnknownSegmentIdError,
    ValidationIssue,
)
from .fusion import InstancePrediction
from .vpq import VpqConfig, VpqResult, evaluate_videos, needed_indices

COCO_RGB = "coco-rgb"
CITYSCAPES_ID = "cityscapes-id"
ENCODINGS = (COCO_RGB, CITYSCAPES_ID)

FLOW_MAGIC = 202021.25
MANIFEST_VERSION = 1

_CITYSCAPES_DIVISOR = 1000
_CITYSCAPES_MAX = 65535  # 16-bit grayscale payload


def _check_encoding(encoding: str) -> None:
    if encoding not in ENCODINGS:
        raise UnknownEncodingError(
            f"unknown encoding {encoding!r}; expected one of {ENCODINGS}"
        )


# ---------------------------------------------------------------------------
# Taxonomy JSON


def taxonomy_to_dict(taxonomy: ClassTaxonomy) -> dict:
    return {
        "void_id": taxonomy.void_id,
        "categories": [
            {"id": c.class_id, "name": c.name, "kind": c.kind}
            for c in taxonomy.classes
        ],
    }


def taxonomy_from_dict(doc: Mapping) -> ClassTaxonomy:
    try:
        classes = tuple(
            ClassDef(int(c["id"]), str(c.get("name", c["id"])), str(c["kind"]))
            for c in doc["categories"]
        )
        return ClassTaxonomy(classes=classes, void_id=int(doc.get("void_id", 255)))
    except (KeyError, TypeError, ValueError) as err:
        raise ManifestError(f"bad taxonomy block: {err}") from err


def read_taxonomy(path) -> ClassTaxonomy:
    with open(path, "r", encoding="utf-8") as fh:
        return taxonomy_from_dict(json.load(fh))


def write_taxonomy(taxonomy: ClassTaxonomy, path) -> None:
    Path(path).write_text(
        json.dumps(taxonomy_to_dict(taxonomy), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


# ---------------------------------------------------------------------------
# Panoptic label PNGs


def _open_image(path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
        return img
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as err:
        raise TruncatedFileError(path, detail=str(err)) from err


def read_panoptic_png(
    path,
    encoding: str,
    taxonomy: ClassTaxonomy,
    segments_info: Sequence[Mapping] | None = None,
) -> PanopticLabelMap:
    """Decode one label PNG; coco-rgb needs the frame's segment table."""
    _check_encoding(encoding)
    img = _open_image(path)
    if encoding == COCO_RGB:
        if img.mode != "RGB":
            raise FormatError(f"{path}: coco-rgb expects an RGB image, got {img.mode}")
        rgb = np.asarray(img, dtype=np.int64)
        ids = rgb[:, :, 0] + 256 * rgb[:, :, 1] + 65536 * rgb[:, :, 2]
        if segments_info is None:
            raise ManifestError(f"{path}: coco-rgb frame lacks segments_info")
        table = {0: taxonomy.void_packed}
        for seg in segments_info:
            table[int(seg["id"])] = pack_segment_id(
                int(seg["category_id"]), int(seg["instance_id"])
            )
        unique = np.unique(ids)
        for sid in unique.tolist():
            if sid not in table:
                raise UnknownSegmentIdError(
                    f"{path}: pixel id {sid} not in the manifest segment table"
                )
        lut_keys = np.array(sorted(table), dtype=np.int64)
        lut_vals = np.array([table[k] for k in lut_keys.tolist()], dtype=np.int64)
        packed = lut_vals[np.searchsorted(lut_keys, ids)]
        return PanopticLabelMap(packed)

    if img.mode not in ("I", "I;16", "L"):
        raise FormatError(
            f"{path}: cityscapes-id expects a single-channel image, got {img.mode}"
        )
    ids = np.asarray(img, dtype=np.int64)
    mapping: dict[int, int] = {}
    for sid in np.unique(ids).tolist():
        if sid < 0:
            raise LabelFormatError(f"{path}: negative pixel id {sid}")
        if sid >= _CITYSCAPES_DIVISOR:
            cls, inst = sid // _CITYSCAPES_DIVISOR, sid % _CITYSCAPES_DIVISOR
            if not taxonomy.is_thing(cls):
                raise LabelFormatError(
                    f"{path}: id {sid} encodes instance {inst} of class {cls}, "
                    "which is not a thing class"
                )
        elif sid == taxonomy.void_id:
            cls, inst = taxonomy.void_id, 0
        elif sid in taxonomy:
            cls, inst = sid, 0
        else:
            raise LabelFormatError(f"{path}: unknown class id {sid}")
        mapping[sid] = pack_segment_id(cls, inst)
    lut_keys = np.array(sorted(mapping), dtype=np.int64)
    lut_vals = np.array([mapping[k] for k in lut_keys.tolist()], dtype=np.int64)
    return PanopticLabelMap(lut_vals[np.searchsorted(lut_keys, ids)])


def write_panoptic_png(
    label_map: PanopticLabelMap,
    path,
    encoding: str,
    taxonomy: ClassTaxonomy,
) -> list[dict] | None:
    """Encode one label PNG; returns the segments_info table for coco-rgb."""
    _check_encoding(encoding)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    packed = label_map.packed

    if encoding == COCO_RGB:
        unique = np.unique(packed)
        table: list[dict] = []
        mapping = {int(taxonomy.void_packed): 0}
        next_id = 1
        for pid in sorted(int(p) for p in unique):
            if pid == taxonomy.void_packed:
                continue
            mapping[pid] = next_id
            table.append(
                {
                    "id": next_id,
                    "category_id": pid // INSTANCE_OFFSET,
                    "instance_id": pid % INSTANCE_OFFSET,
                }
            )
            next_id += 1
        lut_keys = np.array(sorted(mapping), dtype=np.int64)
        lut_vals = np.array([mapping[k] for k in lut_keys.tolist()], dtype=np.int64)
        ids = lut_vals[np.searchsorted(lut_keys, packed.astype(np.int64))]
        rgb = np.stack(
            [ids % 256, (ids // 256) % 256, ids // 65536], axis=-1
        ).astype(np.uint8)
        Image.fromarray(rgb, mode="RGB").save(path, format="PNG")
        return table

    if taxonomy.void_id >= _CITYSCAPES_DIVISOR:
        raise EncodingOverflowError(
            f"void id {taxonomy.void_id} does not fit below {_CITYSCAPES_DIVISOR}"
        )
    mapping: dict[int, int] = {}
    for pid in np.unique(packed).tolist():
        cls, inst = pid // INSTANCE_OFFSET, pid % INSTANCE_OFFSET
        if cls == taxonomy.void_id:
            sid = taxonomy.void_id
        elif taxonomy.is_thing(cls):
            if inst >= _CITYSCAPES_DIVISOR:
                raise EncodingOverflowError(
                    f"instance id {inst} of class {cls} exceeds the "
                    f"cityscapes-id cap of {_CITYSCAPES_DIVISOR - 1}"
                )
            sid = cls * _CITYSCAPES_DIVISOR + inst
        else:
            if cls >= _CITYSCAPES_DIVISOR:
                raise EncodingOverflowError(
                    f"stuff class id {cls} does not fit below {_CITYSCAPES_DIVISOR}"
                )
            sid = cls
        if sid > _CITYSCAPES_MAX:
            raise EncodingOverflowError(
                f"encoded id {sid} exceeds the 16-bit limit {_CITYSCAPES_MAX}"
            )
        mapping[pid] = sid
    lut_keys = np.array(sorted(mapping), dtype=np.int64)
    lut_vals = np.array([mapping[k] for k in lut_keys.tolist()], dtype=np.int64)
    ids = lut_vals[np.searchsorted(lut_keys, packed.astype(np.int64))]
    Image.fromarray(ids.astype(np.uint16)).save(path, format="PNG")
    return None


# ---------------------------------------------------------------------------
# Optical flow


def read_flow(path) -> np.ndarray:
    """Read a dense flow field; returns float32 (height, width, 2) as (dx, dy)."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise TruncatedFileError(path, expected=12, actual=len(data))
    (magic,) = struct.unpack("<f", data[:4])
    if abs(magic - FLOW_MAGIC) > 1e-3:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {FLOW_MAGIC}")
    width, height = struct.unpack("<ii", data[4:12])
    if width < 1 or height < 1:
        raise FormatError(f"{path}: nonsensical flow dimensions {width}x{height}")
    expected = 12 + 8 * width * height
    if len(data) != expected:
        raise TruncatedFileError(path, expected=expected, actual=len(data))
    arr = np.frombuffer(data, dtype="<f4", offset=12)
    return arr.reshape(height, width, 2).copy()


def write_flow(flow: np.ndarray, path) -> None:
    flow = np.asarray(flow, dtype=np.float32)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise FormatError(f"flow field must have shape (h, w, 2), got {flow.shape}")
    h, w = flow.shape[:2]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<f", FLOW_MAGIC))
        fh.write(struct.pack("<ii", w, h))
        fh.write(flow.astype("<f4").tobytes())


# ---------------------------------------------------------------------------
# Semantic maps and instance predictions


def write_semantic_png(class_ids: np.ndarray, path) -> None:
    arr = np.asarray(class_ids)
    if arr.min() < 0 or arr.max() > _CITYSCAPES_MAX:
        raise EncodingOverflowError("semantic class ids must fit in 16 bits")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr.astype(np.uint16)).save(path, format="PNG")


def read_semantic_png(path) -> np.ndarray:
    img = _open_image(path)
    if img.mode not in ("I", "I;16", "L"):
        raise FormatError(
            f"{path}: semantic map expects a single-channel image, got {img.mode}"
        )
    return np.asarray(img, dtype=np.int64)


def encode_rle(mask: np.ndarray) -> dict:
    """Row-major run-length encoding; counts alternate starting with zeros."""
    mask = np.asarray(mask, dtype=bool)
    flat = mask.ravel()
    changes = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], changes, [flat.size]])
    counts = np.diff(bounds).tolist()
    if flat.size and bool(flat[0]):
        counts = [0] + counts  # runs must start with a zeros count
    return {"size": [int(mask.shape[0]), int(mask.shape[1])], "counts": counts}


def decode_rle(rle: Mapping) -> np.ndarray:
    try:
        h, w = (int(v) for v in rle["size"])
        counts = [int(c) for c in rle["counts"]]
    except (KeyError, TypeError, ValueError) as err:
        raise FormatError(f"bad RLE block: {err}") from err
    if any(c < 0 for c in counts) or sum(counts) != h * w:
        raise FormatError(
            f"RLE counts sum to {sum(counts)}, expected {h * w} for size {h}x{w}"
        )
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    value = False
    for c in counts:
        if value:
            flat[pos : pos + c] = True
        pos += c
        value = not value
    return flat.reshape(h, w)


def write_instance_predictions(
    path, video_id: str, width: int, height: int,
    frames: Sequence[Sequence[InstancePrediction]],
) -> None:
    doc = {
        "video_id": video_id,
        "width": width,
        "height": height,
        "frames": [
            {
                "index": f,
                "instances": [
                    {
                        "box": [float(v) for v in inst.box],
                        "class_probs": {
                            str(c): float(p) for c, p in sorted(inst.class_probs.items())
                        },
                        "mask_rle": encode_rle(inst.mask),
                        "embedding": None
                        if inst.embedding is None
                        else [float(v) for v in inst.embedding],
                    }
                    for inst in dets
                ],
            }
            for f, dets in enumerate(frames)
        ],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def read_instance_predictions(
    path, taxonomy: ClassTaxonomy | None = None
) -> tuple[str, int, int, list[list[InstancePrediction]]]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except (json.JSONDecodeError, UnicodeDecodeError) as err:
            raise FormatError(f"{path}: not valid JSON: {err}") from err
    try:
        video_id = str(doc["video_id"])
        width, height = int(doc["width"]), int(doc["height"])
        raw_frames = doc["frames"]
    except (KeyError, TypeError, ValueError) as err:
        raise FormatError(f"{path}: bad instance document: {err}") from err
    frames: list[list[InstancePrediction]] = []
    for pos, frame in enumerate(raw_frames):
        if int(frame.get("index", -1)) != pos:
            raise FormatError(f"{path}: frame indices must be contiguous from 0")
        dets = []
        for raw in frame.get("instances", []):
            try:
                probs = {int(c): float(p) for c, p in raw["class_probs"].items()}
                mask = decode_rle(raw["mask_rle"])
                if mask.shape != (height, width):
                    raise FormatError(
                        f"{path}: mask size {mask.shape} does not match "
                        f"frame {height}x{width}"
                    )
                emb = raw.get("embedding")
                dets.append(
                    InstancePrediction(
                        box=tuple(float(v) for v in raw["box"]),
                        class_probs=probs,
                        mask=mask,
                        embedding=None if emb is None else np.asarray(emb, dtype=np.float64),
                    )
                )
            except (KeyError, TypeError, ValueError) as err:
                raise FormatError(f"{path}: bad instance record: {err}") from err
        if taxonomy is not None:
            for det in dets:
                for c in det.class_probs:
                    if not taxonomy.is_thing(c):
                        raise LabelFormatError(
                            f"{path}: instance class {c} is not a thing class"
                        )
        frames.append(dets)
    return video_id, width, height, frames


# ---------------------------------------------------------------------------
# Dataset manifests


@dataclass(frozen=True)
class FrameEntry:
    index: int
    file: str | None
    annotated: bool
    segments_info: tuple | None = None


@dataclass(frozen=True)
class VideoEntry:
    video_id: str
    frames: tuple[FrameEntry, ...]

    @property
    def length(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class DatasetManifest:
    taxonomy: ClassTaxonomy
    annotation_stride: int
    encoding: str
    videos: tuple[VideoEntry, ...]
    base_dir: Path | None = None

    def video_ids(self) -> list[str]:
        return [v.video_id for v in self.videos]

    def by_id(self) -> dict[str, VideoEntry]:
        return {v.video_id: v for v in self.videos}


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    doc = {
        "format_version": MANIFEST_VERSION,
        "encoding": manifest.encoding,
        "annotation_stride": manifest.annotation_stride,
        **taxonomy_to_dict(manifest.taxonomy),
        "videos": [
            {
                "id": v.video_id,
                "frames": [
                    {
                        "index": f.index,
                        "file": f.file,
                        "annotated": f.annotated,
                        **(
                            {"segments_info": [dict(items) for items in f.segments_info]}
                            if f.segments_info is not None
                            else {}
                        ),
                    }
                    for f in v.frames
                ],
            }
            for v in manifest.videos
        ],
    }
    return doc


def write_manifest(manifest: DatasetManifest, path) -> None:
    Path(path).write_text(
        json.dumps(manifest_to_dict(manifest), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as err:
        raise ManifestError(f"{path}: cannot parse manifest: {err}") from err

    try:
        version = int(doc["format_version"])
        encoding = str(doc["encoding"])
        stride = int(doc["annotation_stride"])
        raw_videos = doc["videos"]
    except (KeyError, TypeError, ValueError) as err:
        raise ManifestError(f"{path}: missing or bad manifest field: {err}") from err
    if version != MANIFEST_VERSION:
        raise ManifestError(f"{path}: unsupported format_version {version}")
    _check_encoding(encoding)
    if stride < 1:
        raise ManifestError(f"{path}: annotation_stride must be >= 1")
    taxonomy = taxonomy_from_dict(doc)

    videos = []
    for rv in raw_videos:
        vid = str(rv.get("id"))
        frames = []
        for pos, rf in enumerate(rv.get("frames", [])):
            idx = int(rf.get("index", -1))
            if idx != pos:
                raise ManifestError(
                    f"{path}: video {vid!r} frame indices must be contiguous from 0"
                )
            annotated = bool(rf.get("annotated", False))
            file = rf.get("file")
            if annotated and file is None:
                raise ManifestError(
                    f"{path}: video {vid!r} frame {idx} is annotated but has no file"
                )
            seg = rf.get("segments_info")
            frames.append(
                FrameEntry(
                    index=idx,
                    file=file,
                    annotated=annotated,
                    segments_info=None if seg is None else tuple(
                        tuple(sorted(s.items())) for s in seg
                    ),
                )
            )
        if not frames:
            raise ManifestError(f"{path}: video {vid!r} has no frames")
        if not frames[0].annotated:
            raise ManifestError(f"{path}: video {vid!r} frame 0 must be annotated")
        for f in frames:
            if f.index % stride == 0 and not f.annotated:
                raise ManifestError(
                    f"{path}: video {vid!r} frame {f.index} should be annotated "
                    f"under stride {stride}"
                )
        videos.append(VideoEntry(vid, tuple(frames)))
    return DatasetManifest(
        taxonomy=taxonomy,
        annotation_stride=stride,
        encoding=encoding,
        videos=tuple(videos),
        base_dir=path.parent,
    )


def _segments_info_dicts(entry: FrameEntry) -> list[dict] | None:
    if entry.segments_info is None:
        return None
    return [dict(items) for items in entry.segments_info]


def load_video_labels(
    manifest: DatasetManifest,
    entry: VideoEntry,
    indices: Iterable[int] | None = None,
) -> VideoLabels:
    """Read a video's label maps; restricted to ``indices`` when given."""
    wanted = None if indices is None else set(indices)
    labels = {}
    for frame in entry.frames:
        if frame.file is None:
            continue
        if wanted is not None and frame.index not in wanted:
            continue
        full = (manifest.base_dir or Path(".")) / frame.file
        labels[frame.index] = read_panoptic_png(
            full,
            manifest.encoding,
            manifest.taxonomy,
            segments_info=_segments_info_dicts(frame),
        )
    return VideoLabels(entry.video_id, entry.length, labels)


def write_video_dataset(
    videos: Sequence[VideoLabels],
    taxonomy: ClassTaxonomy,
    stride: int,
    out_dir,
    encoding: str = COCO_RGB,
    manifest_name: str = "manifest.json",
) -> Path:
    """Write label PNGs plus a manifest; returns the manifest path.

    Every frame index that carries labels gets a file and the annotated flag;
    indices without labels appear in the manifest with file null.
    """
    _check_encoding(encoding)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for video in videos:
        frames = []
        for idx in range(video.length):
            if idx in video.labels:
                rel = f"{video.video_id}/{idx:06d}.png"
                seg = write_panoptic_png(
                    video.labels[idx], out_dir / rel, encoding, taxonomy
                )
                frames.append(
                    FrameEntry(
                        index=idx,
                        file=rel,
                        annotated=True,
                        segments_info=None
                        if seg is None
                        else tuple(tuple(sorted(s.items())) for s in seg),
                    )
                )
            else:
                frames.append(FrameEntry(index=idx, file=None, annotated=False))
        entries.append(VideoEntry(video.video_id, tuple(frames)))
    manifest = DatasetManifest(
        taxonomy=taxonomy,
        annotation_stride=stride,
        encoding=encoding,
        videos=tuple(entries),
        base_dir=out_dir,
    )
    write_manifest(manifest, out_dir / manifest_name)
    return out_dir / manifest_name


def convert_dataset(src_manifest_path, dst_encoding: str, out_dir) -> Path:
    """Re-encode a dataset losslessly; tube structure is preserved exactly."""
    _check_encoding(dst_encoding)
    manifest = read_manifest(src_manifest_path)
    videos = [
        load_video_labels(manifest, entry) for entry in manifest.videos
    ]
    return write_video_dataset(
        videos,
        manifest.taxonomy,
        manifest.annotation_stride,
        out_dir,
        encoding=dst_encoding,
    )


# ---------------------------------------------------------------------------
# Manifest-level evaluation (validation first, then streaming compute)


def _taxonomies_equal(a: ClassTaxonomy, b: ClassTaxonomy) -> bool:
    return a.void_id == b.void_id and a.classes == b.classes


def validate_manifest_pair(
    gt: DatasetManifest, pred: DatasetManifest, config: VpqConfig
) -> list[ValidationIssue]:
    """Exhaustive integrity check of a gt/pred manifest pair."""
    issues: list[ValidationIssue] = []
    if not _taxonomies_equal(gt.taxonomy, pred.taxonomy):
        issues.append(
            ValidationIssue("taxonomy-mismatch", "gt and pred taxonomies differ")
        )
    pred_by_id = pred.by_id()
    gt_ids = set(gt.video_ids())
    for vid in pred.video_ids():
        if vid not in gt_ids:
            issues.append(
                ValidationIssue(
                    "extra-video", f"prediction has unknown video {vid!r}", video=vid
                )
            )
    for entry in gt.videos:
        if entry.video_id not in pred_by_id:
            issues.append(
                ValidationIssue(
                    "missing-video",
                    f"prediction lacks video {entry.video_id!r}",
                    video=entry.video_id,
                )
            )
            continue
        p_entry = pred_by_id[entry.video_id]
        if entry.length != p_entry.length:
            issues.append(
                ValidationIssue(
                    "length-mismatch",
                    f"video {entry.video_id!r}: gt has {entry.length} frames, "
                    f"pred has {p_entry.length}",
                    video=entry.video_id,
                )
            )
            continue
        for side_name, side_manifest, side_entry in (
            ("gt", gt, entry),
            ("pred", pred, p_entry),
        ):
            for idx in needed_indices(entry.length, config):
                frame = side_entry.frames[idx]
                if frame.file is None:
                    issues.append(
                        ValidationIssue(
                            f"missing-{side_name}-frame",
                            f"video {entry.video_id!r}: {side_name} lacks a label "
                            f"for annotated frame {idx}",
                            video=entry.video_id,
                            frame=idx,
                        )
                    )
                    continue
                full = (side_manifest.base_dir or Path(".")) / frame.file
                if not full.exists():
                    issues.append(
                        ValidationIssue(
                            "missing-file",
                            f"video {entry.video_id!r}: file {frame.file} not found",
                            video=entry.video_id,
                            frame=idx,
                        )
                    )
    return issues


def evaluate_manifests(
    gt_manifest_path,
    pred_manifest_path,
    *,
    windows: Sequence[int] | None = None,
    stride: int | None = None,
    threads: int = 1,
    iou_threshold: float = 0.5,
) -> tuple[VpqResult, dict]:
    """Validate a manifest pair exhaustively, then evaluate it streaming.

    The stride defaults to the gt manifest's annotation stride. Videos load
    lazily one pair at a time, so large datasets do not need to fit in memory.
    """
    gt = read_manifest(gt_manifest_path)
    pred = read_manifest(pred_manifest_path)
    config = VpqConfig(
        window_spans=tuple(windows) if windows is not None else (0, 5, 10, 15),
        annotation_stride=stride if stride is not None else gt.annotation_stride,
        iou_threshold=iou_threshold,
    )
    issues = validate_manifest_pair(gt, pred, config)
    if issues:
        raise DatasetValidationError(issues)

    pred_by_id = pred.by_id()
    frames_evaluated = sum(
        len(needed_indices(v.length, config)) for v in gt.videos
    )

    def pairs():
        for entry in gt.videos:
            wanted = needed_indices(entry.length, config)
            yield (
                load_video_labels(gt, entry, wanted),
                load_video_labels(pred, pred_by_id[entry.video_id], wanted),
            )

    result = evaluate_videos(pairs(), gt.taxonomy, config, threads=threads)
    summary = {
        "videos": len(gt.videos),
        "frames_evaluated": frames_evaluated,
        "issues": [],
    }
    return result, summary
