"""Command-line surface: evaluate, convert, fuse, track, simulate.

All dataset integrity errors are reported exhaustively before any metric
work. Exit codes: 0 success, 1 internal error, 2 input error. Subcommands are
deterministic given inputs, flags, and seeds; the JSON reports are canonical
(sorted keys) and independent of the thread count.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .errors import (
    DatasetValidationError,
    MissingInputError,
    SceneSpecError,
    ShapeError,
    VpsError,
)
from . import dataio, fusion, sim, track as tracking
from .core import VideoLabels
from .report import (
    build_command_report,
    build_error_report,
    build_evaluate_report,
    canonical_json,
    render_issues,
    render_table,
)
from .vpq import VpqConfig

THREADS_ENV = "VPSEVAL_THREADS"


def _parse_windows(text: str) -> tuple[int, ...]:
    try:
        spans = tuple(int(v) for v in text.split(",") if v.strip() != "")
    except ValueError:
        raise click.BadParameter(f"--windows expects comma-separated ints, got {text!r}")
    if not spans:
        raise click.BadParameter("--windows must name at least one span")
    return spans


def _parse_threads(value: str | None) -> int:
    if value is None:
        value = os.environ.get(THREADS_ENV, "1")
    if value == "auto":
        return os.cpu_count() or 1
    try:
        threads = int(value)
    except ValueError:
        raise click.BadParameter(f"--threads expects an int or 'auto', got {value!r}")
    if threads < 1:
        raise click.BadParameter("--threads must be >= 1")
    return threads


def _emit_error(err: Exception, as_json: bool) -> None:
    if as_json:
        click.echo(canonical_json(build_error_report(err, __version__)), nl=False)
    elif isinstance(err, DatasetValidationError):
        click.echo(render_issues(err), nl=False, err=True)
    else:
        name = err.error_name if isinstance(err, VpsError) else type(err).__name__
        click.echo(f"error [{name}]: {err}", err=True)


@click.group()
@click.version_option(__version__, prog_name="vpseval")
def main():
    """Video panoptic segmentation evaluation and dataset toolkit."""


@main.command()
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--lambda", "lambda_", type=int, default=None,
              help="Annotation stride; defaults to the gt manifest's value.")
@click.option("--windows", default="0,5,10,15", show_default=True,
              help="Comma-separated window spans k.")
@click.option("--format", "fmt", type=click.Choice(["json", "table"]),
              default="table", show_default=True)
@click.option("--threads", default=None,
              help=f"Worker threads (int or 'auto'); env {THREADS_ENV}.")
def evaluate(gt_path, pred_path, lambda_, windows, fmt, threads):
    """Evaluate a prediction manifest against a ground-truth manifest."""
    spans = _parse_windows(windows)
    n_threads = _parse_threads(threads)
    try:
        VpqConfig(window_spans=spans, annotation_stride=lambda_ or 1)
    except ValueError as err:
        raise click.BadParameter(str(err))
    try:
        result, summary = dataio.evaluate_manifests(
            gt_path,
            pred_path,
            windows=spans,
            stride=lambda_,
            threads=n_threads,
        )
        gt_manifest = dataio.read_manifest(gt_path)
        config = VpqConfig(
            window_spans=spans,
            annotation_stride=lambda_ if lambda_ is not None
            else gt_manifest.annotation_stride,
        )
        report = build_evaluate_report(
            result,
            summary,
            config,
            gt_manifest.taxonomy,
            gt_label=str(gt_path),
            pred_label=str(pred_path),
            version=__version__,
        )
        if fmt == "json":
            click.echo(canonical_json(report), nl=False)
        else:
            click.echo(render_table(report), nl=False)
    except VpsError as err:
        _emit_error(err, as_json=fmt == "json")
        sys.exit(2)


@main.command()
@click.option("--src", "src_path", required=True, type=click.Path(exists=True))
@click.option("--encoding", required=True,
              type=click.Choice(list(dataio.ENCODINGS)))
@click.option("--out", "out_dir", required=True, type=click.Path())
def convert(src_path, encoding, out_dir):
    """Re-encode a dataset between the two label encodings, losslessly."""
    try:
        manifest_path = dataio.convert_dataset(src_path, encoding, out_dir)
        manifest = dataio.read_manifest(manifest_path)
        report = build_command_report(
            "convert",
            {
                "src": str(src_path),
                "encoding": encoding,
                "manifest": manifest_path.name,
                "videos": len(manifest.videos),
                "frames": sum(
                    1 for v in manifest.videos for f in v.frames if f.file
                ),
            },
            __version__,
        )
        click.echo(canonical_json(report), nl=False)
    except VpsError as err:
        _emit_error(err, as_json=True)
        sys.exit(2)


def _load_semantic(semantic_dir: Path, video_id: str, index: int) -> np.ndarray:
    path = semantic_dir / video_id / f"{index:06d}.png"
    if not path.exists():
        raise MissingInputError(f"semantic map {path} not found")
    return dataio.read_semantic_png(path)


def _instance_files(instances_path: Path) -> list[Path]:
    if instances_path.is_dir():
        files = sorted(instances_path.glob("*.json"))
        if not files:
            raise MissingInputError(f"no instance JSON files under {instances_path}")
        return files
    return [instances_path]


def _fuse_video(video_id, width, height, frames, ids_per_frame, semantic_dir, taxonomy):
    labels = {}
    for f, (dets, ids) in enumerate(zip(frames, ids_per_frame)):
        sem = fusion.SemanticMap(_load_semantic(semantic_dir, video_id, f))
        if sem.shape != (height, width):
            raise ShapeError(
                f"semantic map for {video_id} frame {f} is {sem.shape}, "
                f"expected {(height, width)}"
            )
        labels[f] = fusion.fuse(dets, sem, taxonomy, instance_ids=ids)
    return VideoLabels(video_id, len(frames), labels)


@main.command()
@click.option("--instances", "instances_path", required=True,
              type=click.Path(exists=True),
              help="Instance prediction JSON file, or a directory of them.")
@click.option("--semantic-dir", required=True, type=click.Path(exists=True))
@click.option("--taxonomy", "taxonomy_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--lambda", "lambda_", type=int, default=1, show_default=True)
@click.option("--encoding", default=dataio.COCO_RGB, show_default=True,
              type=click.Choice(list(dataio.ENCODINGS)))
def fuse(instances_path, semantic_dir, taxonomy_path, out_dir, lambda_, encoding):
    """Fuse per-frame instance predictions with semantic maps (no tracking)."""
    try:
        taxonomy = dataio.read_taxonomy(taxonomy_path)
        videos = []
        for path in _instance_files(Path(instances_path)):
            video_id, width, height, frames = dataio.read_instance_predictions(
                path, taxonomy
            )
            pruned = [fusion.prune_instances(dets) for dets in frames]
            ids = [[i + 1 for i in range(len(dets))] for dets in pruned]
            videos.append(
                _fuse_video(
                    video_id, width, height, pruned, ids,
                    Path(semantic_dir), taxonomy,
                )
            )
        manifest_path = dataio.write_video_dataset(
            videos, taxonomy, lambda_, out_dir, encoding=encoding
        )
        report = build_command_report(
            "fuse",
            {
                "manifest": manifest_path.name,
                "videos": len(videos),
                "frames": sum(len(v.labels) for v in videos),
            },
            __version__,
        )
        click.echo(canonical_json(report), nl=False)
    except VpsError as err:
        _emit_error(err, as_json=True)
        sys.exit(2)


def _parse_weights(text: str) -> tracking.CueWeights:
    parts = text.split(",")
    if len(parts) != 4:
        raise click.BadParameter(
            "--weights expects 'affinity,iou,cls,conf' (four floats)"
        )
    try:
        a, i, c, f = (float(p) for p in parts)
    except ValueError:
        raise click.BadParameter(f"--weights expects floats, got {text!r}")
    return tracking.CueWeights(affinity=a, iou=i, cls=c, conf=f)


def _load_flows(flow_dir: Path, video_id: str, n_frames: int):
    flows: list[np.ndarray | None] = [None]
    for f in range(1, n_frames):
        path = flow_dir / video_id / f"{f:06d}.flo"
        if not path.exists():
            raise MissingInputError(f"flow file {path} not found")
        flows.append(dataio.read_flow(path))
    return flows


def _load_affinities(affinity_dir: Path, video_id: str, n_frames: int):
    import json as _json

    from .errors import FormatError

    matrices: list[np.ndarray | None] = [None]
    for f in range(1, n_frames):
        path = affinity_dir / video_id / f"{f:06d}.json"
        if not path.exists():
            raise MissingInputError(f"affinity file {path} not found")
        try:
            doc = _json.loads(path.read_text(encoding="utf-8"))
            matrices.append(np.asarray(doc["matrix"], dtype=np.float64))
        except (KeyError, TypeError, ValueError) as err:
            raise FormatError(f"{path}: bad affinity file: {err}") from err
    return matrices


@main.command("track")
@click.option("--instances", "instances_path", required=True,
              type=click.Path(exists=True))
@click.option("--semantic-dir", required=True, type=click.Path(exists=True))
@click.option("--taxonomy", "taxonomy_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--method", required=True,
              type=click.Choice(list(tracking.METHODS)))
@click.option("--flow-dir", type=click.Path(exists=True), default=None)
@click.option("--affinity-dir", type=click.Path(exists=True), default=None)
@click.option("--weights", default="1,1,1,1", show_default=True)
@click.option("--retire-gap", type=int, default=None,
              help="Frames a track may go unseen; defaults to --lambda.")
@click.option("--assignment", default=tracking.GREEDY, show_default=True,
              type=click.Choice([tracking.GREEDY, tracking.OPTIMAL]))
@click.option("--lambda", "lambda_", type=int, default=1, show_default=True)
@click.option("--encoding", default=dataio.COCO_RGB, show_default=True,
              type=click.Choice(list(dataio.ENCODINGS)))
def track_cmd(instances_path, semantic_dir, taxonomy_path, out_dir, method,
              flow_dir, affinity_dir, weights, retire_gap, assignment,
              lambda_, encoding):
    """Assign temporally consistent ids, then fuse into panoptic maps."""
    try:
        taxonomy = dataio.read_taxonomy(taxonomy_path)
        cue_weights = _parse_weights(weights)
        gap = retire_gap if retire_gap is not None else lambda_
        videos = []
        for path in _instance_files(Path(instances_path)):
            video_id, width, height, frames = dataio.read_instance_predictions(
                path, taxonomy
            )
            pruned = [fusion.prune_instances(dets) for dets in frames]
            flows = (
                _load_flows(Path(flow_dir), video_id, len(pruned))
                if flow_dir
                else None
            )
            affinities = (
                _load_affinities(Path(affinity_dir), video_id, len(pruned))
                if affinity_dir
                else None
            )
            ids = tracking.track_video(
                pruned,
                method,
                retire_gap=gap,
                flows=flows,
                affinities=affinities,
                weights=cue_weights,
                assignment=assignment,
            )
            videos.append(
                _fuse_video(
                    video_id, width, height, pruned, ids,
                    Path(semantic_dir), taxonomy,
                )
            )
        manifest_path = dataio.write_video_dataset(
            videos, taxonomy, lambda_, out_dir, encoding=encoding
        )
        report = build_command_report(
            "track",
            {
                "method": method,
                "manifest": manifest_path.name,
                "videos": len(videos),
                "frames": sum(len(v.labels) for v in videos),
            },
            __version__,
        )
        click.echo(canonical_json(report), nl=False)
    except VpsError as err:
        _emit_error(err, as_json=True)
        sys.exit(2)


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None,
              help="Overrides the per-scene seed (detection score jitter).")
@click.option("--perturb", "perturb_path", type=click.Path(exists=True),
              default=None, help="JSON list of perturbations; writes pred/.")
@click.option("--emit-detections", is_flag=True, default=False,
              help="Write derived instance JSON and semantic maps.")
@click.option("--encoding", default=dataio.COCO_RGB, show_default=True,
              type=click.Choice(list(dataio.ENCODINGS)))
def simulate(spec_path, out_dir, seed, perturb_path, emit_detections, encoding):
    """Generate a synthetic dataset from a scene document."""
    import json as _json

    try:
        taxonomy, scenes = sim.load_scene_document(spec_path)
        if len({s.stride for s in scenes}) != 1:
            raise SceneSpecError("all scenes in one document must share a stride")
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        dataio.write_taxonomy(taxonomy, out / "taxonomy.json")

        gt_videos = []
        gt_sparse = []
        for scene in scenes:
            video = sim.generate(scene, taxonomy)
            gt_videos.append((scene, video))
            annotated = set(video.annotated_indices(scene.stride))
            gt_sparse.append(
                VideoLabels(
                    video.video_id,
                    video.length,
                    {f: m for f, m in video.labels.items() if f in annotated},
                )
            )
        stride = scenes[0].stride
        gt_manifest = dataio.write_video_dataset(
            gt_sparse, taxonomy, stride, out / "gt", encoding=encoding
        )

        payload = {
            "gt_manifest": str(Path("gt") / gt_manifest.name),
            "videos": [v.video_id for _, v in gt_videos],
        }

        if perturb_path is not None:
            from .errors import PerturbationError

            try:
                raw = _json.loads(Path(perturb_path).read_text(encoding="utf-8"))
            except (ValueError, UnicodeDecodeError) as err:
                raise PerturbationError(f"{perturb_path}: not valid JSON: {err}")
            perturbations = sim.perturbations_from_json(raw)
            pred_sparse = [
                sim.perturb(v, perturbations, taxonomy) for v in gt_sparse
            ]
            pred_manifest = dataio.write_video_dataset(
                pred_sparse, taxonomy, stride, out / "pred", encoding=encoding
            )
            payload["pred_manifest"] = str(Path("pred") / pred_manifest.name)

        if emit_detections:
            for scene, video in gt_videos:
                jitter_seed = seed if seed is not None else scene.seed
                dets = sim.detections_from_labels(video, taxonomy, seed=jitter_seed)
                frames = [dets[f] for f in sorted(dets)]
                dataio.write_instance_predictions(
                    out / "detections" / f"{video.video_id}.json",
                    video.video_id,
                    scene.width,
                    scene.height,
                    frames,
                )
                for f, sem in sim.semantic_from_labels(video).items():
                    dataio.write_semantic_png(
                        sem, out / "semantic" / video.video_id / f"{f:06d}.png"
                    )
            payload["detections_dir"] = "detections"
            payload["semantic_dir"] = "semantic"

        click.echo(
            canonical_json(build_command_report("simulate", payload, __version__)),
            nl=False,
        )
    except VpsError as err:
        _emit_error(err, as_json=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
