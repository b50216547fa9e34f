"""Shared fixtures: taxonomies, map builders, deterministic fixture datasets."""

from __future__ import annotations

import numpy as np
import pytest

from vpseval import ClassTaxonomy, PanopticLabelMap, VideoLabels
from vpseval import sim
from vpseval.vpq import VpqConfig


@pytest.fixture(scope="session")
def taxonomy() -> ClassTaxonomy:
    return sim.default_taxonomy()


CAR, PERSON, ROAD, SKY, VOID = 1, 2, 10, 11, 255


def label_map(class_grid, inst_grid=None) -> PanopticLabelMap:
    cls = np.asarray(class_grid)
    inst = np.zeros_like(cls) if inst_grid is None else np.asarray(inst_grid)
    return PanopticLabelMap.from_ids(cls, inst)


def uniform_map(width, height, class_id, instance_id=0) -> PanopticLabelMap:
    return label_map(
        np.full((height, width), class_id), np.full((height, width), instance_id)
    )


def paint(base: PanopticLabelMap, box, class_id, instance_id) -> PanopticLabelMap:
    """Overwrite a rectangle (x1, y1, x2, y2) with one segment id."""
    arr = np.array(base.packed)
    x1, y1, x2, y2 = box
    arr[y1:y2, x1:x2] = class_id * (1 << 16) + instance_id
    return PanopticLabelMap(arr)


def video_from_maps(video_id, maps: dict[int, PanopticLabelMap], length=None):
    return VideoLabels(video_id, length or (max(maps) + 1), maps)


def random_dataset(seed: int):
    """One seeded dataset: taxonomy, gt/pred videos, and a matching config."""
    rng = np.random.default_rng(seed)
    tax = sim.random_taxonomy(rng)
    stride = int(rng.integers(1, 4))
    n_videos = int(rng.integers(1, 3))
    gt, pred = [], []
    for i in range(n_videos):
        spec = sim.random_scene_spec(rng, tax, stride=stride, video_id=f"v{i}")
        video = sim.generate(spec, tax)
        perturbations = sim.random_perturbations(rng, video, tax)
        gt.append(video)
        pred.append(sim.perturb(video, perturbations, tax))
    max_span = max(v.length for v in gt) - 1
    n_spans = int(rng.integers(1, 4))
    spans = sorted(
        int(s) for s in rng.choice(np.arange(0, max(1, max_span) + 1),
                                   size=min(n_spans, max_span + 1), replace=False)
    )
    config = VpqConfig(window_spans=tuple(spans) or (0,), annotation_stride=stride)
    return tax, gt, pred, config


def fixture_datasets():
    """Three deterministic datasets used by invariance and parity checks."""
    tax = sim.default_taxonomy()
    out = []

    # static: one square over two bands, identity prediction
    static = sim.generate(
        sim.SceneSpec(
            width=20, height=16, length=10, stride=5, background=(SKY, ROAD),
            objects=(sim.ObjectSpec(CAR, (2, 2, 8, 8)),), video_id="static0",
        ),
        tax,
    )
    out.append(
        ("static", tax, [static], [static],
         VpqConfig(window_spans=(0, 5), annotation_stride=5))
    )

    # crossing: two videos, moving objects, assorted perturbations
    spec_a = sim.SceneSpec(
        width=24, height=18, length=11, stride=5, background=(SKY, ROAD),
        objects=(
            sim.ObjectSpec(CAR, (1, 2, 7, 8), (1.0, 0.0)),
            sim.ObjectSpec(CAR, (16, 2, 22, 8), (-1.0, 0.0)),
            sim.ObjectSpec(PERSON, (4, 10, 8, 16), (0.5, 0.0), shape="ellipse"),
        ),
        video_id="cross0",
    )
    spec_b = sim.SceneSpec(
        width=18, height=14, length=11, stride=5, background=(ROAD,),
        objects=(
            sim.ObjectSpec(CAR, (2, 2, 8, 7), (0.5, 0.5)),
            sim.ObjectSpec(PERSON, (10, 6, 15, 12)),
        ),
        video_id="cross1",
    )
    gt_a = sim.generate(spec_a, tax)
    gt_b = sim.generate(spec_b, tax)
    pred_a = sim.perturb(
        gt_a,
        [
            sim.IdSwap(10, CAR, 1, 2),
            sim.BoundaryErode(sim.SegmentId(PERSON, 1), 1),
        ],
        tax,
    )
    pred_b = sim.perturb(
        gt_b,
        [
            sim.DropSegment(5, sim.SegmentId(PERSON, 1)),
            sim.SpawnFp(0, CAR, (12, 1, 16, 5)),
        ],
        tax,
    )
    out.append(
        ("crossing", tax, [gt_a, gt_b], [pred_a, pred_b],
         VpqConfig(window_spans=(0, 5, 10), annotation_stride=5))
    )

    # voidish: a void band shields false positives
    spec_v = sim.SceneSpec(
        width=16, height=12, length=6, stride=5, background=(VOID, ROAD),
        objects=(sim.ObjectSpec(CAR, (2, 5, 8, 10), (1.0, 0.0)),),
        video_id="voidish0",
    )
    gt_v = sim.generate(spec_v, tax)
    pred_v = sim.perturb(
        gt_v,
        [sim.SpawnFp(0, PERSON, (9, 0, 14, 4)), sim.SpawnFp(5, CAR, (9, 7, 14, 11))],
        tax,
    )
    out.append(
        ("voidish", tax, [gt_v], [pred_v],
         VpqConfig(window_spans=(0, 5), annotation_stride=5))
    )
    return out
