"""Core types: segment extraction, tube building, tube IoU."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vpseval import (
    MatchStats,
    SegmentId,
    SnippetWindow,
    build_tubes,
    extract_segments,
    tube_iou,
)
from vpseval.core import ClassStats
from vpseval.errors import IncompleteWindowError, LabelFormatError

from vpseval import sim
from conftest import CAR, PERSON, ROAD, SKY, VOID, label_map, paint, uniform_map

TAX = sim.default_taxonomy()


# --- extract_segments ------------------------------------------------------


def test_uniform_stuff_map_single_segment(taxonomy):
    segs = extract_segments(uniform_map(4, 4, ROAD), taxonomy)
    assert len(segs) == 1
    assert segs[0].segment_id == SegmentId(ROAD, 0)
    assert segs[0].area == 16
    assert len(segs[0].pixels) == 16


def test_all_void_map_no_segments(taxonomy):
    assert extract_segments(uniform_map(4, 4, VOID), taxonomy) == []


def test_half_car_half_road(taxonomy):
    m = paint(uniform_map(4, 4, ROAD), (0, 0, 2, 4), CAR, 1)
    segs = extract_segments(m, taxonomy)
    assert [(s.segment_id, s.area) for s in segs] == [
        (SegmentId(CAR, 1), 8),
        (SegmentId(ROAD, 0), 8),
    ]


def test_unknown_class_names_id_and_location(taxonomy):
    m = paint(uniform_map(4, 4, ROAD), (2, 1, 3, 2), 99, 0)
    with pytest.raises(LabelFormatError, match=r"99.*x=2.*y=1"):
        extract_segments(m, taxonomy)


def test_stuff_with_instance_id_rejected(taxonomy):
    m = uniform_map(4, 4, ROAD, instance_id=3)
    with pytest.raises(LabelFormatError, match="instance id 0"):
        extract_segments(m, taxonomy)


def test_one_pixel_segment_is_valid(taxonomy):
    m = paint(uniform_map(3, 3, ROAD), (1, 1, 2, 2), CAR, 1)
    segs = extract_segments(m, taxonomy)
    assert SegmentId(CAR, 1) in [s.segment_id for s in segs]


# --- build_tubes -----------------------------------------------------------


def test_single_occurrence_single_segment_tube(taxonomy):
    frames = {
        0: paint(uniform_map(6, 6, ROAD), (0, 0, 2, 2), CAR, 1),
        5: uniform_map(6, 6, ROAD),
    }
    window = SnippetWindow(start=0, span=5, stride=5)
    tubes = build_tubes(frames, window, taxonomy)
    car = [t for t in tubes if t.segment_id == SegmentId(CAR, 1)]
    assert len(car) == 1
    assert sorted(car[0].segments) == [0]


def test_window_k10_lambda5_uses_three_frames(taxonomy):
    frames = {i: uniform_map(4, 4, ROAD) for i in (0, 5, 10)}
    window = SnippetWindow(start=0, span=10, stride=5)
    assert window.annotated_indices == (0, 5, 10)
    tubes = build_tubes(frames, window, taxonomy)
    assert sorted(tubes[0].segments) == [0, 5, 10]


def test_truncated_annotated_indices_when_span_not_multiple():
    assert SnippetWindow(start=2, span=7, stride=5).annotated_indices == (2, 7)


def test_same_id_two_frames_single_tube(taxonomy):
    m = paint(uniform_map(6, 6, ROAD), (0, 0, 2, 2), CAR, 1)
    tubes = build_tubes({0: m, 5: m}, SnippetWindow(0, 5, 5), taxonomy)
    assert [t.segment_id for t in tubes] == [SegmentId(CAR, 1), SegmentId(ROAD, 0)]
    assert sorted(tubes[0].segments) == [0, 5]


def test_missing_annotated_frame_errors(taxonomy):
    with pytest.raises(IncompleteWindowError, match="frame 5"):
        build_tubes({0: uniform_map(4, 4, ROAD)}, SnippetWindow(0, 5, 5), taxonomy)


def test_tubes_cover_non_void_cells_exactly_once(taxonomy):
    frames = {
        0: paint(paint(uniform_map(8, 8, ROAD), (0, 0, 3, 3), CAR, 1), (5, 5, 8, 8), VOID, 0),
        5: paint(uniform_map(8, 8, ROAD), (2, 2, 5, 5), CAR, 1),
    }
    tubes = build_tubes(frames, SnippetWindow(0, 5, 5), taxonomy)
    cells = [c for t in tubes for c in t.cells()]
    assert len(cells) == len(set(cells))  # disjoint
    non_void = 2 * 64 - 9  # one 3x3 void patch at frame 0
    assert len(cells) == non_void


# --- tube_iou --------------------------------------------------------------


def _tube(sid, cells_by_frame):
    return build_tube_from_cells(sid, cells_by_frame)


def build_tube_from_cells(sid, cells_by_frame):
    from vpseval.core import Tube

    return Tube(sid, {f: frozenset(px) for f, px in cells_by_frame.items()})


def test_identical_tubes_iou_one():
    t = _tube(SegmentId(CAR, 1), {0: {(0, 0), (1, 0)}, 5: {(0, 0)}})
    assert tube_iou(t, t) == 1.0


def test_absent_frame_counts_only_toward_union():
    # Oracle: exhaustive pixel-time cell count.
    gt_cells = {0: {(x, y) for x in range(4) for y in range(2)},
                5: {(x, y) for x in range(4) for y in range(2)}}
    pred_cells = {0: gt_cells[0]}
    gt = _tube(SegmentId(CAR, 1), gt_cells)
    pred = _tube(SegmentId(CAR, 1), pred_cells)
    inter = len({(0, x, y) for x, y in gt_cells[0]} & {(0, x, y) for x, y in pred_cells[0]})
    union = len({(f, x, y) for f, px in gt_cells.items() for x, y in px}
                | {(f, x, y) for f, px in pred_cells.items() for x, y in px})
    assert (inter, union) == (8, 16)
    assert tube_iou(gt, pred) == inter / union == 0.5


def test_disjoint_same_class_zero():
    a = _tube(SegmentId(CAR, 1), {0: {(0, 0)}})
    b = _tube(SegmentId(CAR, 2), {0: {(3, 3)}})
    assert tube_iou(a, b) == 0.0


def test_different_class_zero_even_when_overlapping():
    a = _tube(SegmentId(CAR, 1), {0: {(0, 0)}})
    b = _tube(SegmentId(PERSON, 1), {0: {(0, 0)}})
    assert tube_iou(a, b) == 0.0


# --- properties ------------------------------------------------------------


@st.composite
def small_maps(draw):
    w = draw(st.integers(2, 8))
    h = draw(st.integers(2, 8))
    choices = [(VOID, 0), (ROAD, 0), (SKY, 0), (CAR, 1), (CAR, 2), (PERSON, 1)]
    cells = draw(
        st.lists(st.sampled_from(choices), min_size=w * h, max_size=w * h)
    )
    cls = np.array([c for c, _ in cells]).reshape(h, w)
    inst = np.array([z for _, z in cells]).reshape(h, w)
    return label_map(cls, inst)


@given(small_maps())
@settings(max_examples=100, deadline=None)
def test_partition_property(m):
    segs = extract_segments(m, TAX)
    void_pixels = int(np.count_nonzero(m.class_ids() == VOID))
    assert sum(s.area for s in segs) == m.width * m.height - void_pixels
    ids = [s.segment_id for s in segs]
    assert len(ids) == len(set(ids))


@given(small_maps(), small_maps())
@settings(max_examples=60, deadline=None)
def test_tube_iou_symmetry(m1, m2):
    t1 = build_tubes({0: m1}, SnippetWindow(0, 0, 1), TAX)
    t2 = build_tubes({0: m2}, SnippetWindow(0, 0, 1), TAX)
    for a in t1:
        for b in t2:
            assert tube_iou(a, b) == tube_iou(b, a)


@given(small_maps(), small_maps())
@settings(max_examples=60, deadline=None)
def test_uniqueness_of_matching(gt_map, pred_map):
    # With disjoint segments per side, IoU > 0.5 partners are unique.
    if gt_map.shape != pred_map.shape:
        return
    gt = build_tubes({0: gt_map}, SnippetWindow(0, 0, 1), TAX)
    pred = build_tubes({0: pred_map}, SnippetWindow(0, 0, 1), TAX)
    for a in gt:
        partners = [b for b in pred if tube_iou(a, b) > 0.5]
        assert len(partners) <= 1
    for b in pred:
        partners = [a for a in gt if tube_iou(a, b) > 0.5]
        assert len(partners) <= 1


def test_match_stats_merge_commutative_associative():
    a = MatchStats({CAR: ClassStats((0.75,), 1, 0)})
    b = MatchStats({CAR: ClassStats((0.8, 0.9), 0, 2), ROAD: ClassStats((), 1, 0)})
    c = MatchStats({ROAD: ClassStats((1.0,), 0, 0)})

    def norm(stats):
        return {
            cls: (sorted(s.tp_ious), s.fp, s.fn, s.iou_sum)
            for cls, s in stats.per_class.items()
        }

    assert norm(a + b) == norm(b + a)
    assert norm((a + b) + c) == norm(a + (b + c))
    assert (a + b).get(CAR).iou_sum <= (a + b).get(CAR).tp  # iou_sum <= tp
