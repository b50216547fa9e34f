"""Fusion: NMS pruning, score cutoff, score-ordered painting, stuff fill."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vpseval import (
    InstancePrediction,
    SemanticMap,
    assign_initial_ids,
    fuse,
    prune_instances,
    sim,
)
from vpseval.errors import ShapeError
from vpseval.fusion import box_iou

from conftest import CAR, PERSON, ROAD, SKY, VOID

TAX = sim.default_taxonomy()
H, W = 12, 16


def det(box, score, class_id=CAR, mask=None, frame=(H, W)):
    if mask is None:
        mask = np.zeros(frame, dtype=bool)
        x1, y1, x2, y2 = (int(v) for v in box)
        mask[y1:y2, x1:x2] = True
    return InstancePrediction(box=box, class_probs={class_id: score}, mask=mask)


# --- prune_instances -------------------------------------------------------


def test_identical_boxes_keep_higher_score():
    a = det((1, 1, 5, 5), 0.9)
    b = det((1, 1, 5, 5), 0.8)
    survivors = prune_instances([b, a])
    assert [s.score for s in survivors] == [0.9]


def test_score_exactly_cutoff_removed():
    assert prune_instances([det((1, 1, 5, 5), 0.6)]) == []
    assert len(prune_instances([det((1, 1, 5, 5), 0.6000001)])) == 1


def test_disjoint_boxes_sorted_by_score():
    lo = det((1, 1, 4, 4), 0.7)
    hi = det((8, 8, 12, 12), 0.9)
    survivors = prune_instances([lo, hi])
    assert [s.score for s in survivors] == [0.9, 0.7]


def test_nms_is_class_agnostic():
    a = det((1, 1, 5, 5), 0.9, class_id=CAR)
    b = det((1, 1, 5, 5), 0.8, class_id=PERSON)
    assert [s.class_id for s in prune_instances([a, b])] == [CAR]


def test_nms_boundary_iou_not_suppressed():
    # boxes tuned to IoU exactly 0.5: suppression requires strictly greater
    a = det((0, 0, 4, 4), 0.9)
    b = det((0, 0, 4, 8), 0.8)
    assert box_iou(a.box, b.box) == 0.5
    assert len(prune_instances([a, b])) == 2


def test_survivors_pairwise_below_threshold_and_above_cutoff():
    rng = np.random.default_rng(3)
    cands = []
    for _ in range(25):
        x1 = float(rng.integers(0, W - 4))
        y1 = float(rng.integers(0, H - 4))
        w = float(rng.integers(2, 5))
        h = float(rng.integers(2, 5))
        cands.append(det((x1, y1, min(W, x1 + w), min(H, y1 + h)),
                         float(rng.uniform(0.3, 0.99))))
    survivors = prune_instances(cands)
    for s in survivors:
        assert s.score > 0.6
    for i, a in enumerate(survivors):
        for b in survivors[i + 1:]:
            assert box_iou(a.box, b.box) <= 0.5


def test_suppressed_candidate_score_decrease_changes_nothing():
    a = det((1, 1, 5, 5), 0.9)
    b = det((1, 1, 5, 5), 0.8)  # suppressed by a
    c = det((8, 8, 12, 12), 0.7)
    before = prune_instances([a, b, c])
    after = prune_instances([a, det((1, 1, 5, 5), 0.65), c])
    assert [(s.box, s.score) for s in before] == [(s.box, s.score) for s in after]


# --- assign_initial_ids ----------------------------------------------------


def test_ids_follow_score_order():
    lo = det((1, 1, 4, 4), 0.7)
    hi = det((8, 8, 12, 12), 0.9)
    pairs = assign_initial_ids([lo, hi])
    assert [(p.score, i) for p, i in pairs] == [(0.9, 1), (0.7, 2)]


def test_equal_scores_tie_break_by_box():
    a = det((2, 0, 5, 3), 0.8)
    b = det((0, 2, 3, 5), 0.8)
    pairs = assign_initial_ids([a, b])
    assert [p.box[0] for p, _ in pairs] == [0.0, 2.0]
    assert [i for _, i in pairs] == [1, 2]


def test_empty_list():
    assert assign_initial_ids([]) == []


# --- fuse ------------------------------------------------------------------


def semantic_stuff():
    sem = np.full((H, W), SKY)
    sem[H // 2:, :] = ROAD
    return SemanticMap(sem)


def test_zero_instances_stuff_only():
    sem = np.full((H, W), ROAD)
    sem[0:2, :] = CAR  # thing region in the semantic map
    out = fuse([], SemanticMap(sem), TAX)
    assert np.all(out.class_ids()[0:2, :] == VOID)  # uncovered things -> void
    assert np.all(out.class_ids()[2:, :] == ROAD)


def test_full_overlap_lower_dropped():
    hi = det((2, 2, 8, 8), 0.9)
    lo_mask = np.zeros((H, W), dtype=bool)
    lo_mask[2:8, 2:8] = True
    lo = InstancePrediction(box=(2, 2, 8, 8), class_probs={CAR: 0.8}, mask=lo_mask)
    out = fuse([hi, lo], semantic_stuff(), TAX, instance_ids=[1, 2])
    ids = set(np.unique(out.instance_ids()[2:8, 2:8]).tolist())
    assert ids == {1}


def test_instance_over_stuff_painting_matches_pixel_simulation():
    # oracle: direct per-pixel simulation of painting order + stuff fill
    a = det((2, 2, 8, 8), 0.9, class_id=CAR)
    b = det((6, 4, 12, 10), 0.8, class_id=PERSON)
    sem = semantic_stuff()
    out = fuse([a, b], sem, TAX, instance_ids=[1, 2])

    expected_cls = np.empty((H, W), dtype=np.int64)
    expected_inst = np.zeros((H, W), dtype=np.int64)
    for y in range(H):
        for x in range(W):
            if a.mask[y, x]:
                expected_cls[y, x], expected_inst[y, x] = CAR, 1
            elif b.mask[y, x]:
                expected_cls[y, x], expected_inst[y, x] = PERSON, 2
            else:
                c = int(sem.class_ids[y, x])
                expected_cls[y, x] = c if TAX.is_stuff(c) else VOID
    assert np.array_equal(out.class_ids(), expected_cls)
    assert np.array_equal(out.instance_ids(), expected_inst)


def test_partial_overlap_keeps_unclaimed_part():
    a = det((0, 0, 8, 6), 0.9)
    b = det((4, 0, 12, 6), 0.8, class_id=PERSON)  # loses 4/8 columns: exactly half left
    out = fuse([a, b], semantic_stuff(), TAX, instance_ids=[1, 2])
    assert np.any(out.class_ids() == PERSON)  # keep_fraction 0.5 is not strict below
    kept = np.count_nonzero(out.class_ids() == PERSON)
    assert kept == 24  # right half of b's 48-pixel mask


def test_output_is_partition():
    rng = np.random.default_rng(5)
    dets = []
    for _ in range(6):
        x1 = int(rng.integers(0, W - 5))
        y1 = int(rng.integers(0, H - 5))
        dets.append(det((x1, y1, x1 + 5, y1 + 5), float(rng.uniform(0.61, 0.99)),
                        class_id=int(rng.choice([CAR, PERSON]))))
    pruned = prune_instances(dets)
    out = fuse(pruned, semantic_stuff(), TAX)
    from vpseval import extract_segments

    segs = extract_segments(out, TAX)  # validates the partition invariants
    assert sum(s.area for s in segs) <= H * W


def test_determinism_under_input_order():
    rng = np.random.default_rng(11)
    dets = []
    for _ in range(8):
        x1 = int(rng.integers(0, W - 4))
        y1 = int(rng.integers(0, H - 4))
        dets.append(det((x1, y1, x1 + 4, y1 + 4), float(rng.uniform(0.3, 0.99))))
    a = fuse(prune_instances(dets), semantic_stuff(), TAX)
    b = fuse(prune_instances(list(reversed(dets))), semantic_stuff(), TAX)
    assert a == b


def test_dimension_mismatch_errors():
    small = np.zeros((4, 4), dtype=bool)
    small[1:3, 1:3] = True
    inst = InstancePrediction(box=(1, 1, 3, 3), class_probs={CAR: 0.9}, mask=small)
    with pytest.raises(ShapeError):
        fuse([inst], semantic_stuff(), TAX)


def test_score_is_max_probability_and_argmax_class():
    mask = np.zeros((H, W), dtype=bool)
    mask[0:3, 0:3] = True
    inst = InstancePrediction(
        box=(0, 0, 3, 3), class_probs={CAR: 0.3, PERSON: 0.55}, mask=mask
    )
    assert inst.score == 0.55
    assert inst.class_id == PERSON


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_monotone_none_survivor_decrease(seed):
    # decreasing the score of a non-surviving candidate never changes output
    rng = np.random.default_rng(seed)
    dets = []
    for _ in range(6):
        x1 = int(rng.integers(0, W - 4))
        y1 = int(rng.integers(0, H - 4))
        dets.append(det((x1, y1, x1 + 4, y1 + 4), float(rng.uniform(0.4, 0.99))))
    survivors = prune_instances(dets)
    surviving_keys = {(s.box, s.score) for s in survivors}
    losers = [d for d in dets if (d.box, d.score) not in surviving_keys]
    if not losers:
        return
    target = losers[0]
    lowered = [
        det(d.box, d.score * 0.5) if d is target else d for d in dets
    ]
    after = prune_instances(lowered)
    assert [(s.box, s.score) for s in after] == [(s.box, s.score) for s in survivors]
