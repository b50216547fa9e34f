"""File formats: label PNGs, manifests, flow fields, RLE, conversion."""

import json

import numpy as np
import pytest

from vpseval import SegmentId, evaluate_videos, sim
from vpseval import dataio
from vpseval.errors import (
    BadMagicError,
    EncodingOverflowError,
    FormatError,
    LabelFormatError,
    ManifestError,
    TruncatedFileError,
    UnknownEncodingError,
    UnknownSegmentIdError,
    DatasetValidationError,
)
from vpseval.vpq import VpqConfig

from conftest import CAR, PERSON, ROAD, SKY, VOID, label_map, uniform_map

TAX = sim.default_taxonomy()


def random_label_map(rng, max_side=12):
    w = int(rng.integers(2, max_side))
    h = int(rng.integers(2, max_side))
    choices = [
        (VOID, 0), (ROAD, 0), (SKY, 0),
        (CAR, 1), (CAR, 2), (CAR, 3), (PERSON, 1), (PERSON, 2),
    ]
    idx = rng.integers(0, len(choices), size=(h, w))
    cls = np.array([[choices[i][0] for i in row] for row in idx])
    inst = np.array([[choices[i][1] for i in row] for row in idx])
    return label_map(cls, inst)


# --- png encodings ---------------------------------------------------------


def test_coco_rgb_pixel_encoding(tmp_path):
    m = uniform_map(3, 2, ROAD)
    info = dataio.write_panoptic_png(m, tmp_path / "m.png", "coco-rgb", TAX)
    assert info == [{"id": 1, "category_id": ROAD, "instance_id": 0}]
    from PIL import Image

    rgb = np.asarray(Image.open(tmp_path / "m.png"))
    assert tuple(rgb[0, 0]) == (1, 0, 0)  # id 1 -> R=1, G=0, B=0


def test_cityscapes_id_thing_encoding(tmp_path):
    m = uniform_map(2, 2, 26 % 64, instance_id=0)  # placeholder, real check below
    arr = np.full((2, 2), 26001, dtype=np.uint16)
    from PIL import Image

    Image.fromarray(arr).save(tmp_path / "t.png")
    tax = sim.ClassTaxonomy(
        classes=(
            sim.ClassDef(26, "car", "thing"),
            sim.ClassDef(7, "road", "stuff"),
        ),
        void_id=255,
    )
    decoded = dataio.read_panoptic_png(tmp_path / "t.png", "cityscapes-id", tax)
    assert decoded.segment_id_at(0, 0) == SegmentId(26, 1)


def test_cityscapes_id_stuff_encoding(tmp_path):
    arr = np.full((2, 2), 7, dtype=np.uint16)
    from PIL import Image

    Image.fromarray(arr).save(tmp_path / "s.png")
    tax = sim.ClassTaxonomy(
        classes=(sim.ClassDef(26, "car", "thing"), sim.ClassDef(7, "road", "stuff")),
        void_id=255,
    )
    decoded = dataio.read_panoptic_png(tmp_path / "s.png", "cityscapes-id", tax)
    assert decoded.segment_id_at(1, 1) == SegmentId(7, 0)


@pytest.mark.parametrize("encoding", dataio.ENCODINGS)
def test_round_trip_random_maps(tmp_path, encoding):
    rng = np.random.default_rng(99)
    for i in range(25):
        m = random_label_map(rng)
        p = tmp_path / f"{encoding}-{i}.png"
        info = dataio.write_panoptic_png(m, p, encoding, TAX)
        back = dataio.read_panoptic_png(p, encoding, TAX, segments_info=info)
        assert back == m


def test_round_trip_all_void(tmp_path):
    m = uniform_map(5, 4, VOID)
    for encoding in dataio.ENCODINGS:
        p = tmp_path / f"void-{encoding}.png"
        info = dataio.write_panoptic_png(m, p, encoding, TAX)
        assert dataio.read_panoptic_png(p, encoding, TAX, segments_info=info) == m


def test_cityscapes_overflow_at_1000_instances(tmp_path):
    m = uniform_map(2, 2, CAR, instance_id=2000)
    with pytest.raises(EncodingOverflowError, match="instance id 2000"):
        dataio.write_panoptic_png(m, tmp_path / "o.png", "cityscapes-id", TAX)
    # coco-rgb supports the full range
    info = dataio.write_panoptic_png(m, tmp_path / "o2.png", "coco-rgb", TAX)
    back = dataio.read_panoptic_png(tmp_path / "o2.png", "coco-rgb", TAX, segments_info=info)
    assert back == m


def test_unknown_encoding_rejected(tmp_path):
    with pytest.raises(UnknownEncodingError):
        dataio.write_panoptic_png(uniform_map(2, 2, ROAD), tmp_path / "x.png", "bmp", TAX)


def test_unknown_segment_id_rejected(tmp_path):
    m = uniform_map(2, 2, ROAD)
    info = dataio.write_panoptic_png(m, tmp_path / "m.png", "coco-rgb", TAX)
    with pytest.raises(UnknownSegmentIdError, match="pixel id 1"):
        dataio.read_panoptic_png(tmp_path / "m.png", "coco-rgb", TAX, segments_info=[])


def test_truncated_png_is_typed_error(tmp_path):
    m = uniform_map(8, 8, ROAD)
    p = tmp_path / "t.png"
    dataio.write_panoptic_png(m, p, "coco-rgb", TAX)
    data = p.read_bytes()
    p.write_bytes(data[: len(data) // 2])
    with pytest.raises(TruncatedFileError):
        dataio.read_panoptic_png(p, "coco-rgb", TAX, segments_info=[])
    p.write_bytes(b"not a png at all")
    with pytest.raises(TruncatedFileError):
        dataio.read_panoptic_png(p, "coco-rgb", TAX, segments_info=[])


# --- flow ------------------------------------------------------------------


def test_flow_round_trip_and_zero_flow(tmp_path):
    flow = np.zeros((3, 4, 2), dtype=np.float32)
    dataio.write_flow(flow, tmp_path / "z.flo")
    back = dataio.read_flow(tmp_path / "z.flo")
    assert back.shape == (3, 4, 2)
    assert np.array_equal(back, flow)

    from vpseval.track import warp_mask

    mask = np.zeros((3, 4), dtype=bool)
    mask[1, 1] = True
    assert np.array_equal(warp_mask(mask, back), mask)  # identity warp


def test_flow_dx_plus_one_shifts_right(tmp_path):
    flow = np.zeros((2, 2, 2), dtype=np.float32)
    flow[:, :, 0] = 1.0
    dataio.write_flow(flow, tmp_path / "dx.flo")
    back = dataio.read_flow(tmp_path / "dx.flo")
    from vpseval.track import warp_mask

    mask = np.array([[True, False], [False, False]])
    shifted = warp_mask(mask, back)
    assert shifted.tolist() == [[False, True], [False, False]]


def test_flow_truncation_names_byte_counts(tmp_path):
    flow = np.ones((4, 5, 2), dtype=np.float32)
    p = tmp_path / "t.flo"
    dataio.write_flow(flow, p)
    payload = p.read_bytes()
    p.write_bytes(payload[:-7])
    with pytest.raises(TruncatedFileError) as exc:
        dataio.read_flow(p)
    assert exc.value.expected == 12 + 8 * 4 * 5
    assert exc.value.actual == 12 + 8 * 4 * 5 - 7
    assert str(exc.value.expected) in str(exc.value)
    assert str(exc.value.actual) in str(exc.value)


def test_flow_bad_magic(tmp_path):
    p = tmp_path / "bad.flo"
    p.write_bytes(b"\x00" * 20)
    with pytest.raises(BadMagicError):
        dataio.read_flow(p)


def test_readers_never_panic_on_garbage(tmp_path):
    from vpseval.errors import VpsError

    rng = np.random.default_rng(123)
    for i in range(40):
        blob = rng.bytes(int(rng.integers(0, 200)))
        p = tmp_path / f"junk{i}"
        p.write_bytes(blob)
        for reader in (
            lambda q: dataio.read_panoptic_png(q, "coco-rgb", TAX, segments_info=[]),
            lambda q: dataio.read_panoptic_png(q, "cityscapes-id", TAX),
            dataio.read_flow,
            dataio.read_manifest,
            lambda q: dataio.read_instance_predictions(q, TAX),
            dataio.read_semantic_png,
        ):
            with pytest.raises(VpsError):
                reader(p)


# --- rle and instance json --------------------------------------------------


def test_rle_round_trip():
    rng = np.random.default_rng(5)
    for _ in range(50):
        mask = rng.random((int(rng.integers(1, 9)), int(rng.integers(1, 9)))) < 0.4
        assert np.array_equal(dataio.decode_rle(dataio.encode_rle(mask)), mask)


def test_rle_bad_counts_rejected():
    with pytest.raises(FormatError):
        dataio.decode_rle({"size": [2, 2], "counts": [3]})
    with pytest.raises(FormatError):
        dataio.decode_rle({"size": [2, 2], "counts": [-1, 5]})


def test_instance_predictions_round_trip(tmp_path):
    from vpseval import InstancePrediction

    mask = np.zeros((6, 8), dtype=bool)
    mask[1:4, 2:5] = True
    inst = InstancePrediction(
        box=(2.0, 1.0, 5.0, 4.0),
        class_probs={CAR: 0.8, PERSON: 0.1},
        mask=mask,
        embedding=np.array([0.0, 1.0]),
    )
    p = tmp_path / "v0.json"
    dataio.write_instance_predictions(p, "v0", 8, 6, [[inst], []])
    vid, w, h, frames = dataio.read_instance_predictions(p, TAX)
    assert (vid, w, h) == ("v0", 8, 6)
    assert len(frames) == 2 and len(frames[0]) == 1 and frames[1] == []
    got = frames[0][0]
    assert got.box == inst.box
    assert got.class_probs == inst.class_probs
    assert np.array_equal(got.mask, inst.mask)
    assert np.array_equal(got.embedding, inst.embedding)


def test_instance_predictions_rejects_stuff_class(tmp_path):
    doc = {
        "video_id": "v0", "width": 4, "height": 4,
        "frames": [{"index": 0, "instances": [{
            "box": [0, 0, 2, 2],
            "class_probs": {str(ROAD): 0.9},
            "mask_rle": {"size": [4, 4], "counts": [0, 2, 2, 2, 2, 8]},
            "embedding": None,
        }]}],
    }
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(LabelFormatError, match="not a thing"):
        dataio.read_instance_predictions(p, TAX)


def test_malformed_json_is_typed_error(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{nope")
    with pytest.raises(FormatError):
        dataio.read_instance_predictions(p, TAX)


# --- manifests and datasets --------------------------------------------------


def _small_dataset():
    spec = sim.SceneSpec(
        width=10, height=8, length=6, stride=5, background=(SKY, ROAD),
        objects=(sim.ObjectSpec(CAR, (1, 1, 5, 5), (0.5, 0.0)),),
        video_id="v0",
    )
    return [sim.generate(spec, TAX)]


def test_manifest_round_trip(tmp_path):
    videos = _small_dataset()
    path = dataio.write_video_dataset(videos, TAX, 5, tmp_path / "d", "coco-rgb")
    manifest = dataio.read_manifest(path)
    assert manifest.annotation_stride == 5
    assert manifest.video_ids() == ["v0"]
    assert manifest.taxonomy == TAX
    again = json.loads(path.read_text())
    dataio.write_manifest(manifest, tmp_path / "copy.json")
    assert json.loads((tmp_path / "copy.json").read_text()) == again


def test_manifest_schema_violations(tmp_path):
    path = dataio.write_video_dataset(_small_dataset(), TAX, 5, tmp_path / "d", "coco-rgb")
    doc = json.loads(path.read_text())
    bad = dict(doc)
    del bad["encoding"]
    (tmp_path / "bad1.json").write_text(json.dumps(bad))
    with pytest.raises(ManifestError):
        dataio.read_manifest(tmp_path / "bad1.json")

    bad = json.loads(path.read_text())
    bad["videos"][0]["frames"][0]["annotated"] = False
    (tmp_path / "bad2.json").write_text(json.dumps(bad))
    with pytest.raises(ManifestError, match="frame 0 must be annotated"):
        dataio.read_manifest(tmp_path / "bad2.json")

    bad = json.loads(path.read_text())
    bad["videos"][0]["frames"][1]["index"] = 7
    (tmp_path / "bad3.json").write_text(json.dumps(bad))
    with pytest.raises(ManifestError, match="contiguous"):
        dataio.read_manifest(tmp_path / "bad3.json")


def test_loaded_dataset_evaluates_identically(tmp_path):
    videos = _small_dataset()
    config = VpqConfig(window_spans=(0, 5), annotation_stride=5)
    direct = evaluate_videos([(videos[0], videos[0])], TAX, config)
    path = dataio.write_video_dataset(videos, TAX, 5, tmp_path / "d", "coco-rgb")
    manifest = dataio.read_manifest(path)
    loaded = dataio.load_video_labels(manifest, manifest.videos[0])
    assert evaluate_videos([(loaded, loaded)], TAX, config) == direct


@pytest.mark.parametrize("src,dst", [("coco-rgb", "cityscapes-id"),
                                     ("cityscapes-id", "coco-rgb")])
def test_convert_preserves_vpq(tmp_path, src, dst):
    videos = _small_dataset()
    pred = [sim.perturb(videos[0], [sim.IdSwap(5, CAR, 1, 2)], TAX)]
    gt_path = dataio.write_video_dataset(videos, TAX, 5, tmp_path / "gt", src)
    pred_path = dataio.write_video_dataset(pred, TAX, 5, tmp_path / "pred", src)
    gt_conv = dataio.convert_dataset(gt_path, dst, tmp_path / "gt2")
    pred_conv = dataio.convert_dataset(pred_path, dst, tmp_path / "pred2")

    r1, _ = dataio.evaluate_manifests(gt_path, pred_path, windows=(0, 5))
    r2, _ = dataio.evaluate_manifests(gt_conv, pred_conv, windows=(0, 5))
    assert r1 == r2
    r3, _ = dataio.evaluate_manifests(gt_conv, gt_conv, windows=(0, 5))
    assert r3.vpq == 1.0


def test_viper_and_cityscapes_style_taxonomies_accepted():
    viper = sim.ClassTaxonomy(
        classes=tuple(
            [sim.ClassDef(i, f"thing{i}", "thing") for i in range(1, 11)]
            + [sim.ClassDef(100 + i, f"stuff{i}", "stuff") for i in range(13)]
        ),
        void_id=0,
    )
    assert (len(viper.thing_ids), len(viper.stuff_ids)) == (10, 13)
    cityscapes = sim.ClassTaxonomy(
        classes=tuple(
            [sim.ClassDef(i, f"thing{i}", "thing") for i in range(24, 32)]
            + [sim.ClassDef(i, f"stuff{i}", "stuff") for i in range(11)]
        ),
        void_id=255,
    )
    assert (len(cityscapes.thing_ids), len(cityscapes.stuff_ids)) == (8, 11)
    doc = dataio.taxonomy_to_dict(viper)
    assert dataio.taxonomy_from_dict(doc) == viper


def test_evaluate_manifests_validation_is_exhaustive(tmp_path):
    videos = _small_dataset()
    gt_path = dataio.write_video_dataset(videos, TAX, 5, tmp_path / "gt", "coco-rgb")
    pred_path = dataio.write_video_dataset(videos, TAX, 5, tmp_path / "pred", "coco-rgb")
    # delete a prediction file and rename a video in the pred manifest copy
    doc = json.loads(pred_path.read_text())
    doc["videos"][0]["id"] = "other"
    pred_path.write_text(json.dumps(doc))
    with pytest.raises(DatasetValidationError) as exc:
        dataio.evaluate_manifests(gt_path, pred_path, windows=(0, 5))
    codes = {i.code for i in exc.value.issues}
    assert "missing-video" in codes and "extra-video" in codes
