import json

import numpy as np
import pytest

from glyphforge.synth import (
    CleanPage,
    ManipulationRecord,
    ManipulationSpec,
    SourceBox,
    build_corpus,
    load_truth,
    manipulate_page,
)


def grid_page(rows=5, cols=20, char_w=8, char_h=12, gap_x=6, gap_y=10):
    """Page of black rectangles with a distinct gray pixel per box corner."""
    width = 20 + cols * (char_w + gap_x)
    height = 20 + rows * (char_h + gap_y)
    img = np.full((height, width), 255, dtype=np.uint8)
    boxes = []
    glyphs = "0123456789abcdefghij"
    for r in range(rows):
        for c in range(cols):
            x0 = 10 + c * (char_w + gap_x)
            y0 = 10 + r * (char_h + gap_y)
            img[y0 : y0 + char_h, x0 : x0 + char_w] = 0
            img[y0, x0] = 77  # marker for paste tracking
            boxes.append(SourceBox(glyphs[c % len(glyphs)], x0, y0, char_w, char_h))
    return CleanPage(image=img, boxes=boxes, name="grid")


def shift_spec(lo=1, hi=5, prob=0.3, seed=1, policy="axis4"):
    return ManipulationSpec("shift", (lo, hi), probability=prob, direction_policy=policy, seed=seed)


def scale_spec(lo=0.15, hi=0.25, prob=0.3, seed=1, policy="both"):
    return ManipulationSpec("scale", (lo, hi), probability=prob, scale_policy=policy, seed=seed)


class TestSpecValidation:
    def test_paper_ranges_expressible(self):
        for kind, rng in (("shift", (1, 5)), ("shift", (5, 10)), ("scale", (0.07, 0.14)), ("scale", (0.15, 0.25))):
            ManipulationSpec(kind, rng, probability=0.05, seed=0)

    def test_bad_probability(self):
        with pytest.raises(ValueError, match="probability"):
            ManipulationSpec("shift", (1, 5), probability=1.5)

    def test_bad_kind(self):
        with pytest.raises(ValueError, match="kind"):
            ManipulationSpec("blur", (1, 5))

    def test_round_trip(self):
        spec = shift_spec()
        assert ManipulationSpec.from_dict(spec.to_dict()) == spec


class TestManipulatePage:
    def test_probability_zero_is_noop(self):
        page = grid_page()
        out, records = manipulate_page(page.image, page.boxes, shift_spec(prob=0.0))
        assert records == []
        assert np.array_equal(out, page.image)

    def test_shift_moves_crop_and_backfills(self):
        page = grid_page()
        spec = shift_spec(lo=3, hi=3, prob=1.0, policy="vertical_only", seed=5)
        out, records = manipulate_page(page.image, page.boxes, spec)
        assert records
        for rec in records:
            ox, oy, w, h = rec.original_box
            ax, ay, aw, ah = rec.altered_box
            assert (aw, ah) == (w, h)
            dx, dy = rec.params["dx"], rec.params["dy"]
            assert dx == 0 and abs(dy) == 3
            assert (ax, ay) == (ox + dx, oy + dy)
            # the corner marker moved with the crop
            assert out[ay, ax] == 77
            # vacated rows are backfilled with the ring background (white)
            if dy < 0:
                assert np.all(out[oy + h + dy : oy + h, ox : ox + w] == 255)

    def test_scale_box_arithmetic(self):
        page = grid_page(char_w=10, char_h=20, gap_x=14, gap_y=16)
        spec = scale_spec(lo=0.2, hi=0.2, prob=1.0, policy="enlarge", seed=2)
        out, records = manipulate_page(page.image, page.boxes, spec)
        assert records
        for rec in records:
            ox, oy, w, h = rec.original_box
            assert (w, h) == (10, 20)
            assert rec.params["factor"] == pytest.approx(1.2)
            assert rec.altered_box == (ox - 1, oy - 2, 12, 24)

    def test_upward_shift_decreases_y0(self):
        page = grid_page()
        spec = shift_spec(lo=2, hi=4, prob=1.0, policy="vertical_only", seed=3)
        _, records = manipulate_page(page.image, page.boxes, spec)
        ups = [r for r in records if r.params["dy"] < 0]
        assert ups, "expected at least one upward shift"
        for r in ups:
            assert r.altered_box[1] == r.original_box[1] + r.params["dy"] < r.original_box[1]

    def test_records_change_geometry(self):
        page = grid_page()
        for spec in (shift_spec(prob=1.0), scale_spec(prob=1.0)):
            _, records = manipulate_page(page.image, page.boxes, spec)
            for r in records:
                assert r.altered_box != r.original_box

    def test_magnitude_containment(self):
        page = grid_page()
        _, records = manipulate_page(page.image, page.boxes, shift_spec(lo=1, hi=5, prob=1.0))
        assert records
        for r in records:
            mag = abs(r.params["dx"]) + abs(r.params["dy"])
            assert mag in (1, 2, 3, 4, 5)
        _, records = manipulate_page(page.image, page.boxes, scale_spec(lo=0.07, hi=0.14, prob=1.0))
        for r in records:
            assert 0.07 <= abs(r.params["factor"] - 1.0) <= 0.14

    def test_conservation_outside_touched_regions(self):
        page = grid_page()
        out, records = manipulate_page(page.image, page.boxes, shift_spec(prob=0.5, seed=9))
        touched = np.zeros_like(out, dtype=bool)
        for r in records:
            for x0, y0, w, h in (r.original_box, r.altered_box):
                touched[y0 : y0 + h, x0 : x0 + w] = True
        assert np.array_equal(out[~touched], page.image[~touched])

    def test_claimed_regions_never_overlap(self):
        page = grid_page(gap_x=3, gap_y=3)
        for seed in range(4):
            _, records = manipulate_page(page.image, page.boxes, shift_spec(lo=4, hi=8, prob=1.0, seed=seed))
            rects = []
            for r in records:
                x0 = min(r.original_box[0], r.altered_box[0])
                y0 = min(r.original_box[1], r.altered_box[1])
                x1 = max(r.original_box[0] + r.original_box[2], r.altered_box[0] + r.altered_box[2])
                y1 = max(r.original_box[1] + r.original_box[3], r.altered_box[1] + r.altered_box[3])
                rects.append((x0, y0, x1, y1))
            for i in range(len(rects)):
                for j in range(i + 1, len(rects)):
                    a, b = rects[i], rects[j]
                    assert a[2] <= b[0] or b[2] <= a[0] or a[3] <= b[1] or b[3] <= a[1]

    def test_out_of_bounds_alteration_skipped(self):
        img = np.full((30, 30), 255, dtype=np.uint8)
        img[2:14, 2:10] = 0
        boxes = [SourceBox("a", 2, 2, 8, 12)]
        spec = shift_spec(lo=20, hi=25, prob=1.0, seed=0)
        out, records = manipulate_page(img, boxes, spec)
        assert records == []
        assert np.array_equal(out, img)

    def test_binomial_count_band(self):
        page = grid_page(rows=10, cols=100, gap_x=4, gap_y=8)  # 1000 boxes
        assert len(page.boxes) == 1000
        _, records = manipulate_page(page.image, page.boxes, shift_spec(lo=1, hi=2, prob=0.05, seed=42))
        assert 25 <= len(records) <= 75


class TestBuildCorpus:
    def test_deterministic_bytes(self, tmp_path):
        pages = [grid_page(), grid_page(rows=3)]
        spec = shift_spec(prob=0.2, seed=11)
        out1, out2 = tmp_path / "c1", tmp_path / "c2"
        build_corpus(pages, spec, out1, test_indices=[1])
        build_corpus(pages, spec, out2, test_indices=[1])
        for rel in ("train/page0000.png", "train/truth.json", "train/glyphs.json",
                    "test/page0000.png", "test/truth.json", "manifest.json"):
            assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes(), rel

    def test_truth_schema_and_loader(self, tmp_path):
        pages = [grid_page()]
        build_corpus(pages, shift_spec(prob=0.3, seed=4), tmp_path / "c")
        raw = json.loads((tmp_path / "c" / "train" / "truth.json").read_text())
        assert raw, "expected some manipulations"
        assert set(raw[0]) == {"page_index", "original_box", "altered_box", "kind", "params", "glyph"}
        by_page = load_truth(tmp_path / "c" / "train")
        assert len(by_page[0]) == len(raw)
        assert isinstance(by_page[0][0], ManipulationRecord)

    def test_manifest_records_spec(self, tmp_path):
        spec = scale_spec(seed=7)
        manifest = build_corpus([grid_page()], spec, tmp_path / "c")
        assert manifest["spec"] == spec.to_dict()
        on_disk = json.loads((tmp_path / "c" / "manifest.json").read_text())
        assert on_disk["spec"] == spec.to_dict()

    def test_glyph_map_tracks_altered_boxes(self, tmp_path):
        pages = [grid_page()]
        build_corpus(pages, shift_spec(prob=0.5, seed=2), tmp_path / "c")
        truth = load_truth(tmp_path / "c" / "train")
        glyphs = json.loads((tmp_path / "c" / "train" / "glyphs.json").read_text())
        boxes = {tuple(g["box"]) for g in glyphs[0]["glyphs"]}
        for rec in truth[0]:
            assert tuple(rec.altered_box) in boxes
            assert tuple(rec.original_box) not in boxes
