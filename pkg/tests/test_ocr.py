import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glyphforge.ocr import (
    CharBox,
    Page,
    TextLine,
    TsvParseError,
    group_lines,
    page_from_json,
    page_to_json,
    parse_tsv,
    same_line,
    write_tsv,
)
from conftest import make_box

HEADER = "level\tpage_num\tblock_num\tpar_num\tline_num\tword_num\tleft\ttop\twidth\theight\tconf\ttext"


def tsv(*rows):
    return "\n".join([HEADER, *rows]) + "\n"


class TestParseTsv:
    def test_single_symbol_row(self):
        boxes = parse_tsv(tsv("5\t1\t1\t1\t1\t1\t100\t50\t10\t20\t96.0\tA"), page_index=0)
        assert boxes == [CharBox(0, "A", 100, 50, 10, 20, 96.0)]

    def test_word_row_splits_uniformly(self):
        boxes = parse_tsv(tsv("5\t1\t1\t1\t1\t1\t100\t50\t20\t20\t96.0\tAB"), page_index=0)
        assert [(b.glyph, b.x0, b.width) for b in boxes] == [("A", 100, 10), ("B", 110, 10)]

    def test_header_only(self):
        assert parse_tsv(HEADER + "\n", 0) == []

    def test_skips_negative_conf_and_empty_text(self):
        text = tsv(
            "1\t1\t0\t0\t0\t0\t0\t0\t612\t792\t-1\t",
            "5\t1\t1\t1\t1\t1\t10\t10\t8\t12\t-1\tX",
            "5\t1\t1\t1\t1\t2\t30\t10\t8\t12\t91.5\tY",
        )
        boxes = parse_tsv(text, 0)
        assert [b.glyph for b in boxes] == ["Y"]

    def test_skips_non_symbol_levels(self):
        boxes = parse_tsv(tsv("4\t1\t1\t1\t1\t0\t10\t10\t80\t12\t-1\t"), 0)
        assert boxes == []

    def test_wrong_column_count_names_line(self):
        with pytest.raises(TsvParseError, match="line 2"):
            parse_tsv(tsv("5\t1\t1\t1"), 0)

    def test_non_numeric_geometry(self):
        with pytest.raises(TsvParseError, match="line 2"):
            parse_tsv(tsv("5\t1\t1\t1\t1\t1\tbad\t50\t10\t20\t96.0\tA"), 0)

    def test_negative_size_rejected(self):
        with pytest.raises(TsvParseError, match="non-positive"):
            parse_tsv(tsv("5\t1\t1\t1\t1\t1\t100\t50\t-10\t20\t96.0\tA"), 0)

    def test_negative_origin_rejected(self):
        with pytest.raises(TsvParseError, match="negative box origin"):
            parse_tsv(tsv("5\t1\t1\t1\t1\t1\t-3\t50\t10\t20\t96.0\tA"), 0)


class TestSameLine:
    def test_identical_y(self):
        assert same_line(make_box(y0=100, h=20), make_box(x0=30, y0=100, h=20))

    def test_gap_17_of_height_20_fails(self):
        # 17 < 0.85*20 = 17 is false: strict inequality
        assert not same_line(make_box(y0=100, h=20), make_box(x0=30, y0=117, h=20))

    def test_gap_16_of_height_20_passes(self):
        assert same_line(make_box(y0=100, h=20), make_box(x0=30, y0=116, h=20))

    @given(
        y1=st.integers(0, 400), y2=st.integers(0, 400),
        h1=st.integers(1, 60), h2=st.integers(1, 60),
    )
    @settings(max_examples=200)
    def test_symmetric(self, y1, y2, h1, h2):
        a = make_box(y0=y1, h=h1)
        b = make_box(x0=50, y0=y2, h=h2)
        assert same_line(a, b) == same_line(b, a)


class TestGroupLines:
    def test_same_row_groups_together(self):
        boxes = [make_box(x0=x, y0=40) for x in (0, 20, 40)]
        lines = group_lines(boxes)
        assert len(lines) == 1 and len(lines[0].boxes) == 3

    def test_distant_rows_split(self):
        boxes = [make_box(x0=0, y0=0, h=20), make_box(x0=0, y0=200, h=20)]
        assert len(group_lines(boxes)) == 2

    def test_greedy_chain_bridges_transitivity_gap(self):
        # A-B and B-C pass the rule, A-C does not; the chain still forms one line
        a = make_box(x0=0, y0=0, h=20)
        b = make_box(x0=20, y0=15, h=20)
        c = make_box(x0=40, y0=30, h=20)
        assert not same_line(a, c)
        lines = group_lines([a, b, c])
        assert len(lines) == 1
        assert [bx.y0 for bx in lines[0].boxes] == [0, 15, 30]

    def test_partition_and_order(self):
        boxes = [make_box(x0=x, y0=y) for y in (0, 100, 200) for x in (60, 0, 30)]
        lines = group_lines(boxes)
        got = [b for line in lines for b in line.boxes]
        assert sorted(map(id, got)) == sorted(map(id, boxes))
        for line in lines:
            xs = [b.x0 for b in line.boxes]
            assert xs == sorted(xs)

    def test_deterministic(self):
        boxes = [make_box(x0=x, y0=y) for x in (0, 15, 30, 45) for y in (0, 14)]
        a = group_lines(boxes)
        b = group_lines(boxes)
        assert [[bx.x0 for bx in ln.boxes] for ln in a] == [[bx.x0 for bx in ln.boxes] for ln in b]


glyph_chars = st.characters(
    whitelist_categories=("Lu", "Ll", "Nd", "Po", "Sc"), blacklist_characters="\t\n\r"
)


@given(
    st.lists(
        st.tuples(
            glyph_chars,
            st.integers(0, 2000), st.integers(0, 2000),
            st.integers(1, 100), st.integers(1, 100),
            st.floats(0, 100, allow_nan=False),
        ),
        max_size=30,
    )
)
@settings(max_examples=100)
def test_tsv_round_trip(rows):
    boxes = [CharBox(0, g, x, y, w, h, c) for g, x, y, w, h, c in rows]
    assert parse_tsv(write_tsv(boxes), 0) == boxes


def test_page_json_round_trip():
    page = Page(
        page_index=2, image_path="pages/page0002.png", image_width=300, image_height=200,
        lines=[TextLine(2, [make_box(page=2), make_box(x0=15, page=2, glyph="b")])],
    )
    again = page_from_json(page_to_json(page))
    assert again == page


def test_page_bounds_validation():
    page = Page(0, "x.png", image_width=50, image_height=50,
                lines=[TextLine(0, [make_box(x0=45, w=10)])])
    with pytest.raises(ValueError, match="exceeds page"):
        page.validate_bounds()
