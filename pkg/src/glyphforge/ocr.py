"""Tesseract TSV ingestion: character boxes, text-line grouping, page JSON.

Consumes the 12-column TSV that ``tesseract image out tsv`` produces.
OCR itself is an external preprocessing step; this module only parses
its output and groups boxes into text lines with the height-ratio rule
``|y0_a - y0_b| < 0.85 * max(height_a, height_b)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

SAME_LINE_RATIO = 0.85

TSV_COLUMNS = (
    "level", "page_num", "block_num", "par_num", "line_num", "word_num",
    "left", "top", "width", "height", "conf", "text",
)


class TsvParseError(ValueError):
    """Raised for malformed TSV rows; message names the offending line."""


@dataclass(frozen=True)
class CharBox:
    """One OCR character box. y grows downward; (x0, y0) is the top-left corner."""

    page_index: int
    glyph: str
    x0: int
    y0: int
    width: int
    height: int
    confidence: float

    def __post_init__(self):
        if len(self.glyph) != 1:
            raise ValueError(f"glyph must be a single character, got {self.glyph!r}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"box must have positive size, got {self.width}x{self.height}")
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError(f"box origin must be non-negative, got ({self.x0}, {self.y0})")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x0 + self.width / 2.0, self.y0 + self.height / 2.0)


@dataclass
class TextLine:
    page_index: int
    boxes: list[CharBox] = field(default_factory=list)


@dataclass
class Page:
    page_index: int
    image_path: str
    image_width: int
    image_height: int
    lines: list[TextLine] = field(default_factory=list)

    def validate_bounds(self) -> None:
        for line in self.lines:
            for b in line.boxes:
                if b.x0 + b.width > self.image_width or b.y0 + b.height > self.image_height:
                    raise ValueError(
                        f"box ({b.x0},{b.y0},{b.width},{b.height}) exceeds page "
                        f"{self.image_width}x{self.image_height}"
                    )

    def boxes(self) -> list[CharBox]:
        return [b for line in self.lines for b in line.boxes]


def same_line(a: CharBox, b: CharBox) -> bool:
    """Height-ratio line test: strict ``|dy0| < 0.85 * max(heights)``."""
    return abs(a.y0 - b.y0) < SAME_LINE_RATIO * max(a.height, b.height)


def _split_word_box(
    page_index: int, text: str, x0: int, y0: int, w: int, h: int, conf: float
) -> list[CharBox]:
    """Uniform horizontal subdivision of a multi-character row.

    Character i spans [x0 + floor(i*w/k), x0 + floor((i+1)*w/k)); slices
    that collapse to zero width (w < k) are dropped.
    """
    k = len(text)
    out = []
    for i, ch in enumerate(text):
        left = x0 + (i * w) // k
        right = x0 + ((i + 1) * w) // k
        if right - left <= 0:
            continue
        out.append(CharBox(page_index, ch, left, y0, right - left, h, conf))
    return out


def parse_tsv(tsv_text: str, page_index: int) -> list[CharBox]:
    """Parse Tesseract TSV into per-character boxes.

    Only level-5 (word/symbol) rows are kept. Rows with empty text or
    negative confidence are skipped; multi-character rows are split by
    uniform horizontal subdivision. Malformed rows raise TsvParseError
    naming the 1-based line number.
    """
    boxes: list[CharBox] = []
    lines = tsv_text.splitlines()
    for lineno, raw in enumerate(lines, start=1):
        if lineno == 1 and raw.strip().lower().startswith("level"):
            continue
        if not raw.strip():
            continue
        cols = raw.split("\t")
        if len(cols) != len(TSV_COLUMNS):
            raise TsvParseError(f"line {lineno}: expected {len(TSV_COLUMNS)} columns, got {len(cols)}")
        try:
            level = int(cols[0])
            left, top, width, height = (int(c) for c in cols[6:10])
            conf = float(cols[10])
        except ValueError as exc:
            raise TsvParseError(f"line {lineno}: non-numeric geometry field ({exc})") from exc
        if level != 5:
            continue
        text = cols[11]
        if text == "" or conf < 0:
            continue
        if width <= 0 or height <= 0:
            raise TsvParseError(f"line {lineno}: non-positive box size {width}x{height}")
        if left < 0 or top < 0:
            raise TsvParseError(f"line {lineno}: negative box origin ({left},{top})")
        if len(text) == 1:
            boxes.append(CharBox(page_index, text, left, top, width, height, conf))
        else:
            boxes.extend(_split_word_box(page_index, text, left, top, width, height, conf))
    return boxes


def write_tsv(boxes: Iterable[CharBox]) -> str:
    """Serialize boxes back to the same TSV layout (one level-5 row each).

    Round-trips through parse_tsv for glyphs that are printable non-tab,
    non-newline characters.
    """
    rows = ["\t".join(TSV_COLUMNS)]
    for i, b in enumerate(boxes, start=1):
        rows.append(
            "\t".join(
                [
                    "5", str(b.page_index + 1), "1", "1", "1", str(i),
                    str(b.x0), str(b.y0), str(b.width), str(b.height),
                    repr(b.confidence), b.glyph,
                ]
            )
        )
    return "\n".join(rows) + "\n"


def group_lines(boxes: Sequence[CharBox]) -> list[TextLine]:
    """Greedy left-to-right grouping of one page's boxes into text lines.

    Boxes are sorted by (x0, y0, glyph codepoint); each box joins the open
    line whose last-added box passes same_line, preferring the smallest
    |y0| gap (earliest line on ties), else it starts a new line. The test
    is only against the last member, so long chains can join boxes whose
    mutual gap exceeds the rule.
    """
    ordered = sorted(boxes, key=lambda b: (b.x0, b.y0, ord(b.glyph)))
    lines: list[TextLine] = []
    for box in ordered:
        best = None
        best_gap = None
        for line in lines:
            last = line.boxes[-1]
            if same_line(last, box):
                gap = abs(last.y0 - box.y0)
                if best_gap is None or gap < best_gap:
                    best, best_gap = line, gap
        if best is None:
            best = TextLine(page_index=box.page_index)
            lines.append(best)
        best.boxes.append(box)
    return lines


def _box_to_dict(b: CharBox) -> dict:
    return {
        "page_index": b.page_index,
        "glyph": b.glyph,
        "x0": b.x0,
        "y0": b.y0,
        "width": b.width,
        "height": b.height,
        "confidence": b.confidence,
    }


def page_to_json(page: Page) -> str:
    """Serialize a Page as JSON (schema: page -> lines -> boxes)."""
    doc = {
        "page_index": page.page_index,
        "image_path": page.image_path,
        "image_width": page.image_width,
        "image_height": page.image_height,
        "lines": [
            {"page_index": line.page_index, "boxes": [_box_to_dict(b) for b in line.boxes]}
            for line in page.lines
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def page_from_json(text: str) -> Page:
    doc = json.loads(text)
    page = Page(
        page_index=doc["page_index"],
        image_path=doc["image_path"],
        image_width=doc["image_width"],
        image_height=doc["image_height"],
    )
    for line_doc in doc["lines"]:
        line = TextLine(page_index=line_doc["page_index"])
        for bd in line_doc["boxes"]:
            line.boxes.append(
                CharBox(
                    bd["page_index"], bd["glyph"], bd["x0"], bd["y0"],
                    bd["width"], bd["height"], bd["confidence"],
                )
            )
        page.lines.append(line)
    return page
