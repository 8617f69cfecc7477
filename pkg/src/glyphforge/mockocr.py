"""OCR simulator: Tesseract-format TSV from a page image plus glyph regions.

Stands in for a real `tesseract page.png page tsv` invocation in tests
and demos where no OCR engine is installed. Each known glyph region is
re-measured against the actual ink in the image (tight box of pixels
darker than 128 within the region plus a 1-px margin), so manipulated
characters are observed where they ended up, not where they started.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .ocr import CharBox, write_tsv

INK_THRESHOLD = 128
MARGIN = 1


def simulate_page_tsv(
    image: np.ndarray,
    glyph_boxes: Sequence[tuple[str, tuple[int, int, int, int]]],
    page_index: int = 0,
) -> str:
    """TSV text with one level-5 row per glyph whose region still has ink."""
    hh, ww = image.shape
    boxes: list[CharBox] = []
    for glyph, (x0, y0, w, h) in glyph_boxes:
        gx0 = max(0, x0 - MARGIN)
        gy0 = max(0, y0 - MARGIN)
        gx1 = min(ww, x0 + w + MARGIN)
        gy1 = min(hh, y0 + h + MARGIN)
        if gx1 <= gx0 or gy1 <= gy0:
            continue
        region = image[gy0:gy1, gx0:gx1]
        ys, xs = np.nonzero(region < INK_THRESHOLD)
        if xs.size == 0:
            continue
        bx0 = gx0 + int(xs.min())
        by0 = gy0 + int(ys.min())
        boxes.append(
            CharBox(
                page_index=page_index,
                glyph=glyph,
                x0=bx0,
                y0=by0,
                width=int(xs.max() - xs.min()) + 1,
                height=int(ys.max() - ys.min()) + 1,
                confidence=95.0,
            )
        )
    return write_tsv(boxes)


def simulate_split(split_dir: str | Path) -> int:
    """Write pageNNNN.tsv beside every page of a corpus split.

    Reads the split's glyphs.json for the post-manipulation glyph
    regions. Returns the number of pages processed.
    """
    split = Path(split_dir)
    glyph_maps = json.loads((split / "glyphs.json").read_text())
    for entry in glyph_maps:
        image = np.asarray(Image.open(split / entry["image"]).convert("L"))
        glyph_boxes = [(g["glyph"], tuple(g["box"])) for g in entry["glyphs"]]
        tsv = simulate_page_tsv(image, glyph_boxes, page_index=entry["page_index"])
        (split / entry["image"].replace(".png", ".tsv")).write_text(tsv)
    return len(glyph_maps)
