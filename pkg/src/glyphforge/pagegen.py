"""Synthetic clean-document renderer for demos and tests.

Draws finance-flavored text onto white pages glyph by glyph and records
the tight ink bounding box of every character, which is exactly the
authoritative source-box input the corpus builder needs. Real corpora
would come from PDF text layout or a trusted OCR pass instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .rng import derive_rng
from .synth import CleanPage, SourceBox

UPPER = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
LOWER = "abcdefghijklmnopqrstuvwxyz"
LETTERS = UPPER + LOWER
DIGITS = "0123456789"


def find_default_font() -> str:
    """Path to a scalable font; falls back to matplotlib's bundled DejaVu."""
    candidates = [
        "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
        "/usr/share/fonts/TTF/DejaVuSans.ttf",
        "/Library/Fonts/Arial.ttf",
    ]
    for c in candidates:
        if Path(c).exists():
            return c
    try:
        from matplotlib import font_manager

        return font_manager.findfont("DejaVu Sans", fallback_to_default=True)
    except ImportError as exc:
        raise RuntimeError(
            "no TrueType font found; pass font_path= explicitly or install matplotlib"
        ) from exc


@dataclass
class GlyphTile:
    ink: np.ndarray  # tight grayscale tile, white background
    top_offset: int  # ink top relative to the text anchor line


class _TileCache:
    def __init__(self, font: ImageFont.FreeTypeFont):
        self.font = font
        self._tiles: dict[str, GlyphTile | None] = {}

    def get(self, ch: str) -> GlyphTile | None:
        if ch not in self._tiles:
            self._tiles[ch] = self._render(ch)
        return self._tiles[ch]

    def _render(self, ch: str) -> GlyphTile | None:
        size = self.font.size * 3
        img = Image.new("L", (size, size), 255)
        draw = ImageDraw.Draw(img)
        pad = self.font.size
        draw.text((pad, pad), ch, font=self.font, fill=0)
        arr = np.asarray(img)
        ys, xs = np.nonzero(arr < 255)
        if xs.size == 0:
            return None
        tile = arr[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1].copy()
        return GlyphTile(ink=tile, top_offset=int(ys.min()) - pad)


def _digits(rng: np.random.Generator, k: int) -> str:
    return "".join(DIGITS[int(rng.integers(0, 10))] for _ in range(k))


def _random_token(rng: np.random.Generator) -> str:
    """Finance-flavored token: labels, account numbers, amounts, dates."""
    kind = rng.integers(0, 10)
    if kind < 2:  # field label
        return "".join(UPPER[int(rng.integers(0, 26))] for _ in range(int(rng.integers(3, 9))))
    if kind < 5:  # account / reference number
        return _digits(rng, int(rng.integers(2, 8)))
    if kind < 8:  # amount, sometimes with a currency mark
        prefix = "$" if rng.integers(0, 2) else ""
        return f"{prefix}{_digits(rng, int(rng.integers(1, 5)))}.{_digits(rng, 2)}"
    if kind < 9:  # date
        return "%02d/%02d/%04d" % (rng.integers(1, 13), rng.integers(1, 29), rng.integers(1990, 2030))
    return "".join(LOWER[int(rng.integers(0, 26))] for _ in range(int(rng.integers(2, 7))))


def render_page(
    seed: int,
    page_index: int,
    width: int = 1000,
    height: int = 1380,
    font_size: int = 24,
    font_path: str | None = None,
    margin: int = 48,
    tracking: int = 3,
    leading: int = 14,
) -> CleanPage:
    """One white page filled with random tokens; boxes are tight ink rects."""
    font = ImageFont.truetype(font_path or find_default_font(), font_size)
    tiles = _TileCache(font)
    rng = derive_rng(seed, page_index)
    page = np.full((height, width), 255, dtype=np.uint8)
    boxes: list[SourceBox] = []

    space = max(4, font_size // 3)
    line_step = font_size + leading
    y = margin
    while y + font_size + leading < height - margin:
        x = margin
        while True:
            token = _random_token(rng)
            token_width = sum(
                (tiles.get(ch).ink.shape[1] + tracking) if tiles.get(ch) else space
                for ch in token
            )
            if x + token_width > width - margin:
                break
            for ch in token:
                tile = tiles.get(ch)
                if tile is None:
                    x += space
                    continue
                h, w = tile.ink.shape
                ty = y + tile.top_offset
                region = page[ty : ty + h, x : x + w]
                np.minimum(region, tile.ink, out=region)
                boxes.append(SourceBox(ch, x, ty, w, h))
                x += w + tracking
            x += space
        y += line_step
    return CleanPage(image=page, boxes=boxes, name=f"gen{page_index:04d}")


def render_pages(
    n_pages: int,
    seed: int = 0,
    font_sizes: tuple[int, ...] = (21, 24, 27),
    **kwargs,
) -> list[CleanPage]:
    """Pages with per-page font size drawn from `font_sizes`.

    Mixing sizes across pages mimics a multi-document corpus; without it
    every same-glyph character is pixel-identical and per-class shape
    statistics collapse to zero variance.
    """
    pages = []
    for i in range(n_pages):
        if "font_size" not in kwargs:
            size = font_sizes[int(derive_rng(seed, i, 0xF0).integers(0, len(font_sizes)))]
            pages.append(render_page(seed, i, font_size=size, **kwargs))
        else:
            pages.append(render_page(seed, i, **kwargs))
    return pages


def save_clean_dir(pages: list[CleanPage], out_dir: str | Path) -> None:
    """Write the clean-input layout the synth command consumes."""
    out = Path(out_dir)
    (out / "pages").mkdir(parents=True, exist_ok=True)
    index = []
    for i, page in enumerate(pages):
        name = f"pages/page{i:04d}.png"
        Image.fromarray(page.image, mode="L").save(out / name)
        index.append(
            {
                "image": name,
                "name": page.name or f"page{i:04d}",
                "boxes": [{"glyph": b.glyph, "box": [b.x0, b.y0, b.width, b.height]} for b in page.boxes],
            }
        )
    (out / "pages.json").write_text(json.dumps(index, sort_keys=True, indent=2) + "\n")


def load_clean_dir(path: str | Path) -> list[CleanPage]:
    root = Path(path)
    index = json.loads((root / "pages.json").read_text())
    pages = []
    for entry in index:
        image = np.asarray(Image.open(root / entry["image"]).convert("L"))
        boxes = [SourceBox(b["glyph"], *b["box"]) for b in entry["boxes"]]
        pages.append(CleanPage(image=image, boxes=boxes, name=entry.get("name", "")))
    return pages
