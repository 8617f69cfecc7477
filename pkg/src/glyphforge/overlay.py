"""Detection overlays: page image with flagged and ground-truth boxes outlined."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw, ImageFont

Rect = tuple[int, int, int, int]

PREDICTION_COLOR = (220, 30, 30)
TRUTH_COLOR = (30, 160, 30)
LEGEND_HEIGHT = 36


def render_overlay(
    image: np.ndarray,
    predicted: Sequence[Rect],
    truth: Sequence[Rect] = (),
) -> Image.Image:
    """RGB overlay with a legend strip appended below the page.

    Predicted boxes are outlined tight, ground truth 3 px outset, so
    coinciding detections stay readable. Nothing is drawn inside the
    page region unless there is something to mark.
    """
    h, w = image.shape[:2]
    canvas = Image.new("RGB", (w, h + LEGEND_HEIGHT), (245, 245, 245))
    canvas.paste(Image.fromarray(image, mode="L").convert("RGB"), (0, 0))
    draw = ImageDraw.Draw(canvas)

    for x0, y0, bw, bh in predicted:
        draw.rectangle([x0, y0, x0 + bw - 1, y0 + bh - 1], outline=PREDICTION_COLOR, width=2)
    for x0, y0, bw, bh in truth:
        draw.rectangle([x0 - 3, y0 - 3, x0 + bw + 2, y0 + bh + 2], outline=TRUTH_COLOR, width=2)

    font = ImageFont.load_default()
    y = h + 10
    draw.rectangle([10, y, 26, y + 14], outline=PREDICTION_COLOR, width=3)
    draw.text((32, y), "flagged", fill=(20, 20, 20), font=font)
    draw.rectangle([110, y, 126, y + 14], outline=TRUTH_COLOR, width=3)
    draw.text((132, y), "ground truth", fill=(20, 20, 20), font=font)
    return canvas
