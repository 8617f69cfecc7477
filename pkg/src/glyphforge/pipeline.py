"""Corpus-level extraction: TSV + truth + page images to feature matrices."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .features import FeatureMatrix, SubGraphVector, extract_page_vectors
from .ocr import Page, group_lines, parse_tsv
from .synth import load_truth

logger = logging.getLogger(__name__)


def page_from_tsv(
    tsv_text: str, page_index: int, image_path: str, width: int, height: int
) -> Page:
    boxes = parse_tsv(tsv_text, page_index)
    page = Page(
        page_index=page_index,
        image_path=image_path,
        image_width=width,
        image_height=height,
        lines=group_lines(boxes),
    )
    page.validate_bounds()
    return page


def extract_split(
    split_dir: str | Path,
    n_values: Sequence[int],
    tsv_dir: str | Path | None = None,
) -> dict[int, FeatureMatrix]:
    """Feature matrices (one per n) for every page of a corpus split.

    Expects pageNNNN.png files with pageNNNN.tsv beside them (or in
    tsv_dir) and a truth.json. Pages without a TSV are skipped with a
    warning so a partial OCR run still yields a usable matrix.
    """
    split = Path(split_dir)
    tsv_root = Path(tsv_dir) if tsv_dir else split
    truth = load_truth(split) if (split / "truth.json").exists() else {}
    vectors: dict[int, list[SubGraphVector]] = {n: [] for n in n_values}

    for img_path in sorted(split.glob("page*.png")):
        page_index = int(img_path.stem[4:])
        tsv_path = tsv_root / (img_path.stem + ".tsv")
        if not tsv_path.exists():
            logger.warning("no TSV for %s; page skipped", img_path.name)
            continue
        image = np.asarray(Image.open(img_path).convert("L"))
        page = page_from_tsv(
            tsv_path.read_text(), page_index, str(img_path), image.shape[1], image.shape[0]
        )
        truth_boxes = [r.altered_box for r in truth.get(page_index, [])]
        page_vectors = extract_page_vectors(page, image, n_values, truth_boxes)
        for n in n_values:
            vectors[n].extend(page_vectors[n])

    return {n: FeatureMatrix.from_vectors(n, vecs) for n, vecs in vectors.items()}
