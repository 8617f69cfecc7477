"""Synthetic manipulation corpora: shift or scale character boxes in clean pages.

Inputs are pre-rendered page images plus authoritative character boxes
(e.g. from the renderer or a trusted OCR pass of the pristine page);
those source boxes are never exposed to the detector. Each box is
altered with a configurable probability; the altered geometry is
recorded as ground truth. Everything is deterministic under the seed,
with per-page RNG streams so parallel and serial builds match.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from . import __version__
from .rng import derive_rng

logger = logging.getLogger(__name__)

SHIFT_DIRECTIONS = {
    "axis4": ((0, -1), (0, 1), (-1, 0), (1, 0)),  # up, down, left, right
    "vertical_only": ((0, -1), (0, 1)),
}
MAX_SCALE_REDRAWS = 8

Rect = tuple[int, int, int, int]  # x0, y0, w, h


@dataclass(frozen=True)
class SourceBox:
    """A pristine character position in a clean page."""

    glyph: str
    x0: int
    y0: int
    width: int
    height: int

    @property
    def rect(self) -> Rect:
        return (self.x0, self.y0, self.width, self.height)


@dataclass(frozen=True)
class ManipulationSpec:
    kind: str  # "shift" | "scale"
    magnitude_range: tuple[float, float]
    probability: float = 0.05
    direction_policy: str = "axis4"  # shift only: "axis4" | "vertical_only"
    scale_policy: str = "both"  # scale only: "enlarge" | "shrink" | "both"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("shift", "scale"):
            raise ValueError(f"kind must be shift or scale, got {self.kind!r}")
        lo, hi = self.magnitude_range
        if not (0 < lo <= hi):
            raise ValueError(f"bad magnitude range {self.magnitude_range}")
        if not 0 <= self.probability <= 1:
            raise ValueError(f"probability must be in [0, 1], got {self.probability}")
        if self.direction_policy not in SHIFT_DIRECTIONS:
            raise ValueError(f"unknown direction policy {self.direction_policy!r}")
        if self.scale_policy not in ("enlarge", "shrink", "both"):
            raise ValueError(f"unknown scale policy {self.scale_policy!r}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "magnitude_range": list(self.magnitude_range),
            "probability": self.probability,
            "direction_policy": self.direction_policy,
            "scale_policy": self.scale_policy,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ManipulationSpec":
        return cls(
            kind=d["kind"],
            magnitude_range=tuple(d["magnitude_range"]),
            probability=d.get("probability", 0.05),
            direction_policy=d.get("direction_policy", "axis4"),
            scale_policy=d.get("scale_policy", "both"),
            seed=d.get("seed", 0),
        )


@dataclass
class ManipulationRecord:
    page_index: int
    original_box: Rect
    altered_box: Rect
    kind: str
    params: dict
    glyph: str

    def to_dict(self) -> dict:
        return {
            "page_index": self.page_index,
            "original_box": list(self.original_box),
            "altered_box": list(self.altered_box),
            "kind": self.kind,
            "params": self.params,
            "glyph": self.glyph,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ManipulationRecord":
        return cls(
            page_index=d["page_index"],
            original_box=tuple(d["original_box"]),
            altered_box=tuple(d["altered_box"]),
            kind=d["kind"],
            params=d["params"],
            glyph=d["glyph"],
        )


def _rects_intersect(a: Rect, b: Rect) -> bool:
    return a[0] < b[0] + b[2] and b[0] < a[0] + a[2] and a[1] < b[1] + b[3] and b[1] < a[1] + a[3]


def _union_rect(a: Rect, b: Rect) -> Rect:
    x0 = min(a[0], b[0])
    y0 = min(a[1], b[1])
    x1 = max(a[0] + a[2], b[0] + b[2])
    y1 = max(a[1] + a[3], b[1] + b[3])
    return (x0, y0, x1 - x0, y1 - y0)


def _border_mode(image: np.ndarray, rect: Rect) -> int:
    """Most frequent pixel value on the 1-px ring around rect (background fill)."""
    x0, y0, w, h = rect
    hh, ww = image.shape
    ring = []
    if y0 - 1 >= 0:
        ring.append(image[y0 - 1, max(x0 - 1, 0) : min(x0 + w + 1, ww)])
    if y0 + h < hh:
        ring.append(image[y0 + h, max(x0 - 1, 0) : min(x0 + w + 1, ww)])
    if x0 - 1 >= 0:
        ring.append(image[y0 : y0 + h, x0 - 1])
    if x0 + w < ww:
        ring.append(image[y0 : y0 + h, x0 + w])
    if not ring:
        return 255
    values = np.concatenate([r.reshape(-1) for r in ring])
    return int(np.bincount(values, minlength=256).argmax())


def _resample_bilinear(crop: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    img = Image.fromarray(crop, mode="L")
    return np.asarray(img.resize((new_w, new_h), resample=Image.BILINEAR))


def _draw_shift(rng: np.random.Generator, spec: ManipulationSpec) -> tuple[int, int]:
    lo, hi = int(spec.magnitude_range[0]), int(spec.magnitude_range[1])
    mag = int(rng.integers(lo, hi + 1))
    dirs = SHIFT_DIRECTIONS[spec.direction_policy]
    dx, dy = dirs[int(rng.integers(0, len(dirs)))]
    return dx * mag, dy * mag


def _draw_scale(rng: np.random.Generator, spec: ManipulationSpec) -> float:
    lo, hi = spec.magnitude_range
    u = float(rng.uniform(lo, hi))
    if spec.scale_policy == "enlarge":
        return 1.0 + u
    if spec.scale_policy == "shrink":
        return 1.0 - u
    return 1.0 + u if rng.integers(0, 2) == 1 else 1.0 - u


def manipulate_page(
    image: np.ndarray,
    boxes: Sequence[SourceBox],
    spec: ManipulationSpec,
    page_index: int = 0,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, list[ManipulationRecord]]:
    """Apply the manipulation spec to one page.

    Boxes are visited in order; each is altered with spec.probability.
    Shifts move the full box crop and backfill the vacated area with the
    local background color; scales resample the crop (bilinear) centered
    on the original box center. Alterations that would leave the image,
    overlap a previous alteration, or not change the integer geometry
    are skipped.
    """
    if rng is None:
        rng = derive_rng(spec.seed, page_index)
    out = image.copy()
    records: list[ManipulationRecord] = []
    claimed: list[Rect] = []
    hh, ww = out.shape

    for box in boxes:
        if rng.random() >= spec.probability:
            continue
        orig = box.rect
        if spec.kind == "shift":
            dx, dy = _draw_shift(rng, spec)
            altered: Rect = (box.x0 + dx, box.y0 + dy, box.width, box.height)
            params = {"dx": dx, "dy": dy}
        else:
            factor = None
            new_w = new_h = 0
            for _ in range(MAX_SCALE_REDRAWS):
                cand = _draw_scale(rng, spec)
                cw = int(round(box.width * cand))
                ch = int(round(box.height * cand))
                if (cw, ch) != (box.width, box.height) and cw > 0 and ch > 0:
                    factor, new_w, new_h = cand, cw, ch
                    break
            if factor is None:
                logger.warning("page %d: scale of %r never changed geometry; skipped", page_index, box)
                continue
            # integer center anchoring: floor(center - new/2)
            ax0 = (2 * box.x0 + box.width - new_w) // 2
            ay0 = (2 * box.y0 + box.height - new_h) // 2
            altered = (ax0, ay0, new_w, new_h)
            params = {"factor": factor}

        if altered[0] < 0 or altered[1] < 0 or altered[0] + altered[2] > ww or altered[1] + altered[3] > hh:
            logger.warning("page %d: altered box %r leaves image; skipped", page_index, altered)
            continue
        region = _union_rect(orig, altered)
        if any(_rects_intersect(region, c) for c in claimed):
            logger.warning("page %d: alteration at %r overlaps a previous one; skipped", page_index, region)
            continue

        crop = out[box.y0 : box.y0 + box.height, box.x0 : box.x0 + box.width].copy()
        fill = _border_mode(out, orig)
        out[box.y0 : box.y0 + box.height, box.x0 : box.x0 + box.width] = fill
        if spec.kind == "shift":
            pasted = crop
        else:
            pasted = _resample_bilinear(crop, altered[2], altered[3])
        out[altered[1] : altered[1] + altered[3], altered[0] : altered[0] + altered[2]] = pasted

        claimed.append(region)
        records.append(
            ManipulationRecord(
                page_index=page_index,
                original_box=orig,
                altered_box=altered,
                kind=spec.kind,
                params=params,
                glyph=box.glyph,
            )
        )
    return out, records


@dataclass
class CleanPage:
    """Renderer/loader output: pristine page image plus its character boxes."""

    image: np.ndarray
    boxes: list[SourceBox]
    name: str = ""


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def build_corpus(
    pages: Sequence[CleanPage],
    spec: ManipulationSpec,
    out_dir: str | Path,
    test_indices: Sequence[int] = (),
) -> dict:
    """Write a manipulated corpus directory and return its manifest.

    Layout: {train,test}/pageNNNN.png, {train,test}/truth.json (list of
    manipulation records), {train,test}/glyphs.json (post-manipulation
    character boxes, the seed regions for an OCR pass), manifest.json.
    Page N's RNG stream depends only on (seed, N), so the build is
    reproducible page by page.
    """
    out = Path(out_dir)
    test_set = set(test_indices)
    splits = {"train": [], "test": []}
    for i in range(len(pages)):
        splits["test" if i in test_set else "train"].append(i)

    manifest = {
        "tool_version": __version__,
        "spec": spec.to_dict(),
        "splits": {k: v for k, v in splits.items()},
        "pages": [],
    }

    for split, indices in splits.items():
        split_dir = out / split
        split_dir.mkdir(parents=True, exist_ok=True)
        truth: list[dict] = []
        glyph_maps: list[dict] = []
        for local_idx, page_idx in enumerate(indices):
            page = pages[page_idx]
            try:
                img, records = manipulate_page(page.image, page.boxes, spec, page_index=local_idx)
            except Exception as exc:  # keep building the rest of the corpus
                logger.error("page %s failed: %s", page.name or page_idx, exc)
                continue
            name = f"page{local_idx:04d}.png"
            Image.fromarray(img, mode="L").save(split_dir / name)
            truth.extend(r.to_dict() for r in records)

            altered_by_rect = {tuple(r.original_box): r.altered_box for r in records}
            glyph_boxes = []
            for b in page.boxes:
                rect = altered_by_rect.get(b.rect, b.rect)
                glyph_boxes.append({"glyph": b.glyph, "box": list(rect)})
            glyph_maps.append({"image": name, "page_index": local_idx, "glyphs": glyph_boxes})
            manifest["pages"].append({"split": split, "image": name, "source": page.name or str(page_idx)})
        _dump_json(split_dir / "truth.json", truth)
        _dump_json(split_dir / "glyphs.json", glyph_maps)

    _dump_json(out / "manifest.json", manifest)
    return manifest


def load_truth(split_dir: str | Path) -> dict[int, list[ManipulationRecord]]:
    """Ground-truth records of a corpus split, grouped by page index."""
    records = [ManipulationRecord.from_dict(d) for d in json.loads(Path(split_dir, "truth.json").read_text())]
    by_page: dict[int, list[ManipulationRecord]] = {}
    for r in records:
        by_page.setdefault(r.page_index, []).append(r)
    return by_page
