"""Per-character sub-graph feature vectors.

Each character box is the central node of a sub-graph with up to n
same-line neighbors per side (2n+1 nodes). Every node contributes 12
values (geometry, seven shape invariants, inertia angle); the
concatenation, ordered left-most node to right-most, is the training
vector for the central character. Missing edge neighbors are imputed by
mirroring the same-rank node from the other side, falling back to a
copy of the central node.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .moments import MomentSet, analyze_patch, binarize
from .ocr import CharBox, Page, TextLine

FEATURE_FIELDS: tuple[str, ...] = (
    "height", "width", "dy", "distance",
    "hu1", "hu2", "hu3", "hu4", "hu5", "hu6", "hu7",
    "inertia_angle",
)
FIELDS_PER_NODE = len(FEATURE_FIELDS)
VALID_N = (3, 5, 7, 9)


class CropBoundsError(ValueError):
    """Raised when a character box does not fit inside its page image."""


@dataclass(frozen=True)
class NodeFeatures:
    """12-value descriptor of one sub-graph node relative to the central node."""

    height: float
    width: float
    dy: float
    distance: float
    hu: np.ndarray
    inertia_angle: float
    imputed: bool = False

    def values(self) -> list[float]:
        return [self.height, self.width, self.dy, self.distance, *self.hu.tolist(), self.inertia_angle]


@dataclass
class SubGraphVector:
    central_glyph: str
    n: int
    values: np.ndarray
    label: int
    source: tuple[int, int, int]  # (page_index, line_index, center_index)


def box_distance(a: CharBox, b: CharBox) -> float:
    """Euclidean distance between box centers."""
    ax, ay = a.center
    bx, by = b.center
    return math.hypot(ax - bx, ay - by)


def neighbors(line: TextLine, center_index: int, n: int) -> tuple[list[CharBox], list[CharBox]]:
    """Up to n boxes on each side of the center, nearest-first."""
    boxes = line.boxes
    if not 0 <= center_index < len(boxes):
        raise IndexError(f"center index {center_index} outside line of {len(boxes)}")
    left = [boxes[i] for i in range(center_index - 1, max(center_index - n, 0) - 1, -1)]
    right = [boxes[i] for i in range(center_index + 1, min(center_index + n, len(boxes) - 1) + 1)]
    return left, right


def impute(
    left: Sequence[NodeFeatures],
    right: Sequence[NodeFeatures],
    central: NodeFeatures,
    n: int,
) -> tuple[list[NodeFeatures], list[NodeFeatures]]:
    """Fill missing neighbor ranks, mirroring the other side when possible.

    Rank r on an empty slot takes the other side's rank-r features verbatim
    (dy and distance included) marked imputed; when both sides miss rank r
    the slot takes the central node's own features with dy=0, distance=0.
    """
    center_copy = replace(central, dy=0.0, distance=0.0, imputed=True)

    def fill(primary: Sequence[NodeFeatures], other: Sequence[NodeFeatures]) -> list[NodeFeatures]:
        out = []
        for r in range(n):
            if r < len(primary):
                out.append(primary[r])
            elif r < len(other):
                out.append(replace(other[r], imputed=True))
            else:
                out.append(center_copy)
        return out

    return fill(left, right), fill(right, left)


def _crop(image: np.ndarray, box: CharBox) -> np.ndarray:
    h, w = image.shape[:2]
    if box.x0 + box.width > w or box.y0 + box.height > h:
        raise CropBoundsError(
            f"box glyph={box.glyph!r} ({box.x0},{box.y0},{box.width},{box.height}) "
            f"outside image {w}x{h}"
        )
    return image[box.y0 : box.y0 + box.height, box.x0 : box.x0 + box.width]


def _intrinsics(image: np.ndarray, box: CharBox) -> MomentSet:
    return analyze_patch(binarize(_crop(image, box)))


def node_features(box: CharBox, central: CharBox, moments: MomentSet) -> NodeFeatures:
    """Features of `box` viewed from `central` (dy is top-edge offset, signed)."""
    return NodeFeatures(
        height=float(box.height),
        width=float(box.width),
        dy=float(box.y0 - central.y0),
        distance=box_distance(box, central),
        hu=moments.hu,
        inertia_angle=moments.inertia_angle,
    )


def iou(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> float:
    """Intersection-over-union of two (x0, y0, w, h) rectangles."""
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    ix = max(0, min(ax0 + aw, bx0 + bw) - max(ax0, bx0))
    iy = max(0, min(ay0 + ah, by0 + bh) - max(ay0, by0))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def label_boxes(ocr_boxes: Sequence[CharBox], truth_boxes: Sequence[tuple[int, int, int, int]]) -> list[int]:
    """Label 1 for OCR boxes matching any ground-truth altered box.

    A match is IoU >= 0.5, or the truth box center falling inside the OCR
    box (fallback for loose OCR geometry).
    """
    labels = []
    for b in ocr_boxes:
        rect = (b.x0, b.y0, b.width, b.height)
        hit = 0
        for t in truth_boxes:
            if iou(rect, t) >= 0.5:
                hit = 1
                break
            cx = t[0] + t[2] / 2.0
            cy = t[1] + t[3] / 2.0
            if b.x0 <= cx <= b.x0 + b.width and b.y0 <= cy <= b.y0 + b.height:
                hit = 1
                break
        labels.append(hit)
    return labels


def _assemble(
    line: TextLine,
    center_index: int,
    n: int,
    cache: Sequence[MomentSet],
    labels: Sequence[int],
    page_index: int,
    line_index: int,
) -> SubGraphVector:
    central_box = line.boxes[center_index]
    central = node_features(central_box, central_box, cache[center_index])
    left_boxes, right_boxes = neighbors(line, center_index, n)

    def feats(boxes: Sequence[CharBox], offsets: range) -> list[NodeFeatures]:
        return [node_features(b, central_box, cache[i]) for b, i in zip(boxes, offsets)]

    left = feats(left_boxes, range(center_index - 1, center_index - 1 - len(left_boxes), -1))
    right = feats(right_boxes, range(center_index + 1, center_index + 1 + len(right_boxes)))
    left_full, right_full = impute(left, right, central, n)

    ordered = list(reversed(left_full)) + [central] + right_full
    values = np.array([v for nf in ordered for v in nf.values()], dtype=np.float64)
    return SubGraphVector(
        central_glyph=central_box.glyph,
        n=n,
        values=values,
        label=int(labels[center_index]),
        source=(page_index, line_index, center_index),
    )


def build_vector(
    page: Page,
    image: np.ndarray,
    line: TextLine,
    center_index: int,
    n: int,
    labels: Sequence[int],
) -> SubGraphVector:
    """Feature vector of length 12*(2n+1) for one central character.

    `labels` is the per-box 0/1 ground truth for `line` (see label_boxes).
    """
    if n not in VALID_N:
        raise ValueError(f"n must be one of {VALID_N}, got {n}")
    if image.shape[0] != page.image_height or image.shape[1] != page.image_width:
        raise ValueError("image dimensions do not match page metadata")
    line_index = page.lines.index(line) if line in page.lines else -1
    cache = [_intrinsics(image, b) for b in line.boxes]
    return _assemble(line, center_index, n, cache, labels, page.page_index, line_index)


def extract_page_vectors(
    page: Page,
    image: np.ndarray,
    n_values: Sequence[int],
    truth_boxes: Sequence[tuple[int, int, int, int]],
) -> dict[int, list[SubGraphVector]]:
    """All sub-graph vectors of a page, for each requested n.

    Per-box moments are computed once and shared across centers and n
    values; output order is (line, center) regardless of n.
    """
    for n in n_values:
        if n not in VALID_N:
            raise ValueError(f"n must be one of {VALID_N}, got {n}")
    out: dict[int, list[SubGraphVector]] = {n: [] for n in n_values}
    for line_index, line in enumerate(page.lines):
        cache = [_intrinsics(image, b) for b in line.boxes]
        labels = label_boxes(line.boxes, truth_boxes)
        for center_index in range(len(line.boxes)):
            for n in n_values:
                out[n].append(
                    _assemble(line, center_index, n, cache, labels, page.page_index, line_index)
                )
    return out


@dataclass
class FeatureMatrix:
    """Stacked sub-graph vectors plus provenance columns."""

    n: int
    X: np.ndarray
    y: np.ndarray
    glyphs: np.ndarray
    page_index: np.ndarray
    line_index: np.ndarray
    center_index: np.ndarray

    @property
    def field_names(self) -> list[str]:
        return [f"f{i:03d}" for i in range(self.X.shape[1])]

    @classmethod
    def from_vectors(cls, n: int, vectors: Sequence[SubGraphVector]) -> "FeatureMatrix":
        if not vectors:
            width = FIELDS_PER_NODE * (2 * n + 1)
            return cls(n, np.zeros((0, width)), np.zeros(0, dtype=np.int8),
                       np.zeros(0, dtype="<U1"), np.zeros(0, dtype=np.int32),
                       np.zeros(0, dtype=np.int32), np.zeros(0, dtype=np.int32))
        X = np.stack([v.values for v in vectors])
        return cls(
            n=n,
            X=X,
            y=np.array([v.label for v in vectors], dtype=np.int8),
            glyphs=np.array([v.central_glyph for v in vectors]),
            page_index=np.array([v.source[0] for v in vectors], dtype=np.int32),
            line_index=np.array([v.source[1] for v in vectors], dtype=np.int32),
            center_index=np.array([v.source[2] for v in vectors], dtype=np.int32),
        )


def save_matrix_csv(m: FeatureMatrix, path: str) -> None:
    """Write the matrix as CSV; floats use repr for lossless round-trip."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["page_index", "line_index", "center_index", "glyph", "n", *m.field_names, "label"])
        for i in range(m.X.shape[0]):
            w.writerow(
                [
                    int(m.page_index[i]), int(m.line_index[i]), int(m.center_index[i]),
                    m.glyphs[i], m.n,
                    *[repr(float(v)) for v in m.X[i]],
                    int(m.y[i]),
                ]
            )


def load_matrix_csv(path: str) -> FeatureMatrix:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        n_feat = len(header) - 6
        rows = list(r)
    n = int(rows[0][4]) if rows else (n_feat // FIELDS_PER_NODE - 1) // 2
    X = np.empty((len(rows), n_feat))
    y = np.empty(len(rows), dtype=np.int8)
    glyphs, pages, lines, centers = [], [], [], []
    for i, row in enumerate(rows):
        pages.append(int(row[0]))
        lines.append(int(row[1]))
        centers.append(int(row[2]))
        glyphs.append(row[3])
        X[i] = [float(v) for v in row[5 : 5 + n_feat]]
        y[i] = int(row[-1])
    return FeatureMatrix(
        n=n, X=X, y=y,
        glyphs=np.array(glyphs) if glyphs else np.zeros(0, dtype="<U1"),
        page_index=np.array(pages, dtype=np.int32),
        line_index=np.array(lines, dtype=np.int32),
        center_index=np.array(centers, dtype=np.int32),
    )


def save_matrix_npz(m: FeatureMatrix, path: str) -> None:
    """Binary twin of the CSV format (see README for the field layout)."""
    np.savez_compressed(
        path,
        n=np.int64(m.n),
        X=m.X,
        y=m.y.astype(np.int8),
        glyphs=m.glyphs,
        page_index=m.page_index,
        line_index=m.line_index,
        center_index=m.center_index,
        node_fields=np.array(FEATURE_FIELDS),
    )


def load_matrix_npz(path: str) -> FeatureMatrix:
    with np.load(path, allow_pickle=False) as z:
        return FeatureMatrix(
            n=int(z["n"]),
            X=z["X"],
            y=z["y"],
            glyphs=z["glyphs"],
            page_index=z["page_index"],
            line_index=z["line_index"],
            center_index=z["center_index"],
        )


def central_block(m: FeatureMatrix) -> np.ndarray:
    """The central node's 12 columns of each row."""
    start = FIELDS_PER_NODE * m.n
    return m.X[:, start : start + FIELDS_PER_NODE]


def load_matrix(path: str) -> FeatureMatrix:
    if str(path).endswith(".npz"):
        return load_matrix_npz(path)
    return load_matrix_csv(path)
