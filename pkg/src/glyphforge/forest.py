"""Random forest over sub-graph feature vectors.

Trees grow on size-n bootstrap samples, consider sqrt(d) features per
split by default, and vote with their leaf positive-class fractions.
Per-tree RNG streams derive from (train seed, tree index), so a forest
is reproducible regardless of how many worker threads build it.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .rng import derive_rng
from .tree import Tree, fit_tree, tree_leaf_fractions

MODEL_MAGIC = b"GFOR"
MODEL_VERSION = 1


class DegenerateLabelsError(ValueError):
    """Raised when training labels contain fewer than two classes."""


class ModelFormatError(ValueError):
    """Raised for unreadable, truncated, or corrupt model payloads."""


@dataclass(frozen=True)
class ForestHyperparams:
    n_trees: int
    max_depth: int
    min_samples_leaf: int
    n_neighbors: int
    seed: int = 0
    features_per_split: int | None = None  # None = sqrt(d)

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError("hyperparameters must be positive")

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "n_neighbors": self.n_neighbors,
            "seed": self.seed,
            "features_per_split": self.features_per_split,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestHyperparams":
        return cls(
            n_trees=d["n_trees"],
            max_depth=d["max_depth"],
            min_samples_leaf=d["min_samples_leaf"],
            n_neighbors=d["n_neighbors"],
            seed=d.get("seed", 0),
            features_per_split=d.get("features_per_split"),
        )


@dataclass(frozen=True)
class FeatureSchema:
    n_neighbors: int
    n_features: int
    node_fields: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "n_neighbors": self.n_neighbors,
            "n_features": self.n_features,
            "node_fields": list(self.node_fields),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(d["n_neighbors"], d["n_features"], tuple(d["node_fields"]))


@dataclass
class ForestModel:
    trees: list[Tree]
    hyperparams: ForestHyperparams
    schema: FeatureSchema
    train_seed: int
    oob_fractions: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return self.schema.n_features


def _default_schema(hp: ForestHyperparams, n_features: int) -> FeatureSchema:
    from .features import FEATURE_FIELDS

    return FeatureSchema(hp.n_neighbors, n_features, FEATURE_FIELDS)


def train(
    X: np.ndarray,
    y: np.ndarray,
    hp: ForestHyperparams,
    schema: FeatureSchema | None = None,
    jobs: int = 1,
) -> ForestModel:
    """Fit hp.n_trees bootstrap trees on (X, y); y must contain both classes."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-D matrix")
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y row counts differ")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training rows")
    classes = np.unique(y)
    if classes.size < 2:
        raise DegenerateLabelsError("degenerate labels: a single class is present")
    if not np.isin(classes, (0, 1)).all():
        raise ValueError("labels must be 0/1")

    n, d = X.shape
    n_feats = hp.features_per_split if hp.features_per_split else max(1, int(math.isqrt(d)))
    if schema is None:
        schema = _default_schema(hp, d)
    if schema.n_features != d:
        raise ValueError(f"schema expects {schema.n_features} features, matrix has {d}")

    boots = []
    kernel_seeds = []
    for t in range(hp.n_trees):
        rng = derive_rng(hp.seed, t)
        boots.append(rng.integers(0, n, size=n).astype(np.int64))
        kernel_seeds.append(int(rng.integers(1, 2**63)))

    def build(t: int) -> Tree:
        return fit_tree(X, y, boots[t], hp.max_depth, hp.min_samples_leaf, n_feats, kernel_seeds[t])

    if jobs > 1 and hp.n_trees > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trees = list(pool.map(build, range(hp.n_trees)))
    else:
        trees = [build(t) for t in range(hp.n_trees)]

    oob = [1.0 - np.unique(b).size / n for b in boots]
    return ForestModel(trees=trees, hyperparams=hp, schema=schema, train_seed=hp.seed, oob_fractions=oob)


def predict_scores(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Mean leaf positive fraction per row; exact and tree-order independent."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    fracs = np.empty((X.shape[0], len(model.trees)))
    for t, tree in enumerate(model.trees):
        fracs[:, t] = tree_leaf_fractions(tree, X)
    k = len(model.trees)
    return np.array([math.fsum(row.tolist()) / k for row in fracs])


def predict_batch(model: ForestModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(labels, scores); label 1 when score >= 0.5 (exact ties count as flagged)."""
    scores = predict_scores(model, X)
    return (scores >= 0.5).astype(np.int8), scores


def predict(model: ForestModel, x: np.ndarray) -> tuple[int, float]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict takes a single feature vector")
    if x.size != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {x.size}")
    labels, scores = predict_batch(model, x.reshape(1, -1))
    return int(labels[0]), float(scores[0])


# ---------------------------------------------------------------------------
# Persistence. Layout (little-endian):
#   magic "GFOR" | u16 version | u32 header_len | header JSON (utf-8)
#   per tree: u32 n_nodes | feature i32[n] | threshold f64[n] | left i32[n]
#             | right i32[n] | count0 i64[n] | count1 i64[n]
#   u32 crc32 of everything after the magic
# ---------------------------------------------------------------------------

def save_model(model: ForestModel) -> bytes:
    header = json.dumps(
        {
            "hyperparams": model.hyperparams.to_dict(),
            "schema": model.schema.to_dict(),
            "train_seed": model.train_seed,
            "n_trees": len(model.trees),
            "oob_fractions": model.oob_fractions,
        }
    ).encode("utf-8")
    parts = [struct.pack("<H", MODEL_VERSION), struct.pack("<I", len(header)), header]
    for tree in model.trees:
        parts.append(struct.pack("<I", tree.n_nodes))
        parts.append(tree.feature.astype("<i4").tobytes())
        parts.append(tree.threshold.astype("<f8").tobytes())
        parts.append(tree.left.astype("<i4").tobytes())
        parts.append(tree.right.astype("<i4").tobytes())
        parts.append(tree.count0.astype("<i8").tobytes())
        parts.append(tree.count1.astype("<i8").tobytes())
    payload = b"".join(parts)
    return MODEL_MAGIC + payload + struct.pack("<I", zlib.crc32(payload))


def load_model(data: bytes) -> ForestModel:
    if len(data) < len(MODEL_MAGIC) + 10:
        raise ModelFormatError("model payload too short to be valid")
    if data[:4] != MODEL_MAGIC:
        raise ModelFormatError("bad magic bytes: not a forest model file")
    payload, (crc,) = data[4:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(payload) != crc:
        raise ModelFormatError("corrupt payload: CRC mismatch")
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(payload):
            raise ModelFormatError("corrupt payload: truncated")
        chunk = payload[off : off + n]
        off += n
        return chunk

    (version,) = struct.unpack("<H", take(2))
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported format version {version} (supported: {MODEL_VERSION})")
    (hlen,) = struct.unpack("<I", take(4))
    header = json.loads(take(hlen).decode("utf-8"))
    trees = []
    for _ in range(header["n_trees"]):
        (n_nodes,) = struct.unpack("<I", take(4))
        feature = np.frombuffer(take(4 * n_nodes), dtype="<i4").copy()
        threshold = np.frombuffer(take(8 * n_nodes), dtype="<f8").copy()
        left = np.frombuffer(take(4 * n_nodes), dtype="<i4").copy()
        right = np.frombuffer(take(4 * n_nodes), dtype="<i4").copy()
        count0 = np.frombuffer(take(8 * n_nodes), dtype="<i8").copy()
        count1 = np.frombuffer(take(8 * n_nodes), dtype="<i8").copy()
        trees.append(Tree(feature, threshold, left, right, count0, count1))
    if off != len(payload):
        raise ModelFormatError("corrupt payload: trailing bytes")
    return ForestModel(
        trees=trees,
        hyperparams=ForestHyperparams.from_dict(header["hyperparams"]),
        schema=FeatureSchema.from_dict(header["schema"]),
        train_seed=header["train_seed"],
        oob_fractions=header["oob_fractions"],
    )


def model_to_json(model: ForestModel) -> str:
    """Human-inspectable JSON export (not meant for reloading)."""
    doc = {
        "hyperparams": model.hyperparams.to_dict(),
        "schema": model.schema.to_dict(),
        "train_seed": model.train_seed,
        "oob_fractions": model.oob_fractions,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "count0": t.count0.tolist(),
                "count1": t.count1.tolist(),
            }
            for t in model.trees
        ],
    }
    return json.dumps(doc, indent=2)
